#pragma once
// Disorder families (mean 0, variance 1), their log-MGF lambda(beta), the
// pair variance sigma2(beta) = e^{lambda(2b)-2lambda(b)} - 1, calibration of
// beta against the centered overlap parameter theta, and tilted sampling for
// the size-biased measure.
#include <cmath>
#include <cstdint>
#include <string>

#include "polymer2d/rng.hpp"

namespace polymer2d {

enum class Family { gaussian, rademacher, uniform };

Family family_from_string(const std::string& s);  // throws on unknown
std::string to_string(Family f);

struct DisorderModel {
  Family family = Family::gaussian;

  double cumulant(double beta) const;       // lambda(beta) = log E e^{beta w}
  double pair_variance(double beta) const;  // sigma2(beta)
  // plain draw from one u64 of cell bits (gaussian needs a second word)
  double sample(uint64_t b1, uint64_t b2) const;
  // draw under the exponentially tilted law e^{beta w - lambda} dP, coupled
  // to the plain draw through the same uniforms
  double tilted_sample(double beta, uint64_t b1, uint64_t b2) const;
  // e^{beta w - lambda(beta)}
  double weight(double beta, double omega) const {
    return std::exp(beta * omega - cumulant(beta));
  }
};

// calibrated point: sigma2(beta) = 1/(R_n - theta/pi), theta = pi R_n - pi/sigma2
struct CriticalPoint {
  int n = 0;
  double theta = 0, beta = 0, sigma2 = 0;
};

// bisection on pair_variance; theta = -inf gives beta = 0.
// throws std::invalid_argument("calibration out of range ...") when
// theta >= pi R_n or the family cannot reach the required sigma2.
CriticalPoint solve_beta(const DisorderModel& m, int n, double theta);

// theta(n, beta); beta = 0 maps to -infinity (e^theta = 0 downstream)
double theta_of(int n, const DisorderModel& m, double beta);

// the two e^theta routes (identity e^theta = e^{alpha_n} n e^{-pi/sigma2});
// exposed separately so tests can compare them
double etheta_direct(int n, const DisorderModel& m, double beta);
double etheta_split(int n, const DisorderModel& m, double beta);

}  // namespace polymer2d
