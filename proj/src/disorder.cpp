#include "polymer2d/disorder.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "polymer2d/kernels.hpp"
#include "polymer2d/numerics.hpp"

namespace polymer2d {

namespace {
constexpr double kSqrt3 = 1.7320508075688772935;

// log(sinh(x)/x), stable at small x and safe from overflow at large x
double log_sinhc(double x) {
  x = std::fabs(x);
  if (x < 1e-3) {
    const double x2 = x * x;
    // log(1 + x^2/6 + x^4/120 + ...)
    return std::log1p(x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0)));
  }
  if (x > 30.0) return x - std::log(2.0 * x) + std::log1p(-std::exp(-2.0 * x));
  return std::log(std::sinh(x) / x);
}
}  // namespace

Family family_from_string(const std::string& s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "rademacher") return Family::rademacher;
  if (s == "uniform") return Family::uniform;
  throw std::invalid_argument("unknown disorder family: " + s);
}

std::string to_string(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::rademacher: return "rademacher";
    case Family::uniform: return "uniform";
  }
  return "?";
}

double DisorderModel::cumulant(double beta) const {
  switch (family) {
    case Family::gaussian: return 0.5 * beta * beta;
    case Family::rademacher: {
      // log cosh, overflow-safe
      const double a = std::fabs(beta);
      return a > 30.0 ? a - std::log(2.0) + std::log1p(std::exp(-2.0 * a))
                      : std::log(std::cosh(a));
    }
    case Family::uniform: return log_sinhc(kSqrt3 * beta);
  }
  return 0.0;
}

double DisorderModel::pair_variance(double beta) const {
  return std::expm1(cumulant(2.0 * beta) - 2.0 * cumulant(beta));
}

double DisorderModel::sample(uint64_t b1, uint64_t b2) const {
  switch (family) {
    case Family::gaussian: return normal_from_bits(b1, b2);
    case Family::rademacher: return u01(b1) < 0.5 ? 1.0 : -1.0;
    case Family::uniform: return kSqrt3 * (2.0 * u01(b1) - 1.0);
  }
  return 0.0;
}

double DisorderModel::tilted_sample(double beta, uint64_t b1, uint64_t b2) const {
  const double u = u01(b1);
  switch (family) {
    case Family::gaussian:
      return normal_from_bits(b1, b2) + beta;
    case Family::rademacher: {
      // P~(+1) = e^b / (2 cosh b), monotone in the shared uniform
      const double pplus = 1.0 / (1.0 + std::exp(-2.0 * beta));
      return u < pplus ? 1.0 : -1.0;
    }
    case Family::uniform: {
      // inverse CDF of density e^{beta w}/Z on [-sqrt3, sqrt3]:
      // w = sqrt3 + log(e^{-2a} + u (1 - e^{-2a})) / beta, a = sqrt3 beta
      if (std::fabs(beta) < 1e-12) return kSqrt3 * (2.0 * u - 1.0);
      const double a = kSqrt3 * beta;
      if (beta > 0.0) {
        const double e = std::exp(-2.0 * a);
        return kSqrt3 + std::log(e + u * (1.0 - e)) / beta;
      }
      const double e = std::exp(2.0 * a);
      return -kSqrt3 + std::log(e + u * (1.0 - e)) / beta;
    }
  }
  return 0.0;
}

CriticalPoint solve_beta(const DisorderModel& m, int n, double theta) {
  if (n < 1) throw std::invalid_argument("solve_beta: n must be >= 1");
  CriticalPoint cp;
  cp.n = n;
  cp.theta = theta;
  if (std::isinf(theta) && theta < 0) return cp;  // beta = 0, sigma2 = 0
  const double rn = overlap_sum(n);
  if (!(theta < kPi * rn))
    throw std::invalid_argument(
        "calibration out of range: theta must satisfy theta < pi R_n");
  const double target = 1.0 / (rn - theta / kPi);

  double lo = 1e-8, hi = 1e-8;
  if (m.pair_variance(lo) >= target) {
    lo = 0.0;  // target below sigma2(1e-8); bracket [0, 1e-8]
  } else {
    while (m.pair_variance(hi) < target) {
      hi *= 2.0;
      if (hi > 1e6)
        throw std::invalid_argument(
            "calibration out of range: family cannot reach required variance");
    }
    lo = hi / 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (m.pair_variance(mid) < target ? lo : hi) = mid;
  }
  cp.beta = 0.5 * (lo + hi);
  cp.sigma2 = m.pair_variance(cp.beta);
  return cp;
}

double theta_of(int n, const DisorderModel& m, double beta) {
  if (n < 1) throw std::invalid_argument("theta_of: n must be >= 1");
  if (beta == 0.0) return -std::numeric_limits<double>::infinity();
  return kPi * overlap_sum(n) - kPi / m.pair_variance(beta);
}

double etheta_direct(int n, const DisorderModel& m, double beta) {
  const double th = theta_of(n, m, beta);
  return std::isinf(th) && th < 0 ? 0.0 : std::exp(th);
}

double etheta_split(int n, const DisorderModel& m, double beta) {
  if (beta == 0.0) return 0.0;
  const double alpha_n = kPi * overlap_sum(n) - std::log((double)n);
  return std::exp(alpha_n) * (double)n *
         std::exp(-kPi / m.pair_variance(beta));
}

}  // namespace polymer2d
