#pragma once
// Exact (non-Monte-Carlo) moment machinery built on the renewal structure of
// walk collisions: point second moments B, chaos-truncated sums V, weighted
// overlap kernels and Green functions, covariance of centered partition
// functions, quasicritical diagnostics, and renewal-stretch statistics.
#include <cstdint>
#include <string>
#include <vector>

#include "polymer2d/field.hpp"

namespace polymer2d {

// B[m] = 1 + sigma2 sum_{j<=m} u(j) B[m-j], m = 0..n
std::vector<double> second_moment_point(int n, double sigma2);

// independent route: sum_k (sigma2)^k b_k(n) through renewal subset sums
double second_moment_point_series(int n, double sigma2);

// overlap kernels q_{2i}(f, g) = sum_{x,y} f(x) g(y) p_{2i}(y - x), i = 0..n
// (index 0 holds sum_x f(x) g(x), unused by the moment sums)
std::vector<double> overlap_kernel(int n, const MassFunction& f,
                                   const MassFunction& g);

// E[Z_n(f) Z_n(g)] = (f total)(g total) + sigma2 sum_i q_{2i}(f,g) B[n-i]
double second_moment_field(int n, double sigma2, const MassFunction& f,
                           const MassFunction& g);
double second_moment_field(int n, double sigma2, const MassFunction& f);

// G_n(f, g) = sum_{i=1..n} q_{2i}(f, g)
double green_weighted(int n, const MassFunction& f, const MassFunction& g);

// V[m] = sum_{k=0}^{K-1} (sigma2)^k b_k(m); K <= 0 means untruncated (= B)
std::vector<double> truncated_variance(int n, double sigma2, int K);

struct HatMoment {
  double value = 0;  // sigma2 sum_{i=1..n} q_{2i}(f,g) V[n-i]
  double lower = 0;  // sigma2 V[n/2] G_{n/2}(f,g)
  double upper = 0;  // sigma2 V[n]   G_n(f,g)
};
// covariance of centered partition functions with chaos cut at order K
HatMoment hat_moment(int n, double sigma2, int K, const MassFunction& f,
                     const MassFunction& g);

struct QuasicriticalReport {
  int n = 0;
  double theta = 0, sigma2 = 0, beta = 0;
  double second_moment = 0;  // E[Z_n(U_sqrt n)^2]
  double loglog = 0;         // log log of the above
  double gap = 0;            // loglog - (theta - gamma); model bound is 1/2
};
QuasicriticalReport quasicritical_check(int n, double theta);

// alternating-stretch statistics of two independent renewals on [1, n_tilde]
// (uniform starts, step law u(m)/R): J[l] = P(no common point, >= l stretches)
struct StretchReport {
  int n_tilde = 0;
  long reps = 0;
  std::vector<double> j_ell;   // index l = 0..ell_max (l <= 1 trivially 1)
  std::vector<double> stderr_; // binomial standard errors
};
StretchReport stretch_prob_mc(int n_tilde, int ell_max, long reps,
                              uint64_t seed);

// CSV rows m, B_m, V_m; K recorded in the header line
void export_moment_csv(const std::string& path, int n, double sigma2, int K);

}  // namespace polymer2d
