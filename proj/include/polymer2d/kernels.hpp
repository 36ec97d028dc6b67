#pragma once
// Simple-random-walk kernels on Z^2, return probabilities, the overlap sum
// R_n, the truncated renewal law, and the Dickman density.
//
// Conventions: q_n(x) = P(S_n = x), u(n) = P(S_2n = 0) = sum_x q_n(x)^2,
// R_n = sum_{m<=n} u(m). In rotated coordinates (x1+x2, x1-x2) the walk
// splits into two independent 1D walks, so q_n(x) = p_n(x1+x2) p_n(x1-x2);
// that product form is the closed-form route used beyond any convolution
// horizon and is cross-validated against convolution in the tests.
#include <cstdint>
#include <string>
#include <vector>

#include "polymer2d/numerics.hpp"
#include "polymer2d/rng.hpp"

namespace polymer2d {

// u(n), exact ratio recurrence, cached
double return_mass(int64_t n);
// R_n = sum_{m=1..n} u(m), cached prefix sums
double overlap_sum(int64_t n);
// closed-form q_n(x) (diagonal product)
double srw_q(int64_t n, int64_t x1, int64_t x2);

// Convolution-backed kernel table over the exact cone. Rolling slices; u(n)
// kept for all n <= n_max, q slices persisted inside |x|_inf <= r_win at the
// requested times.
class KernelTable {
 public:
  static KernelTable build(int n_max, int r_win,
                           const std::vector<int>& persist_times);
  // exact convolution value; throws std::out_of_range when (n, x) is not
  // persisted ("time not persisted" / "site outside persisted window")
  double step_kernel(int n, int x1, int x2) const;
  double return_mass(int n) const;  // u(n) from the convolution run
  double overlap_sum(int n) const;  // prefix of the above
  int n_max() const { return n_max_; }
  int r_win() const { return r_win_; }

 private:
  int n_max_ = 0, r_win_ = 0;
  std::vector<double> u_, r_;                // 1..n_max
  std::vector<int> times_;                   // persisted slice times, sorted
  std::vector<std::vector<double>> slices_;  // rotated-compressed windows
};

// Renewal law T^(n): P(T = j) = u(j)/R_n on 1..n.
struct RenewalLaw {
  explicit RenewalLaw(int n);
  int n;
  std::vector<double> mass;  // index 1..n
  std::vector<double> cum;   // cumulative, for sampling
  // P(tau_k <= n), k-fold convolution (k = 0 -> 1)
  double hit_prob(int k) const;
  // one renewal step
  int sample(SeqRng& rng) const;
};

// sum over size-k subsets I of [1,n] of prod u(gaps): b_k(n) = R_n^k P(tau_k<=n)
// computed directly by banded convolution; b[0] = 1. Used by the moment layer.
std::vector<double> renewal_subset_sums(int n, int kmax);

// Laplace transform R^(lambda) = sum_{n>=1} e^{-lambda n} u(n), summed until
// the geometric tail bound drops below tail_tol.
struct LaplaceResult {
  double value = 0;
  int64_t n_terms = 0;
  double tail_bound = 0;  // certified remainder bound
};
LaplaceResult laplace_overlap(double lambda, double tail_tol = 1e-14);

// Dickman density G_0(t) on (0,1]: integral of s t^{s-1} e^{-gamma s}/Gamma(s+1)
// split at s = 1 and s = 50 with a certified Stirling tail bound.
double dickman_density(double t);
// int_0^1 G_0(u) e^{-lambda u} du (for the slow-decay trend checks)
double dickman_laplace(double lambda);

// CSV "n,u_n,R_n" with 17 significant digits, rows 1..n
void export_overlap_csv(const std::string& path, int n);

}  // namespace polymer2d
