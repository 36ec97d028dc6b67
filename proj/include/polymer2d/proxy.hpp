#pragma once
// Coarse-grained proxy statistic X: even time-strip decomposition, exact
// plain variance and tilted means from the renewal calculus, Monte Carlo
// tilted variance, and the Chebyshev event report.
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "polymer2d/engine.hpp"

namespace polymer2d {

struct StripDecomposition {
  int N = 0;           // requested horizon
  double eta = 0;      // strip parameter, strip width ~ e^{-eta} N
  int M = 0;           // number of even strips; 2M strips total
  int n_tilde = 0;     // strip width
  int n_effective = 0; // 2 M n_tilde <= N; all sums run to this horizon
  // strip j (1-based) covers times ((j-1) n_tilde, j n_tilde]
  int strip_lo(int j) const { return (j - 1) * n_tilde; }
  int strip_hi(int j) const { return j * n_tilde; }
};

// rounding rule: M = ceil(e^eta / 2), n_tilde = floor(N / (2M))
StripDecomposition make_strips(int N, double eta);

// reusable evaluation plan (per-strip start-kernel rows and windows)
class ProxyEvaluator {
 public:
  ProxyEvaluator(const StripDecomposition& strips, const DpOpts& opts = {});
  const StripDecomposition& strips() const { return strips_; }
  // untruncated X = sum_l X_{2l}; one backward sweep per even strip
  double value(const FieldCtx& ctx) const;
  // per-strip values X_{2l}, l = 1..M (index 0)
  std::vector<double> strip_values(const FieldCtx& ctx) const;

 private:
  StripDecomposition strips_;
  DpOpts opts_;
  struct StripPlan {
    int j = 0;        // strip index (even)
    int s = 0, t = 0; // time range (s, t]
    int r_mu = 0;     // rotated radius of the start-kernel window
    std::vector<double> pu;  // p_s(u) over u = -r_mu..r_mu step 2
  };
  std::vector<StripPlan> plans_;
};

// untruncated (K <= 0) or chaos-truncated proxy value; the truncated mode
// enumerates subsets |A| <= K and is restricted to n_effective <= 12
double proxy_value(const FieldCtx& ctx, const StripDecomposition& strips,
                   int K = 0, const DpOpts& opts = {});

struct ProxyMoments {
  double var_x = 0;                         // sum over even strips
  std::vector<double> var_strip;            // per even strip, l = 1..M
  std::vector<std::array<int, 2>> grid;     // tilted-mean evaluation sites
  std::vector<double> tilted_mean;          // E~_x[X] per grid site
  double tilted_mean_inf = 0;               // min over the grid
  std::array<int, 2> argmin{0, 0};
  double threshold = 0;                     // t* = E~_inf / 2
  double cheby_plain = 0;                   // 4 Var(X) / E~_inf^2
};
// exact sums; K <= 0 uses the untruncated chaos (V = B). Empty grid selects
// the default: admissible sites |x|_2 <= sqrt(n_tilde), radially subsampled
// to at most 10^4 sites.
ProxyMoments proxy_exact_moments(const StripDecomposition& strips, double sigma2,
                                 int K,
                                 std::vector<std::array<int, 2>> grid = {});

struct McMoments {
  double mean = 0, mean_se = 0;
  double var = 0, var_se = 0;
  long reps = 0;
};
// X under the size-biased law tilted along a walk from x (jackknife errors)
McMoments proxy_tilted_variance_mc(const DisorderModel& m, double beta,
                                   const StripDecomposition& strips, int K,
                                   std::array<int, 2> x, long reps,
                                   uint64_t seed, const DpOpts& opts = {});

struct ProxyReport {
  StripDecomposition strips;
  double sigma2 = 0, beta = 0;
  int K = 0;
  ProxyMoments exact;
  McMoments plain_mc;          // X under P (mean should vanish)
  McMoments tilted_mc;         // X under P~ at the argmin site
  double p_event = 0;          // empirical P(X >= t*) under P
  double p_event_se = 0;
  double p_comp_tilted = 0;    // empirical P~(X < t*) at argmin
  double p_comp_tilted_se = 0;
  double cheby_plain = 0;      // 4 Var / E~_inf^2
  double cheby_tilted = 0;     // 4 Var~ / E~_inf^2
  bool plain_within_bound = false;
  bool tilted_within_bound = false;
};
ProxyReport event_report(const DisorderModel& m, double beta,
                         const StripDecomposition& strips, int K, long reps,
                         uint64_t seed, const DpOpts& opts = {});

}  // namespace polymer2d
