#pragma once
// Transfer-operator evaluation of partition functions on the diamond lattice.
// Everything runs in rotated coordinates (u, v) = (x1 + x2, x1 - x2), where a
// simple random walk splits into two independent +-1 walks, so a step is two
// adjacent-pair passes over a dense window. Weights stream slice by slice
// from the counter-based generator (or from a materialized field), polymer
// weights renormalize by exact powers of two, and optional sub-Gaussian
// windows truncate the cone for long runs.
#include <cstdint>
#include <vector>

#include "polymer2d/disorder.hpp"
#include "polymer2d/field.hpp"

namespace polymer2d {

struct DpOpts {
  // 0 = exact cone; otherwise each axis is clipped at support +-
  // ceil(window_c * sqrt(elapsed * log(horizon)))
  double window_c = 0.0;
  int horizon = 0;            // defaults to the run length
  bool force_renorm = false;  // rescale every slice (transparency checks)
  std::size_t mem_cap_bytes = std::size_t{1} << 31;
};

// weight source for one replica
struct FieldCtx {
  const DisorderModel* model = nullptr;
  double beta = 0;
  double lambda = 0;  // cumulant(beta)
  CellRng rng{0, 0};
  const DiamondField* stored = nullptr;
  const Path* tilt = nullptr;

  static FieldCtx lazy(const DisorderModel& m, double beta, uint64_t seed,
                       uint64_t replica);
  static FieldCtx tilted(const DisorderModel& m, double beta, uint64_t seed,
                         uint64_t replica, const Path& path);
  static FieldCtx from_field(const DiamondField& f, const DisorderModel& m,
                             double beta);
};

// one time slice over a rotated window; u = u_lo + 2 iu, v = v_lo + 2 iv
struct Slice {
  int n = 0;
  int u_lo = 0, v_lo = 0;
  int nu = 0, nv = 0;
  std::vector<double> a;  // row-major nu x nv
  double log_scale = 0;   // accumulated renormalization, exact powers of two
  int renorms = 0;

  double& at(int iu, int iv) { return a[static_cast<std::size_t>(iu) * nv + iv]; }
  double at(int iu, int iv) const { return a[static_cast<std::size_t>(iu) * nv + iv]; }
  // unscaled value at a lattice site (0 outside the window)
  double value_at(int x1, int x2) const;
  double sum_raw() const;
  double log_sum() const;  // log(sum_raw) + log_scale
};

struct PartitionResult {
  double log_z = 0;
  int renorms = 0;
  double z() const;
};

// forward recursion: mass f placed at time s, weights applied at s+1..t
Slice forward_slices(const FieldCtx& ctx, const MassFunction& f, int s, int t,
                     const DpOpts& opts = {});
// log Z_t(f) from time 0
PartitionResult partition_field(const FieldCtx& ctx, const MassFunction& f,
                                int t, const DpOpts& opts = {});

// backward recursion: V(s, x) = E_x[prod_{n=s+1..t} w(n, S_n) g(S_t)] for all
// x with rotated coordinates within [-r_grid, r_grid]^2; terminal == nullptr
// means g identically 1
Slice backward_slices(const FieldCtx& ctx, int s, int t, int r_grid,
                      const Slice* terminal, const DpOpts& opts = {});

struct Ball {
  int x1 = 0, x2 = 0;
  double radius = 0;
  bool contains(int y1, int y2) const {
    const double d1 = y1 - x1, d2 = y2 - x2;
    return d1 * d1 + d2 * d2 <= radius * radius;
  }
};

// paths from mu at time s constrained to end in B at time t
PartitionResult partition_constrained(const FieldCtx& ctx, const MassFunction& mu,
                                      int s, int t, const Ball& B,
                                      const DpOpts& opts = {});

// collision functionals of two independent walks started together: the
// difference walk is a lazy (1/4,1/2,1/4) walk per rotated axis.
//   m0 = E[exp(l2 L_N)], m1 = E[L_N exp(l2 L_N)], L_N = #{1<=n<=N : S_n = S~_n}
struct CollisionMoments {
  double m0 = 0, m1 = 0;
};
CollisionMoments collision_moments(int N, double lambda2);
// independent route through renewal subset sums: sum_k s^k b_k(N), s = e^{l2}-1
CollisionMoments collision_moments_series(int N, double lambda2);

// occupation marginals mu(n, x) = d log Z / d(beta omega(n, x)) on a stored
// field, n = 0..N (forward x backward); slice n holds mu(n, .)
std::vector<Slice> polymer_marginals(const DiamondField& field,
                                     const DisorderModel& m, double beta,
                                     const MassFunction& f);
// sum of squared omega-gradients of log Z: beta^2 sum_{n>=1,x} mu(n,x)^2
double grad_log_norm_sq(const DiamondField& field, const DisorderModel& m,
                        double beta, const MassFunction& f);
// the same quantity through the replica-pair transfer recursion:
// beta^2 E^{(2)}[sum_{n=1..N} 1{S_n=S~_n} e^{H+H~}] / Z^2
double pair_collision_functional(const DiamondField& field,
                                 const DisorderModel& m, double beta,
                                 const MassFunction& f);

// a size-biased polymer trajectory: S_0 from f normalized, then plain SRW
Path sizebias_path(const MassFunction& f, int N, uint64_t seed, uint64_t replica);

}  // namespace polymer2d
