#include "polymer2d/engine.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "polymer2d/kernels.hpp"
#include "polymer2d/numerics.hpp"

namespace polymer2d {

namespace {
constexpr double kLn2 = 0.69314718055994530942;
constexpr double kTwoPi = 6.2831853071795864769;

using EArr = Eigen::Map<Eigen::ArrayXd>;
using CArr = Eigen::Map<const Eigen::ArrayXd>;

// parity-aligned truncation pad: min(elapsed, ceil(c sqrt(elapsed log H)))
int window_pad(int elapsed, const DpOpts& o, int horizon) {
  if (o.window_c <= 0 || elapsed <= 0) return elapsed;
  const double lh = std::log(static_cast<double>(std::max(horizon, 3)));
  int w = static_cast<int>(
      std::ceil(o.window_c * std::sqrt(static_cast<double>(elapsed) * lh)));
  if (w >= elapsed) return elapsed;
  if ((w ^ elapsed) & 1) ++w;
  return std::min(w, elapsed);
}

void check_mem(std::size_t nu, std::size_t nv, const DpOpts& o) {
  if (nu * nv * sizeof(double) > o.mem_cap_bytes)
    throw std::length_error("transfer window exceeds memory cap");
}

void maybe_renorm(Slice& s, bool force) {
  double mx = 0;
  for (double x : s.a) mx = std::max(mx, x);
  if (!(mx > 0)) return;
  int e = 0;
  std::frexp(mx, &e);
  if (!force && e <= 332 && e >= -332) return;
  const double scale = std::ldexp(1.0, -e);
  for (double& x : s.a) x *= scale;
  s.log_scale += static_cast<double>(e) * kLn2;
  ++s.renorms;
}

// per-slice weight row generator; everything slice-constant is hoisted
class WeightGen {
 public:
  explicit WeightGen(const FieldCtx& ctx) : ctx_(ctx) {
    if (!ctx.stored) {
      const DisorderModel& m = *ctx.model;
      if (m.family == Family::rademacher) {
        wp_ = std::exp(ctx.beta - ctx.lambda);
        wm_ = std::exp(-ctx.beta - ctx.lambda);
      } else if (m.family == Family::uniform) {
        c1_ = 2.0 * 1.7320508075688772935 * ctx.beta;
        c0_ = -1.7320508075688772935 * ctx.beta - ctx.lambda;
      }
    }
  }

  void begin_slice(int n) {
    n_ = n;
    if (!ctx_.stored) {
      k0_ = ctx_.rng.slice_key(n, kSaltOmega0);
      k1_ = ctx_.rng.slice_key(n, kSaltOmega1);
    }
    tilt_here_ = ctx_.tilt && n >= 1 && n <= ctx_.tilt->len();
    if (tilt_here_) {
      const auto& p = ctx_.tilt->pos[static_cast<std::size_t>(n)];
      tu_ = p[0] + p[1];
      tv_ = p[0] - p[1];
    }
  }

  // dst[j] = e^{beta omega(n_, x) - lambda} for v = v0 + 2 j, fixed u
  void fill(int u, int v0, int cnt, double* dst) {
    if (ctx_.stored) {
      for (int j = 0; j < cnt; ++j) {
        const int v = v0 + 2 * j;
        dst[j] = ctx_.model->weight(ctx_.beta,
                                    ctx_.stored->omega(n_, (u + v) / 2, (u - v) / 2));
      }
      return;
    }
    int x1 = (u + v0) / 2, x2 = (u - v0) / 2;
    switch (ctx_.model->family) {
      case Family::rademacher:
        for (int j = 0; j < cnt; ++j, ++x1, --x2) {
          const uint64_t h = mix64(k0_ ^ pack_xy(x1, x2));
          dst[j] = (h >> 63) ? wm_ : wp_;
        }
        break;
      case Family::uniform: {
        for (int j = 0; j < cnt; ++j, ++x1, --x2)
          dst[j] = u01(mix64(k0_ ^ pack_xy(x1, x2)));
        EArr d(dst, cnt);
        d = (c1_ * d + c0_).exp();
        break;
      }
      case Family::gaussian: {
        s1_.resize(static_cast<std::size_t>(cnt));
        s2_.resize(static_cast<std::size_t>(cnt));
        for (int j = 0; j < cnt; ++j, ++x1, --x2) {
          const uint64_t key = pack_xy(x1, x2);
          s1_[static_cast<std::size_t>(j)] = u01(mix64(k0_ ^ key));
          s2_[static_cast<std::size_t>(j)] = u01(mix64(k1_ ^ key));
        }
        EArr d(dst, cnt);
        CArr a(s1_.data(), cnt), b(s2_.data(), cnt);
        d = (ctx_.beta * (-2.0 * a.log()).sqrt() * (kTwoPi * b).cos() - ctx_.lambda)
                .exp();
        break;
      }
    }
    if (tilt_here_ && tu_ == u && tv_ >= v0 && tv_ < v0 + 2 * cnt &&
        ((tv_ - v0) & 1) == 0) {
      const int j = (tv_ - v0) / 2;
      const int y1 = (u + tv_) / 2, y2 = (u - tv_) / 2;
      const uint64_t key = pack_xy(y1, y2);
      dst[j] = ctx_.model->weight(
          ctx_.beta,
          ctx_.model->tilted_sample(ctx_.beta, mix64(k0_ ^ key), mix64(k1_ ^ key)));
    }
  }

 private:
  const FieldCtx& ctx_;
  int n_ = 0;
  uint64_t k0_ = 0, k1_ = 0;
  double wp_ = 0, wm_ = 0, c1_ = 0, c0_ = 0;
  bool tilt_here_ = false;
  int tu_ = 0, tv_ = 0;
  std::vector<double> s1_, s2_;
};

struct Bounds {
  int u_lo, u_hi, v_lo, v_hi;
  int nu() const { return (u_hi - u_lo) / 2 + 1; }
  int nv() const { return (v_hi - v_lo) / 2 + 1; }
};

// window at `elapsed` steps from support bounds
Bounds step_bounds(int fu_min, int fu_max, int fv_min, int fv_max, int elapsed,
                   const DpOpts& o, int horizon) {
  const int pad = window_pad(elapsed, o, horizon);
  return {fu_min - pad, fu_max + pad, fv_min - pad, fv_max + pad};
}

// adjacent-pair combine: out[i] = in[k] + in[k + 1], k = i + off, with
// out-of-range entries read as zero
void pair_combine(const double* in, int n_in, double* out, int n_out, int off) {
  int i0 = std::max(0, -off);
  int i1 = std::min(n_out, n_in - 1 - off);
  for (int i = 0; i < std::min(i0, n_out); ++i) {
    const int k = i + off;
    double s = 0;
    if (k >= 0 && k < n_in) s += in[k];
    if (k + 1 >= 0 && k + 1 < n_in) s += in[k + 1];
    out[i] = s;
  }
  if (i1 > i0) {
    const double* p = in + i0 + off;
    for (int i = i0; i < i1; ++i, ++p) out[i] = p[0] + p[1];
  }
  for (int i = std::max(i1, std::min(i0, n_out)); i < n_out; ++i) {
    const int k = i + off;
    double s = 0;
    if (k >= 0 && k < n_in) s += in[k];
    if (k + 1 >= 0 && k + 1 < n_in) s += in[k + 1];
    out[i] = s;
  }
}

// one transfer step cur(time n-1) -> next(time n) with window `b`;
// weights applied after the walk step when wg != nullptr
void step_forward(const Slice& cur, Slice& next, const Bounds& b, WeightGen* wg,
                  std::vector<double>& tmp, std::vector<double>& wrow,
                  const DpOpts& o) {
  const int nu = b.nu(), nv = b.nv();
  check_mem(static_cast<std::size_t>(nu), static_cast<std::size_t>(nv), o);
  next.n = cur.n + 1;
  next.u_lo = b.u_lo;
  next.v_lo = b.v_lo;
  next.nu = nu;
  next.nv = nv;
  next.a.resize(static_cast<std::size_t>(nu) * nv);
  next.log_scale = cur.log_scale;
  next.renorms = cur.renorms;

  // row pass: tmp[iu][.] = cur row(u-1) + cur row(u+1) on the old v-grid
  tmp.resize(static_cast<std::size_t>(nu) * cur.nv);
  for (int iu = 0; iu < nu; ++iu) {
    const int u = b.u_lo + 2 * iu;
    const int jm = (u - 1 - cur.u_lo) / 2;
    double* trow = tmp.data() + static_cast<std::size_t>(iu) * cur.nv;
    const bool lo_ok = jm >= 0 && jm < cur.nu;
    const bool hi_ok = jm + 1 >= 0 && jm + 1 < cur.nu;
    const double* rlo = cur.a.data() + static_cast<std::size_t>(std::max(jm, 0)) * cur.nv;
    const double* rhi = cur.a.data() + static_cast<std::size_t>(std::max(jm + 1, 0)) * cur.nv;
    if (lo_ok && hi_ok) {
      for (int k = 0; k < cur.nv; ++k) trow[k] = rlo[k] + rhi[k];
    } else if (lo_ok) {
      std::memcpy(trow, rlo, static_cast<std::size_t>(cur.nv) * sizeof(double));
    } else if (hi_ok) {
      std::memcpy(trow, rhi, static_cast<std::size_t>(cur.nv) * sizeof(double));
    } else {
      std::memset(trow, 0, static_cast<std::size_t>(cur.nv) * sizeof(double));
    }
  }
  // column pass + weights
  wrow.resize(static_cast<std::size_t>(nv));
  const int off = (b.v_lo - 1 - cur.v_lo) / 2;
  for (int iu = 0; iu < nu; ++iu) {
    const double* trow = tmp.data() + static_cast<std::size_t>(iu) * cur.nv;
    double* nrow = next.a.data() + static_cast<std::size_t>(iu) * nv;
    pair_combine(trow, cur.nv, nrow, nv, off);
    if (wg) {
      wg->fill(b.u_lo + 2 * iu, b.v_lo, nv, wrow.data());
      EArr(nrow, nv) *= 0.25 * CArr(wrow.data(), nv);
    } else {
      EArr(nrow, nv) *= 0.25;
    }
  }
}

Slice slice_from_mass(const MassFunction& f, int s) {
  int fu_min, fu_max, fv_min, fv_max;
  f.bounds(fu_min, fu_max, fv_min, fv_max);
  Slice cur;
  cur.n = s;
  cur.u_lo = fu_min;
  cur.v_lo = fv_min;
  cur.nu = (fu_max - fu_min) / 2 + 1;
  cur.nv = (fv_max - fv_min) / 2 + 1;
  cur.a.assign(static_cast<std::size_t>(cur.nu) * cur.nv, 0.0);
  for (std::size_t i = 0; i < f.sites.size(); ++i) {
    const int u = f.sites[i][0] + f.sites[i][1], v = f.sites[i][0] - f.sites[i][1];
    cur.at((u - fu_min) / 2, (v - fv_min) / 2) += f.w[i];
  }
  return cur;
}
}  // namespace

FieldCtx FieldCtx::lazy(const DisorderModel& m, double beta, uint64_t seed,
                        uint64_t replica) {
  FieldCtx c;
  c.model = &m;
  c.beta = beta;
  c.lambda = m.cumulant(beta);
  c.rng = CellRng{seed, replica};
  return c;
}

FieldCtx FieldCtx::tilted(const DisorderModel& m, double beta, uint64_t seed,
                          uint64_t replica, const Path& path) {
  FieldCtx c = lazy(m, beta, seed, replica);
  c.tilt = &path;
  return c;
}

FieldCtx FieldCtx::from_field(const DiamondField& f, const DisorderModel& m,
                              double beta) {
  FieldCtx c;
  c.model = &m;
  c.beta = beta;
  c.lambda = m.cumulant(beta);
  c.stored = &f;
  return c;
}

double Slice::value_at(int x1, int x2) const {
  const int u = x1 + x2, v = x1 - x2;
  if (u < u_lo || v < v_lo || ((u - u_lo) & 1) || ((v - v_lo) & 1)) return 0.0;
  const int iu = (u - u_lo) / 2, iv = (v - v_lo) / 2;
  if (iu >= nu || iv >= nv) return 0.0;
  return at(iu, iv) * std::exp(log_scale);
}

double Slice::sum_raw() const {
  double s = 0;
  for (double x : a) s += x;
  return s;
}

double Slice::log_sum() const { return std::log(sum_raw()) + log_scale; }

double PartitionResult::z() const { return std::exp(log_z); }

Slice forward_slices(const FieldCtx& ctx, const MassFunction& f, int s, int t,
                     const DpOpts& opts) {
  f.validate();
  if (t < s) throw std::invalid_argument("forward_slices: t must be >= s");
  if ((f.parity() ^ (s & 1)) != 0)
    throw std::invalid_argument("forward_slices: support parity must match start time");
  int fu_min, fu_max, fv_min, fv_max;
  f.bounds(fu_min, fu_max, fv_min, fv_max);
  const int horizon = opts.horizon > 0 ? opts.horizon : t;

  Slice cur = slice_from_mass(f, s);
  Slice next;
  std::vector<double> tmp, wrow;
  WeightGen wg(ctx);
  for (int n = s + 1; n <= t; ++n) {
    wg.begin_slice(n);
    const Bounds b =
        step_bounds(fu_min, fu_max, fv_min, fv_max, n - s, opts, horizon);
    step_forward(cur, next, b, &wg, tmp, wrow, opts);
    std::swap(cur, next);
    maybe_renorm(cur, opts.force_renorm);
  }
  return cur;
}

PartitionResult partition_field(const FieldCtx& ctx, const MassFunction& f,
                                int t, const DpOpts& opts) {
  const Slice end = forward_slices(ctx, f, 0, t, opts);
  return {end.log_sum(), end.renorms};
}

Slice backward_slices(const FieldCtx& ctx, int s, int t, int r_grid,
                      const Slice* terminal, const DpOpts& opts) {
  if (t < s) throw std::invalid_argument("backward_slices: t must be >= s");
  if (r_grid < 0) throw std::invalid_argument("backward_slices: r_grid must be >= 0");
  const int horizon = opts.horizon > 0 ? opts.horizon : t;
  const int g = r_grid - (((r_grid ^ s) & 1) ? 1 : 0);  // parity-fit grid bound

  auto bounds_at = [&](int m) -> Bounds {
    const int pad = window_pad(m - s, opts, horizon);
    return {-g - pad, g + pad, -g - pad, g + pad};
  };

  // V at time t on its window
  const Bounds bt = bounds_at(t);
  Slice cur;
  cur.n = t;
  cur.u_lo = bt.u_lo;
  cur.v_lo = bt.v_lo;
  cur.nu = bt.nu();
  cur.nv = bt.nv();
  check_mem(static_cast<std::size_t>(cur.nu), static_cast<std::size_t>(cur.nv), opts);
  cur.a.assign(static_cast<std::size_t>(cur.nu) * cur.nv, 0.0);
  if (terminal) {
    for (int iu = 0; iu < cur.nu; ++iu)
      for (int iv = 0; iv < cur.nv; ++iv) {
        const int u = cur.u_lo + 2 * iu, v = cur.v_lo + 2 * iv;
        cur.at(iu, iv) = terminal->value_at((u + v) / 2, (u - v) / 2);
      }
  } else {
    cur.a.assign(static_cast<std::size_t>(cur.nu) * cur.nv, 1.0);
  }

  Slice next;
  std::vector<double> tmp, wrow;
  WeightGen wg(ctx);
  for (int m = t - 1; m >= s; --m) {
    // multiply V(m+1) by its weights, then average over the four neighbours
    wg.begin_slice(m + 1);
    wrow.resize(static_cast<std::size_t>(cur.nv));
    for (int iu = 0; iu < cur.nu; ++iu) {
      wg.fill(cur.u_lo + 2 * iu, cur.v_lo, cur.nv, wrow.data());
      EArr(cur.a.data() + static_cast<std::size_t>(iu) * cur.nv, cur.nv) *=
          CArr(wrow.data(), cur.nv);
    }
    const Bounds b = bounds_at(m);
    Slice prev;
    step_forward(cur, prev, b, nullptr, tmp, wrow, opts);
    prev.n = m;
    std::swap(cur, prev);
    maybe_renorm(cur, opts.force_renorm);
  }
  return cur;
}

PartitionResult partition_constrained(const FieldCtx& ctx, const MassFunction& mu,
                                      int s, int t, const Ball& B,
                                      const DpOpts& opts) {
  const Slice end = forward_slices(ctx, mu, s, t, opts);
  double acc = 0;
  for (int iu = 0; iu < end.nu; ++iu)
    for (int iv = 0; iv < end.nv; ++iv) {
      const int u = end.u_lo + 2 * iu, v = end.v_lo + 2 * iv;
      if (B.contains((u + v) / 2, (u - v) / 2)) acc += end.at(iu, iv);
    }
  return {std::log(acc) + end.log_scale, end.renorms};
}

namespace {
// lazy (1/4,1/2,1/4) stencil along both axes of a centered square slice;
// radius r means indices 0..r for coordinates -r..r step 2
void lazy_step(const std::vector<double>& in, int r_in, std::vector<double>& out,
               int r_out, std::vector<double>& tmp) {
  const int n_in = r_in + 1, n_out = r_out + 1;
  const int d = (r_in - r_out) / 2;  // old center offset per new index
  tmp.assign(static_cast<std::size_t>(n_out) * n_in, 0.0);
  // rows (u axis)
  for (int i = 0; i < n_out; ++i) {
    const int c = i + d;
    double* trow = tmp.data() + static_cast<std::size_t>(i) * n_in;
    for (int dc = -1; dc <= 1; ++dc) {
      const int j = c + dc;
      if (j < 0 || j >= n_in) continue;
      const double wgt = dc == 0 ? 0.5 : 0.25;
      const double* r = in.data() + static_cast<std::size_t>(j) * n_in;
      for (int k = 0; k < n_in; ++k) trow[k] += wgt * r[k];
    }
  }
  // columns (v axis)
  out.assign(static_cast<std::size_t>(n_out) * n_out, 0.0);
  for (int i = 0; i < n_out; ++i) {
    const double* trow = tmp.data() + static_cast<std::size_t>(i) * n_in;
    double* orow = out.data() + static_cast<std::size_t>(i) * n_out;
    for (int k = 0; k < n_out; ++k) {
      const int c = k + d;
      double s = 0;
      if (c - 1 >= 0 && c - 1 < n_in) s += 0.25 * trow[c - 1];
      if (c >= 0 && c < n_in) s += 0.5 * trow[c];
      if (c + 1 >= 0 && c + 1 < n_in) s += 0.25 * trow[c + 1];
      orow[k] = s;
    }
  }
}
}  // namespace

CollisionMoments collision_moments(int N, double lambda2) {
  if (N < 0) throw std::invalid_argument("collision_moments: N must be >= 0");
  // sub-Gaussian cap keeping clipped mass below ~1e-14
  int cap = static_cast<int>(std::ceil(std::sqrt(
      8.0 * std::max(N, 1) * (33.3 + std::log(static_cast<double>(N) + 1.0)))));
  cap += cap & 1;
  const double e2 = std::exp(lambda2);

  std::vector<double> W{1.0}, A{0.0}, Wn, An, tmp;
  int r = 0;
  for (int n = 1; n <= N; ++n) {
    const int rn = std::min(2 * n, cap);
    lazy_step(W, r, Wn, rn, tmp);
    lazy_step(A, r, An, rn, tmp);
    const std::size_t o = static_cast<std::size_t>(rn / 2) * (rn + 1) + rn / 2;
    An[o] = (An[o] + Wn[o]) * e2;
    Wn[o] *= e2;
    W.swap(Wn);
    A.swap(An);
    r = rn;
  }
  CollisionMoments cm;
  for (double x : W) cm.m0 += x;
  for (double x : A) cm.m1 += x;
  return cm;
}

CollisionMoments collision_moments_series(int N, double lambda2) {
  if (N < 0) throw std::invalid_argument("collision_moments_series: N must be >= 0");
  const double s = std::expm1(lambda2);
  CollisionMoments cm;
  cm.m0 = 1.0;
  cm.m1 = 0.0;
  if (N == 0 || s == 0.0) {
    if (s == 0.0) {  // E[L] = sum u(n)
      cm.m1 = N > 0 ? overlap_sum(N) : 0.0;
    }
    return cm;
  }
  // b_k(N) by repeated renewal convolution; terms s^k b_k die off once
  // k >> pi log N, stop when negligible
  std::vector<double> u(static_cast<std::size_t>(N) + 1, 0.0);
  for (int n = 1; n <= N; ++n) u[static_cast<std::size_t>(n)] = return_mass(n);
  std::vector<double> fk(u.begin(), u.end());  // k = 1 row: tau_k = n
  double sk = s;
  double t0 = 0, t1 = 0;
  for (int k = 1; k <= N; ++k) {
    double bk = 0;
    for (int n = k; n <= N; ++n) bk += fk[static_cast<std::size_t>(n)];
    const double term = sk * bk;
    t0 += term;
    t1 += static_cast<double>(k) * term;
    if (term < 1e-17 * (1.0 + std::fabs(t0)) && k > 4) break;
    if (k < N) {
      // fk <- fk * u (one more renewal epoch)
      std::vector<double> nx(static_cast<std::size_t>(N) + 1, 0.0);
      for (int n = k; n <= N; ++n) {
        const double f = fk[static_cast<std::size_t>(n)];
        if (f == 0.0) continue;
        for (int j = 1; n + j <= N; ++j)
          nx[static_cast<std::size_t>(n + j)] += f * u[static_cast<std::size_t>(j)];
      }
      fk.swap(nx);
    }
    sk *= s;
  }
  cm.m0 = 1.0 + t0;
  cm.m1 = (1.0 + 1.0 / s) * t1;
  return cm;
}

std::vector<Slice> polymer_marginals(const DiamondField& field,
                                     const DisorderModel& m, double beta,
                                     const MassFunction& f) {
  const int N = field.horizon();
  int fu_min, fu_max, fv_min, fv_max;
  f.bounds(fu_min, fu_max, fv_min, fv_max);
  if (std::max({std::abs(fu_min), std::abs(fu_max), std::abs(fv_min),
                std::abs(fv_max)}) > field.base_radius())
    throw std::invalid_argument("polymer_marginals: support outside field cone");
  const FieldCtx ctx = FieldCtx::from_field(field, m, beta);
  DpOpts opts;  // exact cone

  // forward slices at every time
  std::vector<Slice> F(static_cast<std::size_t>(N) + 1);
  F[0] = slice_from_mass(f, 0);
  {
    std::vector<double> tmp, wrow;
    WeightGen wg(ctx);
    for (int n = 1; n <= N; ++n) {
      wg.begin_slice(n);
      const Bounds b = step_bounds(fu_min, fu_max, fv_min, fv_max, n, opts, N);
      step_forward(F[static_cast<std::size_t>(n) - 1], F[static_cast<std::size_t>(n)],
                   b, &wg, tmp, wrow, opts);
    }
  }
  // backward on the same windows
  std::vector<Slice> V(static_cast<std::size_t>(N) + 1);
  V[static_cast<std::size_t>(N)] = F[static_cast<std::size_t>(N)];
  for (double& x : V[static_cast<std::size_t>(N)].a) x = 1.0;
  V[static_cast<std::size_t>(N)].log_scale = 0;
  V[static_cast<std::size_t>(N)].renorms = 0;
  {
    std::vector<double> tmp, wrow;
    WeightGen wg(ctx);
    for (int n = N - 1; n >= 0; --n) {
      Slice work = V[static_cast<std::size_t>(n) + 1];  // keep V(n+1) intact
      wg.begin_slice(n + 1);
      wrow.resize(static_cast<std::size_t>(work.nv));
      for (int iu = 0; iu < work.nu; ++iu) {
        wg.fill(work.u_lo + 2 * iu, work.v_lo, work.nv, wrow.data());
        EArr(work.a.data() + static_cast<std::size_t>(iu) * work.nv, work.nv) *=
            CArr(wrow.data(), work.nv);
      }
      const Slice& Fn = F[static_cast<std::size_t>(n)];
      const Bounds b{Fn.u_lo, Fn.u_lo + 2 * (Fn.nu - 1), Fn.v_lo,
                     Fn.v_lo + 2 * (Fn.nv - 1)};
      step_forward(work, V[static_cast<std::size_t>(n)], b, nullptr, tmp, wrow, opts);
      V[static_cast<std::size_t>(n)].n = n;
    }
  }
  const double log_z = F[static_cast<std::size_t>(N)].log_sum();
  std::vector<Slice> mu(static_cast<std::size_t>(N) + 1);
  for (int n = 0; n <= N; ++n) {
    const Slice& Fn = F[static_cast<std::size_t>(n)];
    const Slice& Vn = V[static_cast<std::size_t>(n)];
    Slice s = Fn;
    const double sc = std::exp(Fn.log_scale + Vn.log_scale - log_z);
    for (int iu = 0; iu < s.nu; ++iu)
      for (int iv = 0; iv < s.nv; ++iv) s.at(iu, iv) = Fn.at(iu, iv) * Vn.at(iu, iv) * sc;
    s.log_scale = 0;
    mu[static_cast<std::size_t>(n)] = std::move(s);
  }
  return mu;
}

double grad_log_norm_sq(const DiamondField& field, const DisorderModel& m,
                        double beta, const MassFunction& f) {
  const std::vector<Slice> mu = polymer_marginals(field, m, beta, f);
  double acc = 0;
  for (std::size_t n = 1; n < mu.size(); ++n)
    for (double x : mu[n].a) acc += x * x;
  return beta * beta * acc;
}

double pair_collision_functional(const DiamondField& field,
                                 const DisorderModel& m, double beta,
                                 const MassFunction& f) {
  const int N = field.horizon();
  int fu_min, fu_max, fv_min, fv_max;
  f.bounds(fu_min, fu_max, fv_min, fv_max);
  const FieldCtx ctx = FieldCtx::from_field(field, m, beta);
  DpOpts opts;

  // single-replica forward slices, rescaled to absolute values
  std::vector<Slice> F(static_cast<std::size_t>(N) + 1);
  F[0] = slice_from_mass(f, 0);
  {
    std::vector<double> tmp, wrow;
    WeightGen wg(ctx);
    for (int n = 1; n <= N; ++n) {
      wg.begin_slice(n);
      const Bounds b = step_bounds(fu_min, fu_max, fv_min, fv_max, n, opts, N);
      step_forward(F[static_cast<std::size_t>(n) - 1], F[static_cast<std::size_t>(n)],
                   b, &wg, tmp, wrow, opts);
    }
    for (auto& s : F)
      if (s.log_scale != 0) {
        const double c = std::exp(s.log_scale);
        for (double& x : s.a) x *= c;
        s.log_scale = 0;
      }
  }

  // pair tensor A[(iu,iv),(ju,jv)] on the time-n window, collision-weighted
  const auto dim = [&](int n) {
    return static_cast<std::size_t>(F[static_cast<std::size_t>(n)].nu) *
           F[static_cast<std::size_t>(n)].nv;
  };
  std::vector<double> A(dim(0) * dim(0), 0.0), An, rowtmp, wslab;
  std::vector<double> tmp2;
  WeightGen wg(ctx);
  for (int n = 1; n <= N; ++n) {
    const Slice& lo = F[static_cast<std::size_t>(n) - 1];
    const Slice& hi = F[static_cast<std::size_t>(n)];
    const std::size_t dlo = dim(n - 1), dhi = dim(n);
    // weights for slice n over the hi window
    wg.begin_slice(n);
    wslab.assign(dhi, 0.0);
    for (int iu = 0; iu < hi.nu; ++iu)
      wg.fill(hi.u_lo + 2 * iu, hi.v_lo, hi.nv,
              wslab.data() + static_cast<std::size_t>(iu) * hi.nv);

    // first index pair: stencil each block row
    An.assign(dhi * dlo, 0.0);
    {
      Slice src = lo, dst;
      const Bounds b{hi.u_lo, hi.u_lo + 2 * (hi.nu - 1), hi.v_lo,
                     hi.v_lo + 2 * (hi.nv - 1)};
      for (std::size_t col = 0; col < dlo; ++col) {
        for (std::size_t i = 0; i < dlo; ++i) src.a[i] = A[i * dlo + col];
        step_forward(src, dst, b, nullptr, tmp2, rowtmp, opts);
        for (std::size_t i = 0; i < dhi; ++i) An[i * dlo + col] = dst.a[i];
      }
    }
    // second index pair
    std::vector<double> A2(dhi * dhi, 0.0);
    {
      Slice src = lo, dst;
      const Bounds b{hi.u_lo, hi.u_lo + 2 * (hi.nu - 1), hi.v_lo,
                     hi.v_lo + 2 * (hi.nv - 1)};
      for (std::size_t row = 0; row < dhi; ++row) {
        std::memcpy(src.a.data(), An.data() + row * dlo, dlo * sizeof(double));
        step_forward(src, dst, b, nullptr, tmp2, rowtmp, opts);
        std::memcpy(A2.data() + row * dhi, dst.a.data(), dhi * sizeof(double));
      }
    }
    // weights and the diagonal collision source
    for (std::size_t i = 0; i < dhi; ++i)
      for (std::size_t j = 0; j < dhi; ++j) A2[i * dhi + j] *= wslab[i] * wslab[j];
    for (std::size_t i = 0; i < dhi; ++i)
      A2[i * dhi + i] += hi.a[i] * hi.a[i];
    A.swap(A2);
  }
  double num = 0;
  for (double x : A) num += x;
  const double z = F[static_cast<std::size_t>(N)].sum_raw();
  return beta * beta * num / (z * z);
}

Path sizebias_path(const MassFunction& f, int N, uint64_t seed, uint64_t replica) {
  f.validate();
  SeqRng r(seed, replica, kSaltPath);
  const double tot = f.total();
  double pick = r.uniform() * tot, acc = 0;
  std::size_t i0 = 0;
  for (std::size_t i = 0; i < f.sites.size(); ++i) {
    acc += f.w[i];
    if (pick <= acc) {
      i0 = i;
      break;
    }
    i0 = i;
  }
  Path p;
  p.pos.resize(static_cast<std::size_t>(N) + 1);
  int u = f.sites[i0][0] + f.sites[i0][1], v = f.sites[i0][0] - f.sites[i0][1];
  p.pos[0] = {(u + v) / 2, (u - v) / 2};
  for (int n = 1; n <= N; ++n) {
    const uint64_t b = r.next();
    u += (b & 1) ? 1 : -1;
    v += (b & 2) ? 1 : -1;
    p.pos[static_cast<std::size_t>(n)] = {(u + v) / 2, (u - v) / 2};
  }
  return p;
}

}  // namespace polymer2d
