#include "polymer2d/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "polymer2d/kernels.hpp"
#include "polymer2d/moments.hpp"
#include "polymer2d/numerics.hpp"

namespace polymer2d {

namespace {

// start-kernel window radius at time s, parity-matched to s
int mu_radius(int s, const DpOpts& o, int horizon) {
  if (o.window_c <= 0 || s <= 0) return s;
  const double lh = std::log(static_cast<double>(std::max(horizon, 3)));
  int w = static_cast<int>(
      std::ceil(o.window_c * std::sqrt(static_cast<double>(s) * lh)));
  if (w >= s) return s;
  if ((w ^ s) & 1) ++w;
  return std::min(w, s);
}

double ctx_omega(const FieldCtx& ctx, int n, int x1, int x2) {
  if (ctx.stored) return ctx.stored->omega(n, x1, x2);
  LazyField lf{ctx.model, ctx.rng, ctx.beta, ctx.tilt};
  return lf.omega(n, x1, x2);
}

}  // namespace

StripDecomposition make_strips(int N, double eta) {
  if (N < 1) throw std::invalid_argument("make_strips: N must be positive");
  if (!(eta >= std::log(2.0) - 1e-12))
    throw std::invalid_argument("make_strips: eta must be at least log 2");
  StripDecomposition d;
  d.N = N;
  d.eta = eta;
  const double md = std::ceil(0.5 * std::exp(eta));
  if (!(md * 8.0 <= static_cast<double>(N)))  // n_tilde >= 4 needs N >= 8 M
    throw std::invalid_argument("make_strips: strips too thin");
  d.M = static_cast<int>(md);
  d.n_tilde = N / (2 * d.M);
  if (d.n_tilde < 4) throw std::invalid_argument("make_strips: strips too thin");
  d.n_effective = 2 * d.M * d.n_tilde;
  return d;
}

ProxyEvaluator::ProxyEvaluator(const StripDecomposition& strips,
                               const DpOpts& opts)
    : strips_(strips), opts_(opts) {
  if (opts_.horizon <= 0) opts_.horizon = strips_.n_effective;
  plans_.reserve(static_cast<std::size_t>(strips_.M));
  for (int l = 1; l <= strips_.M; ++l) {
    StripPlan p;
    p.j = 2 * l;
    p.s = strips_.strip_lo(p.j);
    p.t = strips_.strip_hi(p.j);
    p.r_mu = mu_radius(p.s, opts_, opts_.horizon);
    p.pu.resize(static_cast<std::size_t>(p.r_mu) + 1);
    for (int iu = 0; iu <= p.r_mu; ++iu)
      p.pu[static_cast<std::size_t>(iu)] = srw_p1(p.s, -p.r_mu + 2 * iu);
    plans_.push_back(std::move(p));
  }
}

std::vector<double> ProxyEvaluator::strip_values(const FieldCtx& ctx) const {
  std::vector<double> out;
  out.reserve(plans_.size());
  for (const StripPlan& p : plans_) {
    Slice v = backward_slices(ctx, p.s, p.t, p.r_mu, nullptr, opts_);
    // backward grid is parity-fit to s; r_mu already matches, so the windows
    // coincide and pu indexes both axes directly
    double acc = 0;
    for (int iu = 0; iu < v.nu; ++iu) {
      double row = 0;
      for (int iv = 0; iv < v.nv; ++iv)
        row += p.pu[static_cast<std::size_t>(iv)] * v.at(iu, iv);
      acc += p.pu[static_cast<std::size_t>(iu)] * row;
    }
    out.push_back(acc * std::exp(v.log_scale) - 1.0);
  }
  return out;
}

double ProxyEvaluator::value(const FieldCtx& ctx) const {
  double x = 0;
  for (double v : strip_values(ctx)) x += v;
  return x;
}

namespace {

// chaos-truncated strip value: sum over chains of <= K cells in ((s, t]
struct ChainEval {
  const FieldCtx* ctx;
  int t;
  int K;

  double xi(int n, int x1, int x2) const {
    const double w = std::exp(ctx->beta * ctx_omega(*ctx, n, x1, x2) -
                              ctx->lambda);
    return w - 1.0;
  }

  // sum over nonempty chains starting strictly after (last_t, last) with
  // depth cells already chosen
  double extend(int last_t, int lx1, int lx2, int depth) const {
    double acc = 0;
    for (int n = last_t + 1; n <= t; ++n) {
      const int dn = n - last_t;
      for (int u = -n; u <= n; u += 2)
        for (int v = -n; v <= n; v += 2) {
          const int x1 = (u + v) / 2, x2 = (u - v) / 2;
          const double step = (depth == 0)
                                  ? srw_q(n, x1, x2)
                                  : srw_q(dn, x1 - lx1, x2 - lx2);
          if (step == 0) continue;
          const double val = step * xi(n, x1, x2);
          acc += val;
          if (depth + 1 < K) acc += val * extend(n, x1, x2, depth + 1);
        }
    }
    return acc;
  }
};

}  // namespace

double proxy_value(const FieldCtx& ctx, const StripDecomposition& strips,
                   int K, const DpOpts& opts) {
  if (K <= 0) return ProxyEvaluator(strips, opts).value(ctx);
  if (strips.n_effective > 12)
    throw std::invalid_argument(
        "proxy_value: chaos truncation requires n_effective <= 12");
  double x = 0;
  for (int l = 1; l <= strips.M; ++l) {
    const int j = 2 * l;
    ChainEval ce{&ctx, strips.strip_hi(j), K};
    x += ce.extend(strips.strip_lo(j), 0, 0, 0);
  }
  return x;
}

ProxyMoments proxy_exact_moments(const StripDecomposition& strips,
                                 double sigma2, int K,
                                 std::vector<std::array<int, 2>> grid) {
  ProxyMoments pm;
  const int nt = strips.n_tilde;
  const std::vector<double> V = truncated_variance(nt, sigma2, K);

  pm.var_strip.resize(static_cast<std::size_t>(strips.M), 0.0);
  for (int l = 1; l <= strips.M; ++l) {
    const int s = strips.strip_lo(2 * l);
    double acc = 0;
    for (int i = 1; i <= nt; ++i)
      acc += return_mass(s + i) * V[static_cast<std::size_t>(nt - i)];
    pm.var_strip[static_cast<std::size_t>(l - 1)] = sigma2 * acc;
    pm.var_x += sigma2 * acc;
  }

  if (grid.empty()) {
    const int r = static_cast<int>(std::sqrt(static_cast<double>(nt)));
    for (int x1 = -r; x1 <= r; ++x1)
      for (int x2 = -r; x2 <= r; ++x2) {
        if (((x1 + x2) & 1) != 0) continue;
        if (x1 * x1 + x2 * x2 > nt) continue;
        grid.push_back({x1, x2});
      }
    std::sort(grid.begin(), grid.end(),
              [](const std::array<int, 2>& a, const std::array<int, 2>& b) {
                const long ra = long(a[0]) * a[0] + long(a[1]) * a[1];
                const long rb = long(b[0]) * b[0] + long(b[1]) * b[1];
                if (ra != rb) return ra < rb;
                return a < b;
              });
    const std::size_t cap = 10000;
    if (grid.size() > cap) {
      std::vector<std::array<int, 2>> sub;
      sub.reserve(cap + 1);
      const std::size_t stride = (grid.size() + cap - 1) / cap;
      for (std::size_t i = 0; i < grid.size(); i += stride) sub.push_back(grid[i]);
      if (sub.back() != grid.back()) sub.push_back(grid.back());
      grid = std::move(sub);
    }
  }
  if (grid.empty()) throw std::invalid_argument("proxy moments: empty grid");

  pm.grid = grid;
  pm.tilted_mean.resize(grid.size(), 0.0);
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const int x1 = grid[gi][0], x2 = grid[gi][1];
    double acc = 0;
    for (int l = 1; l <= strips.M; ++l) {
      const int s = strips.strip_lo(2 * l);
      for (int i = 1; i <= nt; ++i)
        acc += srw_q(2 * (s + i), x1, x2) * V[static_cast<std::size_t>(nt - i)];
    }
    pm.tilted_mean[gi] = sigma2 * acc;
  }
  std::size_t best = 0;
  for (std::size_t gi = 1; gi < grid.size(); ++gi)
    if (pm.tilted_mean[gi] < pm.tilted_mean[best]) best = gi;
  pm.tilted_mean_inf = pm.tilted_mean[best];
  pm.argmin = grid[best];
  pm.threshold = 0.5 * pm.tilted_mean_inf;
  pm.cheby_plain = pm.tilted_mean_inf > 0
                       ? 4.0 * pm.var_x / (pm.tilted_mean_inf * pm.tilted_mean_inf)
                       : 0.0;
  return pm;
}

namespace {

std::vector<double> collect_proxy_values(const DisorderModel& m, double beta,
                                         const StripDecomposition& strips,
                                         int K, const std::array<int, 2>* x,
                                         long reps, uint64_t seed,
                                         const DpOpts& opts) {
  if (reps < 1) throw std::invalid_argument("proxy mc: reps must be >= 1");
  const ProxyEvaluator ev(strips, opts);
  const int n_eff = strips.n_effective;
  auto rows = parallel_replicas(reps, [&](long rep) -> std::vector<double> {
    double val;
    if (x) {
      const Path path = sizebias_path(MassFunction::delta((*x)[0], (*x)[1]),
                                      n_eff, seed, uint64_t(rep));
      const FieldCtx ctx = FieldCtx::tilted(m, beta, seed, uint64_t(rep), path);
      val = (K > 0) ? proxy_value(ctx, strips, K, opts) : ev.value(ctx);
    } else {
      const FieldCtx ctx = FieldCtx::lazy(m, beta, seed, uint64_t(rep));
      val = (K > 0) ? proxy_value(ctx, strips, K, opts) : ev.value(ctx);
    }
    return {val};
  });
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i][0];
  return out;
}

McMoments summarize_mc(const std::vector<double>& xs) {
  McMoments mm;
  mm.reps = static_cast<long>(xs.size());
  std::vector<std::vector<double>> rows(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) rows[i] = {xs[i], xs[i] * xs[i]};
  const std::size_t block =
      xs.size() >= 128 ? 64 : std::max<std::size_t>(1, xs.size() / 8);
  const Jackknife jm = jackknife_blocks(
      rows, block,
      [](const std::vector<double>& s, long c) { return s[0] / double(c); });
  const Jackknife jv = jackknife_blocks(
      rows, block, [](const std::vector<double>& s, long c) {
        const double mu = s[0] / double(c);
        return s[1] / double(c) - mu * mu;
      });
  mm.mean = jm.estimate;
  mm.mean_se = jm.stderr_;
  mm.var = jv.estimate;
  mm.var_se = jv.stderr_;
  return mm;
}

}  // namespace

McMoments proxy_tilted_variance_mc(const DisorderModel& m, double beta,
                                   const StripDecomposition& strips, int K,
                                   std::array<int, 2> x, long reps,
                                   uint64_t seed, const DpOpts& opts) {
  return summarize_mc(
      collect_proxy_values(m, beta, strips, K, &x, reps, seed, opts));
}

ProxyReport event_report(const DisorderModel& m, double beta,
                         const StripDecomposition& strips, int K, long reps,
                         uint64_t seed, const DpOpts& opts) {
  ProxyReport rep;
  rep.strips = strips;
  rep.beta = beta;
  rep.sigma2 = m.pair_variance(beta);
  rep.K = K;
  rep.exact = proxy_exact_moments(strips, rep.sigma2, K);
  if (!(rep.exact.tilted_mean_inf > 0))
    throw std::runtime_error("event_report: tilted mean not positive");
  const double thr = rep.exact.threshold;
  const double inf = rep.exact.tilted_mean_inf;

  const std::vector<double> plain =
      collect_proxy_values(m, beta, strips, K, nullptr, reps, seed, opts);
  rep.plain_mc = summarize_mc(plain);
  long hits = 0;
  for (double v : plain) hits += (v >= thr);
  rep.p_event = double(hits) / double(reps);
  rep.p_event_se = std::max(
      std::sqrt(rep.p_event * (1.0 - rep.p_event) / double(reps)),
      1.0 / double(reps));

  const uint64_t seed_t = mix64(seed ^ 0x74696c7465644dULL);
  const std::vector<double> tilted = collect_proxy_values(
      m, beta, strips, K, &rep.exact.argmin, reps, seed_t, opts);
  rep.tilted_mc = summarize_mc(tilted);
  long miss = 0;
  for (double v : tilted) miss += (v < thr);
  rep.p_comp_tilted = double(miss) / double(reps);
  rep.p_comp_tilted_se = std::max(
      std::sqrt(rep.p_comp_tilted * (1.0 - rep.p_comp_tilted) / double(reps)),
      1.0 / double(reps));

  rep.cheby_plain = rep.exact.cheby_plain;
  rep.cheby_tilted = 4.0 * rep.tilted_mc.var / (inf * inf);
  rep.plain_within_bound = rep.p_event <= rep.cheby_plain + 3.0 * rep.p_event_se;
  rep.tilted_within_bound =
      rep.p_comp_tilted <=
      rep.cheby_tilted +
          3.0 * (rep.p_comp_tilted_se + 4.0 * rep.tilted_mc.var_se / (inf * inf));
  return rep;
}

}  // namespace polymer2d
