#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "polymer2d/disorder.hpp"
#include "polymer2d/engine.hpp"
#include "polymer2d/field.hpp"
#include "polymer2d/kernels.hpp"
#include "polymer2d/moments.hpp"
#include "polymer2d/proxy.hpp"

using namespace polymer2d;

namespace {

// chain sum over subsets of size <= 2 inside one strip, straight from the
// definition: q(A) prod (w-1) with q the step kernel from the origin
double strip_chain_sum(const DiamondField& f, const DisorderModel& m,
                       double beta, int s, int t) {
  const double lambda = m.cumulant(beta);
  auto xi = [&](int n, int x1, int x2) {
    return std::exp(beta * f.omega(n, x1, x2) - lambda) - 1.0;
  };
  double acc = 0;
  for (int n1 = s + 1; n1 <= t; ++n1)
    for (int a1 = -n1; a1 <= n1; ++a1)
      for (int b1 = -n1; b1 <= n1; ++b1) {
        if (std::abs(a1) + std::abs(b1) > n1) continue;
        const double q1 = srw_q(n1, a1, b1);
        if (q1 == 0) continue;
        const double x1 = q1 * xi(n1, a1, b1);
        acc += x1;
        for (int n2 = n1 + 1; n2 <= t; ++n2)
          for (int a2 = -n2; a2 <= n2; ++a2)
            for (int b2 = -n2; b2 <= n2; ++b2) {
              if (std::abs(a2) + std::abs(b2) > n2) continue;
              const double q2 = srw_q(n2 - n1, a2 - a1, b2 - b1);
              if (q2 == 0) continue;
              acc += x1 * q2 * xi(n2, a2, b2);
            }
      }
  return acc;
}

}  // namespace

TEST_CASE("strip decomposition layout and guards") {
  const StripDecomposition a = make_strips(1024, std::log(2.0));
  CHECK(a.M == 1);
  CHECK(a.n_tilde == 512);
  CHECK(a.n_effective == 1024);

  const StripDecomposition b = make_strips(1000, 1.0);
  CHECK(b.M == 2);
  CHECK(b.n_tilde == 250);
  CHECK(b.n_effective == 1000);

  CHECK_THROWS_AS((void)make_strips(16, 3.0), std::invalid_argument);
  CHECK_THROWS_AS((void)make_strips(1024, 0.5), std::invalid_argument);

  // strips tile (0, N_eff] in order; the even ones are the payload
  for (const auto& [n, eta] : std::vector<std::pair<int, double>>{
           {1024, std::log(2.0)}, {1000, 1.0}, {4096, 2.2}, {512, 1.0}}) {
    const StripDecomposition d = make_strips(n, eta);
    CHECK(2 * d.M * d.n_tilde == d.n_effective);
    CHECK(d.n_effective <= n);
    CHECK(d.n_tilde >= 4);
    for (int j = 1; j <= 2 * d.M; ++j) {
      CHECK(d.strip_lo(j) == (j - 1) * d.n_tilde);
      CHECK(d.strip_hi(j) == j * d.n_tilde);
    }
  }
}

TEST_CASE("proxy vanishes without disorder coupling") {
  const StripDecomposition strips = make_strips(128, 1.0);
  const DisorderModel m{Family::gaussian};
  const ProxyEvaluator ev(strips);
  for (uint64_t rep = 0; rep < 3; ++rep) {
    const FieldCtx ctx = FieldCtx::lazy(m, 0.0, 7331, rep);
    CHECK(std::abs(ev.value(ctx)) <= 1e-12);
    CHECK(proxy_value(ctx, strips, 0) == ev.value(ctx));
  }
}

TEST_CASE("chaos-truncated proxy against direct chain enumeration") {
  // hand-assembled layout: two even strips of width 2 inside horizon 8,
  // narrow enough that chains of size <= 2 exhaust the expansion
  StripDecomposition strips;
  strips.N = 8;
  strips.eta = std::log(4.0);
  strips.M = 2;
  strips.n_tilde = 2;
  strips.n_effective = 8;

  const DisorderModel m{Family::rademacher};
  const double beta = 0.5 * std::log(3.0);  // weights 3/2 and 1/2

  for (uint64_t rep = 0; rep < 8; ++rep) {
    const DiamondField f = DiamondField::sample(m, 8, 4, 321, rep);
    const FieldCtx ctx = FieldCtx::from_field(f, m, beta);
    const double oracle = strip_chain_sum(f, m, beta, 2, 4) +
                          strip_chain_sum(f, m, beta, 6, 8);
    const double truncated = proxy_value(ctx, strips, 2);
    const double full = proxy_value(ctx, strips, 0);
    CHECK(std::abs(truncated - oracle) <= 1e-12 * (1.0 + std::abs(oracle)));
    // width-2 strips carry no chains longer than 2, so truncation is exact
    CHECK(std::abs(full - oracle) <= 1e-11 * (1.0 + std::abs(oracle)));
  }

  CHECK_THROWS_AS((void)proxy_value(FieldCtx::lazy(m, beta, 1, 0),
                                    make_strips(64, 1.0), 2),
                  std::invalid_argument);
}

TEST_CASE("truncation gap matches the computed chaos tail") {
  StripDecomposition strips;
  strips.N = 8;
  strips.eta = std::log(4.0);
  strips.M = 2;
  strips.n_tilde = 2;
  strips.n_effective = 8;

  const DisorderModel m{Family::rademacher};
  const double beta = 0.5 * std::log(3.0);
  const double sigma2 = m.pair_variance(beta);

  // E[(X - X_K)^2] is the tail of the orthogonal strip sum; build it from
  // the same truncated series the exact-moment path uses
  const std::vector<double> B = truncated_variance(2, sigma2, 0);
  const std::vector<double> V1 = truncated_variance(2, sigma2, 1);
  double expected = 0;
  for (int l = 1; l <= strips.M; ++l) {
    const int s = strips.strip_lo(2 * l);
    for (int i = 1; i <= 2; ++i)
      expected += sigma2 * return_mass(s + i) *
                  (B[static_cast<std::size_t>(2 - i)] -
                   V1[static_cast<std::size_t>(2 - i)]);
  }
  CHECK(expected > 0);

  const long reps = 4000;
  double sum = 0, sumsq = 0;
  for (long rep = 0; rep < reps; ++rep) {
    const DiamondField f =
        DiamondField::sample(m, 8, 4, 888, static_cast<uint64_t>(rep));
    const FieldCtx ctx = FieldCtx::from_field(f, m, beta);
    const double d = proxy_value(ctx, strips, 0) - proxy_value(ctx, strips, 1);
    sum += d * d;
    sumsq += d * d * d * d;
  }
  const double mean = sum / double(reps);
  const double se =
      std::sqrt(std::max(0.0, sumsq / double(reps) - mean * mean) /
                double(reps));
  CHECK(std::abs(mean - expected) <= 3.0 * se + 1e-12);
}

TEST_CASE("centred proxy and strip orthogonality under the plain law") {
  const StripDecomposition strips = make_strips(64, 1.0);
  const DisorderModel m{Family::rademacher};
  const CriticalPoint cp = solve_beta(m, 64, 1.0);
  DpOpts opts;
  opts.window_c = 2.5;
  const ProxyEvaluator ev(strips, opts);
  const ProxyMoments ex =
      proxy_exact_moments(strips, cp.sigma2, 0, {{0, 0}});

  const long reps = 10000;
  double s1 = 0, s2 = 0, sx = 0, c12 = 0, c12sq = 0;
  for (long rep = 0; rep < reps; ++rep) {
    const FieldCtx ctx =
        FieldCtx::lazy(m, cp.beta, 4242, static_cast<uint64_t>(rep));
    const std::vector<double> sv = ev.strip_values(ctx);
    REQUIRE(sv.size() == 2);
    s1 += sv[0];
    s2 += sv[1];
    sx += sv[0] + sv[1];
    c12 += sv[0] * sv[1];
    c12sq += sv[0] * sv[1] * sv[0] * sv[1];
  }
  const double se1 = std::sqrt(ex.var_strip[0] / double(reps));
  const double se2 = std::sqrt(ex.var_strip[1] / double(reps));
  const double sex = std::sqrt(ex.var_x / double(reps));
  CHECK(std::abs(s1 / double(reps)) <= 3.0 * se1);
  CHECK(std::abs(s2 / double(reps)) <= 3.0 * se2);
  CHECK(std::abs(sx / double(reps)) <= 3.0 * sex);

  const double cov = c12 / double(reps);
  const double secov = std::sqrt(
      std::max(0.0, c12sq / double(reps) - cov * cov) / double(reps));
  CHECK(std::abs(cov) <= 3.0 * secov + 1e-12);
}

TEST_CASE("exact moments: degenerate and layout properties") {
  const StripDecomposition strips = make_strips(64, 1.0);

  const ProxyMoments zero = proxy_exact_moments(strips, 0.0, 0);
  CHECK(zero.var_x == 0.0);
  for (double v : zero.tilted_mean) CHECK(v == 0.0);
  CHECK(zero.threshold == 0.0);

  const ProxyMoments ex = proxy_exact_moments(strips, 0.9, 0);
  // default grid: admissible-parity sites of the closed disc of radius
  // sqrt(n_tilde), here 25 of them
  CHECK(ex.grid.size() == 25);
  bool has_origin = false, has_argmin = false;
  double lo = 1e300;
  for (std::size_t i = 0; i < ex.grid.size(); ++i) {
    const auto& g = ex.grid[i];
    CHECK((g[0] + g[1]) % 2 == 0);
    CHECK(g[0] * g[0] + g[1] * g[1] <= 16);
    if (g[0] == 0 && g[1] == 0) {
      has_origin = true;
      // at the origin the tilted mean collapses onto the variance sum
      CHECK(ex.tilted_mean[i] == doctest::Approx(ex.var_x).epsilon(1e-12));
    }
    if (g == ex.argmin) {
      has_argmin = true;
      CHECK(ex.tilted_mean[i] == ex.tilted_mean_inf);
    }
    lo = std::min(lo, ex.tilted_mean[i]);
  }
  CHECK(has_origin);
  CHECK(has_argmin);
  CHECK(ex.tilted_mean_inf == lo);
  CHECK(ex.threshold == doctest::Approx(0.5 * ex.tilted_mean_inf));
  CHECK(ex.cheby_plain ==
        doctest::Approx(4.0 * ex.var_x /
                        (ex.tilted_mean_inf * ex.tilted_mean_inf)));

  double vsum = 0;
  for (double v : ex.var_strip) {
    CHECK(v > 0);
    vsum += v;
  }
  CHECK(ex.var_x == doctest::Approx(vsum).epsilon(1e-13));

  // caller-supplied grid is passed through untouched
  const ProxyMoments custom =
      proxy_exact_moments(strips, 0.9, 0, {{0, 0}, {2, 0}});
  CHECK(custom.grid.size() == 2);
  CHECK(custom.tilted_mean.size() == 2);
}

TEST_CASE("tilted means fall off across strips") {
  const StripDecomposition strips = make_strips(4096, 2.2);
  REQUIRE(strips.M == 5);
  const CriticalPoint cp =
      solve_beta(DisorderModel{Family::uniform}, 4096, 4.5);
  const ProxyMoments ex =
      proxy_exact_moments(strips, cp.sigma2, 0, {{0, 0}});
  // per-strip tilted means at the origin coincide with the variance split,
  // and decay roughly like 1/l across strips
  const double ratio = ex.var_strip[1] / ex.var_strip[3];
  CHECK(ratio > 1.5);
  CHECK(ratio < 2.5);
  CHECK(ratio == doctest::Approx(2.260548).epsilon(1e-4));
  CHECK(ex.tilted_mean[0] == doctest::Approx(ex.var_x).epsilon(1e-12));
}

TEST_CASE("formula variance agrees with plain Monte Carlo") {
  const StripDecomposition strips = make_strips(512, 1.0);
  const DisorderModel m{Family::uniform};
  const CriticalPoint cp = solve_beta(m, 512, 3.0);
  DpOpts opts;
  opts.window_c = 2.0;
  const ProxyEvaluator ev(strips, opts);
  const ProxyMoments ex = proxy_exact_moments(strips, cp.sigma2, 0, {{0, 0}});
  CHECK(ex.var_x == doctest::Approx(6.433415).epsilon(1e-5));

  const long reps = 4000;
  std::vector<double> xs;
  xs.reserve(reps);
  for (long rep = 0; rep < reps; ++rep) {
    const FieldCtx ctx =
        FieldCtx::lazy(m, cp.beta, /*PENDING_SEED*/ 1, static_cast<uint64_t>(rep));
    xs.push_back(ev.value(ctx));
  }
  double s = 0, ss = 0;
  for (double v : xs) {
    s += v;
    ss += v * v;
  }
  const double mean = s / double(reps);
  const double var = ss / double(reps) - mean * mean;

  // delete-one-block jackknife, matching the reported-moments convention
  const long B = 64, bs = reps / B;
  double jsum = 0, jsq = 0;
  for (long b = 0; b < B; ++b) {
    double sb = s, ssb = ss;
    for (long i = b * bs; i < (b + 1) * bs; ++i) {
      sb -= xs[static_cast<std::size_t>(i)];
      ssb -= xs[static_cast<std::size_t>(i)] * xs[static_cast<std::size_t>(i)];
    }
    const double nb = double(reps - bs);
    const double vb = ssb / nb - (sb / nb) * (sb / nb);
    jsum += vb;
    jsq += vb * vb;
  }
  const double jm = jsum / double(B);
  const double se = std::sqrt(
      std::max(0.0, (double(B) - 1.0) / double(B) * (jsq - double(B) * jm * jm)));

  CHECK(std::abs(mean) <= 3.0 * std::sqrt(ex.var_x / double(reps)));
  CHECK(std::abs(var - ex.var_x) <= 3.0 * se);
}

TEST_CASE("size-biased sampler reproduces the exact tilted mean") {
  const StripDecomposition strips = make_strips(64, 1.0);
  const DisorderModel m{Family::uniform};
  const CriticalPoint cp = solve_beta(m, 64, 0.5);
  DpOpts opts;
  opts.window_c = 2.5;

  const ProxyMoments ex = proxy_exact_moments(strips, cp.sigma2, 0, {{0, 0}});
  const McMoments mc = proxy_tilted_variance_mc(m, cp.beta, strips, 0, {0, 0},
                                                2000, 31337, opts);
  CHECK(mc.reps == 2000);
  CHECK(std::abs(mc.mean - ex.tilted_mean[0]) <= 3.0 * mc.mean_se);
  CHECK(mc.var >= 0);
  CHECK(mc.var_se >= 0);

  // no coupling, no proxy: every replica evaluates to zero exactly when the
  // start-kernel window is not clipped
  const McMoments nul =
      proxy_tilted_variance_mc(m, 0.0, strips, 0, {0, 0}, 64, 5, DpOpts{});
  CHECK(std::abs(nul.mean) <= 1e-12);
  CHECK(std::abs(nul.var) <= 1e-12);
}

TEST_CASE("size-biased variance scale across horizons") {
  // qualitative: the rescaled tilted variance stays below a fitted constant
  // at both horizons; replicas pinned, tails are heavy at this coupling
  const DisorderModel m{Family::uniform};
  DpOpts opts;
  opts.window_c = 2.0;
  const double g = 4.0 - 4.0 / 3.0;

  double scaled10 = 0, scaled12 = 0;
  {
    const StripDecomposition strips = make_strips(1024, 4.0 / 3.0);
    const CriticalPoint cp = solve_beta(m, 1024, 4.0);
    const McMoments mc = proxy_tilted_variance_mc(m, cp.beta, strips, 0,
                                                  {0, 0}, 100, 4321, opts);
    scaled10 = mc.var * g * g * std::exp(-2.0 * g) / std::log(double(strips.M));
  }
  {
    const StripDecomposition strips = make_strips(4096, 4.0 / 3.0);
    const CriticalPoint cp = solve_beta(m, 4096, 4.0);
    const McMoments mc = proxy_tilted_variance_mc(m, cp.beta, strips, 0,
                                                  {0, 0}, 32, 4321, opts);
    scaled12 = mc.var * g * g * std::exp(-2.0 * g) / std::log(double(strips.M));
  }
  CHECK(scaled10 > 0);
  CHECK(scaled12 > 0);
  CHECK(scaled10 <= /*PENDING_C10*/ 1e12);
  CHECK(scaled12 <= /*PENDING_C12*/ 1e12);
}

TEST_CASE("event report: bounds containment and degenerate rejection") {
  const StripDecomposition strips = make_strips(128, 1.0);
  const DisorderModel m{Family::uniform};
  const CriticalPoint cp = solve_beta(m, 128, 3.0);
  DpOpts opts;
  opts.window_c = 2.5;

  const ProxyReport rep = event_report(m, cp.beta, strips, 0, 1200, 515, opts);
  CHECK(rep.sigma2 == doctest::Approx(cp.sigma2));
  CHECK(rep.K == 0);
  CHECK(rep.p_event >= 0);
  CHECK(rep.p_event <= 1);
  CHECK(rep.p_comp_tilted >= 0);
  CHECK(rep.p_comp_tilted <= 1);
  CHECK(rep.cheby_plain == doctest::Approx(rep.exact.cheby_plain));
  CHECK(rep.plain_within_bound);
  CHECK(rep.tilted_within_bound);
  CHECK(rep.plain_mc.reps == 1200);
  CHECK(rep.tilted_mc.reps == 1200);

  CHECK_THROWS_WITH_AS((void)event_report(m, 0.0, strips, 0, 8, 1, opts),
                       "event_report: tilted mean not positive",
                       std::runtime_error);
}

TEST_CASE("event probabilities across the coupling ladder") {
  // PENDING: direction to be pinned from measurement
  CHECK(true);
}
