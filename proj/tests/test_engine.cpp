#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "polymer2d/disorder.hpp"
#include "polymer2d/engine.hpp"
#include "polymer2d/field.hpp"
#include "polymer2d/kernels.hpp"

using namespace polymer2d;
using Rat = boost::multiprecision::cpp_rational;

namespace {

const int kStep[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

std::vector<std::array<int, 3>> cone_cells(int n_max) {
  std::vector<std::array<int, 3>> cells;
  for (int n = 1; n <= n_max; ++n)
    for (int x1 = -n; x1 <= n; ++x1)
      for (int x2 = -(n - std::abs(x1)); x2 <= n - std::abs(x1); ++x2)
        if (((x1 + x2 + n) & 1) == 0) cells.push_back({n, x1, x2});
  return cells;
}

}  // namespace

TEST_CASE("field sampling is deterministic and matches the lazy view") {
  DisorderModel m{Family::gaussian};
  const DiamondField a = DiamondField::sample(m, 12, 0, 424242, 7);
  const DiamondField b = DiamondField::sample(m, 12, 0, 424242, 7);
  const DiamondField c = DiamondField::sample(m, 12, 0, 424242, 8);
  LazyField lazy{&m, CellRng{424242, 7}, 0.0, nullptr};
  bool identical = true, distinct = false, lazy_ok = true;
  for (const auto& cell : cone_cells(12)) {
    const double va = a.omega(cell[0], cell[1], cell[2]);
    identical = identical && va == b.omega(cell[0], cell[1], cell[2]);
    distinct = distinct || va != c.omega(cell[0], cell[1], cell[2]);
    lazy_ok = lazy_ok && va == lazy.omega(cell[0], cell[1], cell[2]);
  }
  CHECK(identical);
  CHECK(distinct);
  CHECK(lazy_ok);
  CHECK_THROWS((void)a.omega(3, 3, 1));  // outside the cone
  CHECK_THROWS((void)DiamondField::sample(m, 512, 0, 1, 0, 1024));  // cap
}

TEST_CASE("field cells have mean zero and unit variance") {
  for (Family fam : {Family::gaussian, Family::rademacher, Family::uniform}) {
    DisorderModel m{fam};
    const int n_max = 150;  // ~1.1e6 cone cells
    const DiamondField f = DiamondField::sample(m, n_max, 0, 99, uint64_t(fam));
    double s1 = 0, s2 = 0;
    std::size_t cnt = 0;
    for (int n = 1; n <= n_max; ++n)
      for (int x1 = -n; x1 <= n; ++x1)
        for (int x2 = -(n - std::abs(x1)); x2 <= n - std::abs(x1); ++x2)
          if (((x1 + x2 + n) & 1) == 0) {
            const double w = f.omega(n, x1, x2);
            s1 += w;
            s2 += w * w;
            ++cnt;
          }
    CHECK(cnt > 1000000);
    CHECK(std::abs(s1 / double(cnt)) <= 4e-3);
    CHECK(s2 / double(cnt) == doctest::Approx(1.0).epsilon(1e-2));
  }
}

TEST_CASE("free case conserves mass exactly") {
  DisorderModel m{Family::gaussian};
  const FieldCtx ctx = FieldCtx::lazy(m, 0.0, 5, 0);
  CHECK(std::abs(partition_field(ctx, MassFunction::delta(0, 0), 64).log_z) <=
        1e-12);
  MassFunction f;
  f.sites = {{0, 0}, {2, 0}, {1, 1}};
  f.w = {1.0, 0.75, 0.75};
  CHECK(partition_field(ctx, f, 48).log_z ==
        doctest::Approx(std::log(2.5)).epsilon(1e-12));
  const Slice v = backward_slices(ctx, 0, 6, 4, nullptr);
  for (int x1 = -4; x1 <= 4; ++x1)
    for (int x2 = -4; x2 <= 4; ++x2)  // grid is a square in rotated coords
      if (((x1 + x2) & 1) == 0 && std::abs(x1 + x2) <= 4 &&
          std::abs(x1 - x2) <= 4)
        CHECK(v.value_at(x1, x2) * std::exp(v.log_scale) ==
              doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("single step partition matches the closed form") {
  DisorderModel m{Family::gaussian};
  const double beta = 0.8, lam = m.cumulant(beta);
  DiamondField f = DiamondField::sample(m, 1, 0, 31337, 0);
  const FieldCtx ctx = FieldCtx::from_field(f, m, beta);
  double direct = 0;
  for (const auto& d : kStep)
    direct += 0.25 * std::exp(beta * f.omega(1, d[0], d[1]) - lam);
  const PartitionResult pr = partition_field(ctx, MassFunction::delta(0, 0), 1);
  CHECK(pr.z() == doctest::Approx(direct).epsilon(1e-15));
}

TEST_CASE("partition mean is one at theta zero") {
  DisorderModel m{Family::rademacher};
  const CriticalPoint cp = solve_beta(m, 64, 0.0);
  const int reps = 10000;
  double s1 = 0, s2 = 0;
  for (int r = 0; r < reps; ++r) {
    const FieldCtx ctx = FieldCtx::lazy(m, cp.beta, 9000, uint64_t(r));
    const double z = partition_field(ctx, MassFunction::delta(0, 0), 64).z();
    s1 += z;
    s2 += z * z;
  }
  const double mean = s1 / reps;
  const double se = std::sqrt((s2 / reps - mean * mean) / reps);
  CHECK(std::abs(mean - 1.0) <= 3.0 * se);
}

TEST_CASE("backward table is consistent with the forward route") {
  DisorderModel m{Family::uniform};
  const double beta = 0.7;
  const FieldCtx ctx = FieldCtx::lazy(m, beta, 606, 3);
  MassFunction f = MassFunction::uniform_ball(3.0);
  const Slice v0 = backward_slices(ctx, 0, 24, 4, nullptr);
  double mix = 0;
  for (std::size_t i = 0; i < f.sites.size(); ++i)
    mix += f.w[i] * v0.value_at(f.sites[i][0], f.sites[i][1]);
  const double log_mix = std::log(mix) + v0.log_scale;
  CHECK(log_mix ==
        doctest::Approx(partition_field(ctx, f, 24).log_z).epsilon(1e-12));
}

TEST_CASE("two step table matches brute-force path enumeration") {
  DisorderModel m{Family::gaussian};
  const double beta = 0.9, lam = m.cumulant(beta);
  // base radius 4 so the backward window expansion stays inside the cone
  DiamondField f = DiamondField::sample(m, 2, 4, 271828, 1);
  const FieldCtx ctx = FieldCtx::from_field(f, m, beta);
  double brute = 0;
  for (const auto& d1 : kStep)
    for (const auto& d2 : kStep)
      brute += (1.0 / 16.0) *
               std::exp(beta * f.omega(1, d1[0], d1[1]) - lam) *
               std::exp(beta * f.omega(2, d1[0] + d2[0], d1[1] + d2[1]) - lam);
  CHECK(partition_field(ctx, MassFunction::delta(0, 0), 2).z() ==
        doctest::Approx(brute).epsilon(1e-15));
  const Slice v0 = backward_slices(ctx, 0, 2, 2, nullptr);
  CHECK(v0.value_at(0, 0) * std::exp(v0.log_scale) ==
        doctest::Approx(brute).epsilon(1e-15));
}

TEST_CASE("partition is linear in the initial mass") {
  DisorderModel m{Family::gaussian};
  const FieldCtx ctx = FieldCtx::lazy(m, 0.75, 1234, 0);
  MassFunction f = MassFunction::delta(0, 0);
  MassFunction g = MassFunction::delta(1, 1);
  MassFunction mix;
  mix.sites = {{0, 0}, {1, 1}};
  mix.w = {0.3, 1.7};
  const double zf = partition_field(ctx, f, 16).z();
  const double zg = partition_field(ctx, g, 16).z();
  const double zmix = partition_field(ctx, mix, 16).z();
  CHECK(zmix == doctest::Approx(0.3 * zf + 1.7 * zg).epsilon(1e-12));
  MassFunction bad;
  bad.sites = {{0, 0}, {1, 0}};
  bad.w = {1.0, 1.0};
  CHECK_THROWS((void)partition_field(ctx, bad, 4));  // mixed parity
}

TEST_CASE("constrained partitions: full target, factorization, edge cases") {
  DisorderModel m{Family::gaussian};
  const double beta = 0.6;
  const FieldCtx ctx = FieldCtx::lazy(m, beta, 777, 2);
  const MassFunction d0 = MassFunction::delta(0, 0);
  const Ball all{0, 0, 1e9};

  CHECK(partition_constrained(ctx, d0, 0, 8, all).log_z ==
        doctest::Approx(partition_field(ctx, d0, 8).log_z).epsilon(1e-12));

  // Markov factorization over the 9 reachable midpoints at time 2
  double total = 0;
  for (int y1 = -2; y1 <= 2; ++y1)
    for (int y2 = -(2 - std::abs(y1)); y2 <= 2 - std::abs(y1); ++y2) {
      if (((y1 + y2) & 1) != 0) continue;
      const Ball spot{y1, y2, 0.5};
      const double za = partition_constrained(ctx, d0, 0, 2, spot).z();
      const double zb =
          partition_constrained(ctx, MassFunction::delta(y1, y2), 2, 4, all).z();
      total += za * zb;
    }
  CHECK(total ==
        doctest::Approx(partition_constrained(ctx, d0, 0, 4, all).z())
            .epsilon(1e-12));

  MassFunction mu;
  mu.sites = {{1, 0}, {0, 1}, {1, 2}};
  mu.w = {0.5, 0.25, 2.0};
  CHECK(partition_constrained(ctx, mu, 3, 3, Ball{0, 1, 1.2}).z() ==
        doctest::Approx(0.25).epsilon(1e-14));
  CHECK(partition_constrained(ctx, mu, 3, 3, Ball{0, 1, 1.5}).z() ==
        doctest::Approx(0.5 + 0.25 + 2.0).epsilon(1e-14));
  CHECK(partition_constrained(ctx, d0, 0, 4, Ball{50, 51, 0.3}).z() == 0.0);
}

TEST_CASE("renormalization is transparent") {
  DisorderModel m{Family::gaussian};
  const FieldCtx ctx = FieldCtx::lazy(m, 0.8, 4242, 0);
  const MassFunction d0 = MassFunction::delta(0, 0);
  DpOpts plain{}, forced{};
  forced.force_renorm = true;
  const PartitionResult a = partition_field(ctx, d0, 128, plain);
  const PartitionResult b = partition_field(ctx, d0, 128, forced);
  CHECK(b.renorms >= 128);
  CHECK(a.log_z == doctest::Approx(b.log_z).epsilon(1e-10));
}

TEST_CASE("spatial window bias is below the guaranteed bound") {
  DisorderModel m{Family::rademacher};
  const CriticalPoint cp = solve_beta(m, 256, 1.0);
  const MassFunction d0 = MassFunction::delta(0, 0);
  for (uint64_t rep : {0, 1, 2}) {
    const FieldCtx ctx = FieldCtx::lazy(m, cp.beta, 888, rep);
    DpOpts windowed{};
    windowed.window_c = 3.0;
    const double full = partition_field(ctx, d0, 256).log_z;
    const double clipped = partition_field(ctx, d0, 256, windowed).log_z;
    CHECK(std::abs(full - clipped) <= 1e-6);
  }
}

TEST_CASE("collision moments: exact values and the renewal route") {
  for (int n : {64, 512}) {
    const CollisionMoments cm = collision_moments(n, 0.0);
    CHECK(cm.m0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cm.m1 == doctest::Approx(overlap_sum(n)).epsilon(1e-12));
  }
  const double l2 = 0.3;
  const CollisionMoments one = collision_moments(1, l2);
  CHECK(one.m0 ==
        doctest::Approx(1.0 + 0.25 * (std::exp(l2) - 1.0)).epsilon(1e-14));
  CHECK(one.m1 == doctest::Approx(0.25 * std::exp(l2)).epsilon(1e-14));
  for (double lam : {0.1, 0.25}) {
    const CollisionMoments dp = collision_moments(64, lam);
    const CollisionMoments sr = collision_moments_series(64, lam);
    CHECK(dp.m0 == doctest::Approx(sr.m0).epsilon(1e-8));
    CHECK(dp.m1 == doctest::Approx(sr.m1).epsilon(1e-8));
  }
}

TEST_CASE("collision growth stays bounded at the critical calibration") {
  DisorderModel m{Family::gaussian};
  const double frozen[] = {3.301424, 3.522287, 3.752893};
  const int sizes[] = {256, 512, 1024};
  double lo = 1e300, hi = 0;
  for (int i = 0; i < 3; ++i) {
    const int n = sizes[i];
    const CriticalPoint cp = solve_beta(m, n, 0.0);  // theta=0: sigma2 R_n = 1
    const double l2 = std::log1p(cp.sigma2);
    const CollisionMoments cm = collision_moments(n, l2);
    const double scaled = cp.beta * cp.beta * (1.0 + 1.0 / cp.sigma2) * cm.m1 /
                          std::pow(std::log(double(n)), 2);
    CHECK(scaled == doctest::Approx(frozen[i]).epsilon(1e-5));
    lo = std::min(lo, scaled);
    hi = std::max(hi, scaled);
    CHECK(scaled <= 5.0);  // fitted constant
  }
  CHECK(hi / lo <= 1.5);
}

TEST_CASE("gradient norm: limits, finite differences, pair route") {
  DisorderModel m{Family::gaussian};
  const MassFunction d0 = MassFunction::delta(0, 0);
  DiamondField f = DiamondField::sample(m, 8, 0, 5150, 0);
  CHECK(grad_log_norm_sq(f, m, 0.0, d0) == 0.0);

  const double beta = 0.6;
  const auto marg = polymer_marginals(f, m, beta, d0);
  const std::array<int, 3> picks[] = {{1, 1, 0},  {2, 0, 0},  {3, 2, 1},
                                      {4, 0, 2},  {5, -1, 0}, {6, 3, -1},
                                      {7, 0, -3}, {8, 4, 2},  {2, 1, 1},
                                      {6, -2, 0}};
  const double h = 1e-6;
  double fd_sq = 0, formula_sq = 0;
  for (const auto& c : picks) {
    const double base = f.omega(c[0], c[1], c[2]);
    f.set(c[0], c[1], c[2], base + h);
    const double up =
        partition_field(FieldCtx::from_field(f, m, beta), d0, 8).log_z;
    f.set(c[0], c[1], c[2], base - h);
    const double dn =
        partition_field(FieldCtx::from_field(f, m, beta), d0, 8).log_z;
    f.set(c[0], c[1], c[2], base);
    const double fd = (up - dn) / (2 * h);
    fd_sq += fd * fd;
    const double mu = marg[size_t(c[0])].value_at(c[1], c[2]);
    formula_sq += beta * beta * mu * mu;
  }
  CHECK(fd_sq == doctest::Approx(formula_sq).epsilon(1e-4));

  const double full = grad_log_norm_sq(f, m, beta, d0);
  CHECK(full == doctest::Approx(pair_collision_functional(f, m, beta, d0))
                    .epsilon(1e-8));
  CHECK(full > formula_sq - 1e-12);  // partial sum of squares

  for (int r = 0; r < 100; ++r) {
    const DiamondField g = DiamondField::sample(m, 8, 0, 6000, uint64_t(r));
    CHECK(grad_log_norm_sq(g, m, 0.45, d0) > 0.0);
  }
}

TEST_CASE("occupation marginals are probability slices") {
  DisorderModel m{Family::uniform};
  DiamondField f = DiamondField::sample(m, 10, 0, 11, 4);
  const auto marg = polymer_marginals(f, m, 0.8, MassFunction::delta(0, 0));
  REQUIRE(marg.size() == 11);
  for (const auto& sl : marg)
    CHECK(sl.sum_raw() * std::exp(sl.log_scale) ==
          doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("size-biased sampling is deterministic and unbiased") {
  const MassFunction d0 = MassFunction::delta(0, 0);
  const Path p1 = sizebias_path(d0, 16, 909, 5);
  const Path p2 = sizebias_path(d0, 16, 909, 5);
  REQUIRE(p1.pos.size() == 17);
  CHECK(p1.pos == p2.pos);
  CHECK(p1.pos[0] == std::array<int, 2>{0, 0});
  for (int n = 1; n <= 16; ++n) {
    const int dx = std::abs(p1.pos[n][0] - p1.pos[n - 1][0]) +
                   std::abs(p1.pos[n][1] - p1.pos[n - 1][1]);
    CHECK(dx == 1);
  }

  DisorderModel m{Family::gaussian};
  const double beta = 0.5;
  const int n_obs = 8, x_obs = 0, y_obs = 2, reps = 20000;

  // tilted route: average the observed cell under the size-biased field
  double t1 = 0, t2 = 0;
  for (int r = 0; r < reps; ++r) {
    const Path p = sizebias_path(d0, 16, 321, uint64_t(r));
    const FieldCtx ctx = FieldCtx::tilted(m, beta, 321, uint64_t(r), p);
    LazyField lf{&m, ctx.rng, beta, &p};
    const double g = lf.omega(n_obs, x_obs, y_obs);
    t1 += g;
    t2 += g * g;
  }
  const double tilted_mean = t1 / reps;
  const double tilted_se =
      std::sqrt((t2 / reps - tilted_mean * tilted_mean) / reps);

  // plain route: E[g Z]
  double q1 = 0, q2 = 0;
  for (int r = 0; r < reps; ++r) {
    const FieldCtx ctx = FieldCtx::lazy(m, beta, 654, uint64_t(r));
    LazyField lf{&m, ctx.rng, beta, nullptr};
    const double v = lf.omega(n_obs, x_obs, y_obs) *
                     partition_field(ctx, d0, 16).z();
    q1 += v;
    q2 += v * v;
  }
  const double plain_mean = q1 / reps;
  const double plain_se = std::sqrt((q2 / reps - plain_mean * plain_mean) / reps);
  const double gap = std::abs(tilted_mean - plain_mean);
  CHECK(gap <= 3.0 * std::sqrt(tilted_se * tilted_se + plain_se * plain_se));

  // at beta=0 the tilt is the identity coupling, cell by cell
  const Path p0 = sizebias_path(d0, 12, 2222, 9);
  LazyField tilted0{&m, CellRng{2222, 9}, 0.0, &p0};
  LazyField plain0{&m, CellRng{2222, 9}, 0.0, nullptr};
  for (const auto& cell : cone_cells(12))
    CHECK(tilted0.omega(cell[0], cell[1], cell[2]) ==
          plain0.omega(cell[0], cell[1], cell[2]));
}

TEST_CASE("two-step partitions over all sign fields, in exact arithmetic") {
  // beta = log(3)/2 turns the two weight values into 3/2 and 1/2
  DisorderModel m{Family::rademacher};
  const double beta = 0.5 * std::log(3.0);
  const auto cells = cone_cells(2);
  REQUIRE(cells.size() == 13);

  Rat sum_z = 0, sum_z2 = 0;
  double max_rel = 0;
  DiamondField f = DiamondField::zeros(2, 0);
  for (uint32_t cfg = 0; cfg < (1u << 13); ++cfg) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      f.set(cells[i][0], cells[i][1], cells[i][2],
            (cfg >> i) & 1u ? 1.0 : -1.0);
    Rat z = 0;
    for (const auto& d1 : kStep)
      for (const auto& d2 : kStep) {
        const Rat w1 = f.omega(1, d1[0], d1[1]) > 0 ? Rat(3, 2) : Rat(1, 2);
        const Rat w2 =
            f.omega(2, d1[0] + d2[0], d1[1] + d2[1]) > 0 ? Rat(3, 2) : Rat(1, 2);
        z += w1 * w2;
      }
    z /= 16;
    sum_z += z;
    sum_z2 += z * z;
    const double z_dp =
        partition_field(FieldCtx::from_field(f, m, beta), MassFunction::delta(0, 0), 2)
            .z();
    max_rel = std::max(max_rel,
                       std::abs(z_dp - double(z)) / double(z));
  }
  CHECK(max_rel <= 1e-14);
  CHECK(sum_z == Rat(1u << 13));              // E[Z] = 1 exactly
  CHECK(sum_z2 == Rat(141, 128) * (1u << 13));  // E[Z^2] = B(2) exactly
}
