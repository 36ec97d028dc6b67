#include "polymer2d/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "polymer2d/moments.hpp"
#include "polymer2d/numerics.hpp"

namespace polymer2d {

namespace {

bool checks_pass(const std::vector<CheckResult>& cs) {
  for (const CheckResult& c : cs)
    if (!c.pass) return false;
  return true;
}

std::size_t block_for(std::size_t reps) {
  return reps >= 128 ? 64 : std::max<std::size_t>(1, reps / 8);
}

// jackknife mean of one row component
Jackknife jk_mean(const std::vector<std::vector<double>>& rows, std::size_t k) {
  return jackknife_blocks(rows, block_for(rows.size()),
                          [k](const std::vector<double>& s, long c) {
                            return s[k] / double(c);
                          });
}

void require_pmf(const MassFunction& f, const char* who) {
  f.validate();
  if (std::abs(f.total() - 1.0) > 1e-9)
    throw std::invalid_argument(std::string(who) +
                                ": f must be a probability mass function");
}

std::vector<double> column(const std::vector<std::vector<double>>& rows,
                           std::size_t k) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i][k];
  return out;
}

// one Monte Carlo batch of per-replica row statistics of Z_N(f)
std::vector<std::vector<double>> z_batch(
    const DisorderModel& m, int N, double beta, const MassFunction& f,
    long reps, uint64_t seed, const DpOpts& opts,
    const std::function<std::vector<double>(double)>& row_of_z) {
  DpOpts o = opts;
  if (o.horizon <= 0) o.horizon = N;
  return parallel_replicas(reps, [&](long rep) {
    const FieldCtx ctx = FieldCtx::lazy(m, beta, seed, uint64_t(rep));
    const double z = std::exp(partition_field(ctx, f, N, o).log_z);
    return row_of_z(z);
  });
}

struct GridSup {
  double est = 0, se = 0;
  std::array<int, 2> arg{0, 0};
  bool uniform_max = false;
  std::vector<double> comp_mean;
  long reps = 0;
};

// per replica one backward pass serves every Dirac start in B(start_radius)
// (even parity) plus the uniform start; returns the max over starts of the
// replica-averaged sqrt(Z), jackknifed as a single functional
GridSup grid_sup_sqrt(const DisorderModel& m, double beta, int horizon,
                      double start_radius, const Slice* terminal, long reps,
                      uint64_t seed, const DpOpts& opts) {
  std::vector<std::array<int, 2>> starts;
  const int r = static_cast<int>(start_radius);
  for (int x1 = -r; x1 <= r; ++x1)
    for (int x2 = -r; x2 <= r; ++x2) {
      if (((x1 + x2) & 1) != 0) continue;
      if (double(x1) * x1 + double(x2) * x2 > start_radius * start_radius)
        continue;
      starts.push_back({x1, x2});
    }
  if (starts.empty()) throw std::invalid_argument("grid sup: empty start grid");
  const MassFunction fu = MassFunction::uniform_ball(start_radius);

  int r_grid = static_cast<int>(
      std::ceil(std::sqrt(2.0) * start_radius));
  if (r_grid & 1) ++r_grid;  // even-parity start grid

  DpOpts o = opts;
  if (o.horizon <= 0) o.horizon = horizon;
  const std::size_t ng = starts.size();
  auto rows = parallel_replicas(reps, [&](long rep) {
    const FieldCtx ctx = FieldCtx::lazy(m, beta, seed, uint64_t(rep));
    const Slice v = backward_slices(ctx, 0, horizon, r_grid, terminal, o);
    std::vector<double> row(ng + 1);
    for (std::size_t i = 0; i < ng; ++i)
      row[i] = std::sqrt(std::max(0.0, v.value_at(starts[i][0], starts[i][1])));
    double zu = 0;
    for (std::size_t i = 0; i < fu.size(); ++i)
      zu += fu.w[i] * v.value_at(fu.sites[i][0], fu.sites[i][1]);
    row[ng] = std::sqrt(std::max(0.0, zu));
    return row;
  });

  GridSup g;
  g.reps = reps;
  const Jackknife jk = jackknife_blocks(
      rows, block_for(rows.size()), [](const std::vector<double>& s, long c) {
        double best = 0;
        for (double v : s) best = std::max(best, v / double(c));
        return best;
      });
  g.est = jk.estimate;
  g.se = jk.stderr_;
  g.comp_mean.assign(ng + 1, 0.0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i <= ng; ++i) g.comp_mean[i] += row[i];
  for (double& v : g.comp_mean) v /= double(reps);
  std::size_t best = 0;
  for (std::size_t i = 1; i <= ng; ++i)
    if (g.comp_mean[i] > g.comp_mean[best]) best = i;
  if (best == ng) {
    g.uniform_max = true;
    std::size_t bd = 0;
    for (std::size_t i = 1; i < ng; ++i)
      if (g.comp_mean[i] > g.comp_mean[bd]) bd = i;
    g.arg = starts[bd];
  } else {
    g.arg = starts[best];
  }
  return g;
}

}  // namespace

bool McSummary::all_pass() const { return checks_pass(checks); }
bool FreeEnergyReport::all_pass() const { return checks_pass(checks); }
bool FiniteVolumeReport::all_pass() const { return checks_pass(checks); }
bool TvReport::all_pass() const { return checks_pass(checks); }

void write_summary_json(const McSummary& s, const std::string& path) {
  nlohmann::json j;
  j["name"] = s.name;
  j["config_digest"] = s.config_digest;
  j["seed"] = s.seed;
  j["reps"] = s.reps;
  j["estimate"] = s.estimate;
  j["stderr"] = s.stderr_;
  j["checks"] = nlohmann::json::array();
  for (const CheckResult& c : s.checks)
    j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"margin", c.margin}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_blocks_csv(const McSummary& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "block,mean\n";
  char buf[64];
  for (std::size_t i = 0; i < s.blocks.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, s.blocks[i]);
    out << buf;
  }
}

McSummary truncated_mean(const DisorderModel& m, int N, double beta,
                         const MassFunction& f, long reps, uint64_t seed,
                         const DpOpts& opts) {
  require_pmf(f, "truncated_mean");
  if (reps < 1) throw std::invalid_argument("truncated_mean: reps must be >= 1");
  auto rows = z_batch(m, N, beta, f, reps, seed, opts, [](double z) {
    return std::vector<double>{std::min(z, 1.0)};
  });
  McSummary s;
  s.name = "truncated_mean";
  s.seed = seed;
  s.reps = reps;
  const Jackknife jk = jk_mean(rows, 0);
  s.estimate = jk.estimate;
  s.stderr_ = jk.stderr_;
  s.blocks = block_means(column(rows, 0), 64);

  const double sigma2 = m.pair_variance(beta);
  const double ez2 = second_moment_field(N, sigma2, f);
  const double floor = 1.0 / (1.0 + ez2);
  CheckResult pz;
  pz.name = "paley-zygmund-floor";
  pz.margin = s.estimate - (floor - 3.0 * s.stderr_);
  pz.pass = pz.margin >= 0;
  s.checks.push_back(pz);
  return s;
}

McSummary fractional_moment(const DisorderModel& m, int N, double beta,
                            const MassFunction& f, double gamma, long reps,
                            uint64_t seed, const DpOpts& opts) {
  require_pmf(f, "fractional_moment");
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("fractional_moment: gamma must lie in [0,1]");
  if (reps < 1)
    throw std::invalid_argument("fractional_moment: reps must be >= 1");
  auto rows = z_batch(m, N, beta, f, reps, seed, opts, [gamma](double z) {
    return std::vector<double>{std::pow(z, gamma), std::min(z, 1.0),
                               std::sqrt(z)};
  });
  McSummary s;
  s.name = "fractional_moment";
  s.seed = seed;
  s.reps = reps;
  const Jackknife jk = jk_mean(rows, 0);
  s.estimate = jk.estimate;
  s.stderr_ = jk.stderr_;
  s.blocks = block_means(column(rows, 0), 64);

  if (reps >= 1000) {
    const std::size_t blk = block_for(rows.size());
    const Jackknife lo = jackknife_blocks(
        rows, blk, [](const std::vector<double>& t, long c) {
          return t[2] / double(c) - t[1] / double(c);
        });
    CheckResult cl;
    cl.name = "half-moment-sandwich-lower";
    cl.margin = lo.estimate + 3.0 * lo.stderr_;
    cl.pass = cl.margin >= 0;
    s.checks.push_back(cl);
    const Jackknife hi = jackknife_blocks(
        rows, blk, [](const std::vector<double>& t, long c) {
          return std::sqrt(2.0 * std::max(0.0, t[1] / double(c))) -
                 t[2] / double(c);
        });
    CheckResult ch;
    ch.name = "half-moment-sandwich-upper";
    ch.margin = hi.estimate + 3.0 * hi.stderr_;
    ch.pass = ch.margin >= 0;
    s.checks.push_back(ch);
  }
  if (gamma == 1.0) {
    CheckResult c;
    c.name = "mean-one";
    c.margin = 3.0 * s.stderr_ - std::abs(s.estimate - f.total());
    c.pass = c.margin >= 0;
    s.checks.push_back(c);
  }
  if (gamma == 0.0) {
    CheckResult c;
    c.name = "unit-at-gamma-zero";
    c.pass = (s.estimate == 1.0 && s.stderr_ == 0.0);
    c.margin = 0;
    s.checks.push_back(c);
  }
  return s;
}

FreeEnergyReport free_energy(const DisorderModel& m, double beta,
                             const std::vector<int>& n_grid, long reps,
                             uint64_t seed, const DpOpts& opts) {
  if (n_grid.empty()) throw std::invalid_argument("free_energy: empty n_grid");
  for (std::size_t i = 0; i + 1 < n_grid.size(); ++i)
    if (n_grid[i + 1] <= n_grid[i])
      throw std::invalid_argument("free_energy: n_grid must be increasing");
  if (reps < 1) throw std::invalid_argument("free_energy: reps must be >= 1");

  FreeEnergyReport rep;
  rep.n_grid = n_grid;
  rep.reps = reps;
  rep.seed = seed;
  const MassFunction d0 = MassFunction::delta(0, 0);

  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const int N = n_grid[i];
    DpOpts o = opts;
    o.force_renorm = true;  // log Z leaves double range long before N does
    if (o.horizon <= 0) o.horizon = N;
    auto rows = parallel_replicas(reps, [&](long r) {
      const FieldCtx ctx =
          FieldCtx::lazy(m, beta, seed, uint64_t(i) * uint64_t(reps) + uint64_t(r));
      return std::vector<double>{partition_field(ctx, d0, N, o).log_z /
                                 double(N)};
    });
    const Jackknife jk = jk_mean(rows, 0);
    rep.fhat.push_back(jk.estimate);
    rep.se.push_back(jk.stderr_);
  }
  rep.f_extrapolated = rep.fhat.back();
  rep.f_se = rep.se.back();
  if (n_grid.size() >= 2) {
    const std::size_t k = n_grid.size() - 1;
    rep.finite_size_band = std::abs(rep.fhat[k] - rep.fhat[k - 1]) +
                           3.0 * (rep.se[k] + rep.se[k - 1]);
  } else {
    rep.finite_size_band = 3.0 * rep.f_se;
  }

  for (std::size_t i = 0; i + 1 < n_grid.size(); ++i) {
    if (n_grid[i + 1] != 2 * n_grid[i]) continue;
    CheckResult c;
    c.name = "superadditive-n" + std::to_string(n_grid[i]);
    // 1e-13 absolute floor: log Z carries summation rounding even at beta=0
    c.margin = rep.fhat[i + 1] - rep.fhat[i] +
               3.0 * (rep.se[i] + rep.se[i + 1]) + 1e-13;
    c.pass = c.margin >= 0;
    rep.checks.push_back(c);
  }
  if (beta == 0.0) {
    CheckResult c;
    c.name = "zero-at-beta-zero";
    double worst = 0;
    for (double v : rep.fhat) worst = std::max(worst, std::abs(v));
    c.margin = 1e-13 - worst;
    c.pass = c.margin >= 0;
    rep.checks.push_back(c);
  } else {
    CheckResult c;
    c.name = "negative-free-energy";
    c.margin = -(rep.f_extrapolated + 3.0 * rep.f_se);
    c.pass = c.margin > 0;
    rep.checks.push_back(c);
  }
  return rep;
}

FiniteVolumeReport finite_volume_criterion(const DisorderModel& m, int L,
                                           double beta, long reps,
                                           const std::vector<int>& m_list,
                                           uint64_t seed, const DpOpts& opts) {
  if (L < 16)
    throw std::invalid_argument("finite_volume_criterion: L must be >= 16");
  if (reps < 1)
    throw std::invalid_argument("finite_volume_criterion: reps must be >= 1");
  FiniteVolumeReport rep;
  rep.L = L;
  rep.beta = beta;
  rep.reps = reps;
  rep.seed = seed;
  rep.m_list = m_list;

  const GridSup g = grid_sup_sqrt(m, beta, L, std::sqrt(double(L)), nullptr,
                                  reps, seed, opts);
  rep.sup_half_moment = g.est;
  rep.sup_se = g.se;
  rep.arg_start = g.arg;
  rep.uniform_is_max = g.uniform_max;
  rep.criterion = (g.est + 3.0 * g.se <= 1.0 / 300.0);

  const MassFunction fd = MassFunction::delta(rep.arg_start[0], rep.arg_start[1]);
  for (std::size_t k = 0; k < m_list.size(); ++k) {
    const int mm = m_list[k];
    if (mm < 0)
      throw std::invalid_argument("finite_volume_criterion: m must be >= 0");
    if (mm == 0) {
      // horizon below one block: the half moment is trivially <= 1
      rep.decay.push_back(1.0);
      rep.decay_se.push_back(0.0);
      CheckResult c;
      c.name = "trivial-bound-m0";
      c.pass = true;
      c.margin = 0;
      rep.checks.push_back(c);
      continue;
    }
    const uint64_t sk = mix64(seed ^ (0xf1d0ULL + uint64_t(mm)));
    auto rows = z_batch(m, mm * L, beta, fd, reps, sk, opts, [](double z) {
      return std::vector<double>{std::sqrt(z)};
    });
    const Jackknife jk = jk_mean(rows, 0);
    rep.decay.push_back(jk.estimate);
    rep.decay_se.push_back(jk.stderr_);
  }

  if (rep.criterion) {
    for (std::size_t k = 0; k < m_list.size(); ++k) {
      if (m_list[k] <= 0) continue;
      CheckResult c;
      c.name = "decay-bound-m" + std::to_string(m_list[k]);
      const double bound = 3.0 * std::exp(-double(m_list[k]));
      c.margin = bound - (rep.decay[k] - 3.0 * rep.decay_se[k]);
      c.pass = c.margin >= 0;
      rep.checks.push_back(c);
    }
    for (std::size_t k = 0; k + 1 < m_list.size(); ++k) {
      if (m_list[k] <= 0 || m_list[k + 1] <= m_list[k]) continue;
      if (!(rep.decay[k] > 0 && rep.decay[k + 1] > 0)) continue;
      const double dm = double(m_list[k + 1] - m_list[k]);
      const double slope =
          (std::log(rep.decay[k + 1]) - std::log(rep.decay[k])) / dm;
      const double rel =
          (rep.decay_se[k] / rep.decay[k] + rep.decay_se[k + 1] / rep.decay[k + 1]) /
          dm;
      CheckResult c;
      c.name = "decay-slope-m" + std::to_string(m_list[k]) + "-" +
               std::to_string(m_list[k + 1]);
      c.margin = -0.5 - slope + 3.0 * rel;
      c.pass = c.margin >= 0;
      rep.checks.push_back(c);
    }
  }
  return rep;
}

namespace {

// terminal indicator slice of the ball B(center, sqrt(N0)/2) at time N0
Slice target_ball_slice(int n0, std::array<int, 2> center, double half) {
  Slice t;
  t.n = n0;
  const int par = (center[0] + center[1] + n0) & 1;  // reachable-site parity
  const int hr = static_cast<int>(half) + 1;
  std::vector<std::array<int, 2>> sites;
  for (int z1 = center[0] - hr; z1 <= center[0] + hr; ++z1)
    for (int z2 = center[1] - hr; z2 <= center[1] + hr; ++z2) {
      if (((z1 + z2) & 1) != par) continue;
      const double d1 = z1 - center[0], d2 = z2 - center[1];
      if (d1 * d1 + d2 * d2 > half * half) continue;
      sites.push_back({z1, z2});
    }
  if (sites.empty()) throw std::invalid_argument("skeleton: empty target ball");
  int u_lo = 1 << 30, u_hi = -(1 << 30), v_lo = 1 << 30, v_hi = -(1 << 30);
  for (const auto& z : sites) {
    const int u = z[0] + z[1], v = z[0] - z[1];
    u_lo = std::min(u_lo, u);
    u_hi = std::max(u_hi, u);
    v_lo = std::min(v_lo, v);
    v_hi = std::max(v_hi, v);
  }
  t.u_lo = u_lo;
  t.v_lo = v_lo;
  t.nu = (u_hi - u_lo) / 2 + 1;
  t.nv = (v_hi - v_lo) / 2 + 1;
  t.a.assign(std::size_t(t.nu) * t.nv, 0.0);
  for (const auto& z : sites) {
    const int iu = (z[0] + z[1] - u_lo) / 2, iv = (z[0] - z[1] - v_lo) / 2;
    t.at(iu, iv) = 1.0;
  }
  return t;
}

}  // namespace

McSummary skeleton_q(const DisorderModel& m, int N0, double beta,
                     std::array<int, 2> y, long reps, uint64_t seed,
                     const DpOpts& opts) {
  if (N0 < 16) throw std::invalid_argument("skeleton_q: N0 must be >= 16");
  if (reps < 1) throw std::invalid_argument("skeleton_q: reps must be >= 1");
  const double rt = std::sqrt(double(N0));
  const std::array<int, 2> center{int(std::lround(y[0] * rt)),
                                  int(std::lround(y[1] * rt))};
  const Slice term = target_ball_slice(N0, center, 0.5 * rt);
  const GridSup g =
      grid_sup_sqrt(m, beta, N0, 0.5 * rt, &term, reps, seed, opts);
  McSummary s;
  s.name = "skeleton_q";
  s.seed = seed;
  s.reps = reps;
  s.estimate = g.est;
  s.stderr_ = g.se;
  return s;
}

SkeletonTable skeleton_q_table(const DisorderModel& m, int N0, double beta,
                               const std::vector<std::array<int, 2>>& ys,
                               long reps, uint64_t seed, const DpOpts& opts) {
  SkeletonTable t;
  t.N0 = N0;
  t.beta = beta;
  t.ys = ys;
  t.reps = reps;
  t.seed = seed;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const McSummary s = skeleton_q(m, N0, beta, ys[i], reps,
                                   mix64(seed ^ (0x5ce1ULL + uint64_t(i))), opts);
    t.q.push_back(s.estimate);
    t.q_se.push_back(s.stderr_);
    t.sum_q += s.estimate;
    t.sum_q_se += s.stderr_ * s.stderr_;
    const int l1 = std::abs(ys[i][0]) + std::abs(ys[i][1]);
    if (l1 >= 4) {
      CheckResult c;
      c.name = "tail-y" + std::to_string(ys[i][0]) + "_" + std::to_string(ys[i][1]);
      const double bound = std::exp(-0.25 * double(l1 - 2) * double(l1 - 2));
      c.margin = bound + 3.0 * s.stderr_ - s.estimate;
      c.pass = c.margin >= 0;
      t.checks.push_back(c);
    }
  }
  t.sum_q_se = std::sqrt(t.sum_q_se);
  return t;
}

TvReport sizebias_tv(const DisorderModel& m, int N, double beta,
                     const MassFunction& f, long reps, uint64_t seed,
                     const DpOpts& opts) {
  require_pmf(f, "sizebias_tv");
  if (reps < 1) throw std::invalid_argument("sizebias_tv: reps must be >= 1");
  TvReport tv;
  tv.reps = reps;
  tv.seed = seed;

  auto rows = z_batch(m, N, beta, f, reps, seed, opts, [](double z) {
    return std::vector<double>{std::min(z, 1.0), z >= 1.0 ? 1.0 : 0.0,
                               std::min(z, 2.0)};
  });
  tv.route1.name = "truncated_mean";
  tv.route1.seed = seed;
  tv.route1.reps = reps;
  {
    const Jackknife jk = jk_mean(rows, 0);
    tv.route1.estimate = jk.estimate;
    tv.route1.stderr_ = jk.stderr_;
    tv.route1.blocks = block_means(column(rows, 0), 64);
  }
  const Jackknife jp = jk_mean(rows, 1);
  tv.p_ge = jp.estimate;
  tv.p_ge_se = jp.stderr_;

  DpOpts o = opts;
  if (o.horizon <= 0) o.horizon = N;
  const uint64_t seed_t = mix64(seed ^ 0x74696c74ULL);
  auto trows = parallel_replicas(reps, [&](long rep) {
    const Path path = sizebias_path(f, N, seed_t, uint64_t(rep));
    const FieldCtx ctx = FieldCtx::tilted(m, beta, seed_t, uint64_t(rep), path);
    const double z = std::exp(partition_field(ctx, f, N, o).log_z);
    return std::vector<double>{z < 1.0 ? 1.0 : 0.0};
  });
  const Jackknife jt = jk_mean(trows, 0);
  tv.pt_lt = jt.estimate;
  tv.pt_lt_se = jt.stderr_;
  tv.route2 = tv.p_ge + tv.pt_lt;
  tv.route2_se = std::sqrt(tv.p_ge_se * tv.p_ge_se + tv.pt_lt_se * tv.pt_lt_se);

  {
    CheckResult c;
    c.name = "routes-agree";
    const double se = std::sqrt(tv.route1.stderr_ * tv.route1.stderr_ +
                                tv.route2_se * tv.route2_se);
    c.margin = 3.0 * se - std::abs(tv.route1.estimate - tv.route2);
    c.pass = c.margin >= 0;
    tv.checks.push_back(c);
  }
  {
    CheckResult c;
    c.name = "route1-at-most-one";
    c.margin = 1.0 + 3.0 * tv.route1.stderr_ - tv.route1.estimate;
    c.pass = c.margin >= 0;
    tv.checks.push_back(c);
  }
  {
    CheckResult c;
    c.name = "route2-at-most-one";
    c.margin = 1.0 + 3.0 * tv.route2_se - tv.route2;
    c.pass = c.margin >= 0;
    tv.checks.push_back(c);
  }
  // E[Z /\ K] <= K P(Z >= 1) + P~(Z < 1); the second term is the size-biased
  // rendering of E[Z 1_{Z<1}]
  for (int K = 1; K <= 2; ++K) {
    const Jackknife jk =
        (K == 1) ? jk_mean(rows, 0) : jk_mean(rows, 2);
    CheckResult c;
    c.name = "change-of-measure-k" + std::to_string(K);
    const double lhs = jk.estimate;
    const double rhs = double(K) * tv.p_ge + tv.pt_lt;
    const double se = jk.stderr_ + double(K) * tv.p_ge_se + tv.pt_lt_se;
    c.margin = rhs + 3.0 * se - lhs;
    c.pass = c.margin >= 0;
    tv.checks.push_back(c);
  }
  return tv;
}

McSummary change_of_scale_audit(const DisorderModel& m, int A, double beta,
                                long reps, uint64_t seed, const DpOpts& opts) {
  if (A < 16) throw std::invalid_argument("change_of_scale_audit: A must be >= 16");
  const GridSup ga = grid_sup_sqrt(m, beta, A, std::sqrt(double(A)), nullptr,
                                   reps, seed, opts);
  const GridSup gb =
      grid_sup_sqrt(m, beta, 4 * A, std::sqrt(double(4 * A)), nullptr, reps,
                    mix64(seed ^ 0x5ca1eULL), opts);
  McSummary s;
  s.name = "change_of_scale_audit";
  s.seed = seed;
  s.reps = reps;
  s.estimate = gb.est;
  s.stderr_ = gb.se;
  CheckResult c;
  c.name = "change-of-scale";
  c.margin = 4.0 * ga.est + 3.0 * (gb.se + 4.0 * ga.se) - gb.est;
  c.pass = c.margin >= 0;
  s.checks.push_back(c);
  return s;
}

}  // namespace polymer2d
