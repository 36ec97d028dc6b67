#include "polymer2d/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "polymer2d/disorder.hpp"
#include "polymer2d/engine.hpp"
#include "polymer2d/estimators.hpp"
#include "polymer2d/kernels.hpp"
#include "polymer2d/moments.hpp"
#include "polymer2d/numerics.hpp"
#include "polymer2d/proxy.hpp"

namespace polymer2d {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------- schema --

enum class Cal { none, full, n_only };

struct ExpSchema {
  const char* name;
  const char* desc;
  Cal cal;
  std::vector<const char*> extra;
};

const std::vector<ExpSchema>& schemas() {
  static const std::vector<ExpSchema> s = {
      {"kernels", "return mass u(n), overlap sums R_n, log-window constant",
       Cal::none, {"kernels.n_max"}},
      {"calibrate", "beta(theta) table and the two e^theta routes", Cal::full,
       {"calibrate.theta_min", "calibrate.theta_max", "calibrate.steps"}},
      {"decay-vs-theta", "truncated mean of Z_N(U) against theta at fixed N",
       Cal::n_only, {"decay.thetas"}},
      {"second-moment", "exact second moments, B table, log-log gap",
       Cal::full, {}},
      {"truncated-variance", "V(m,K) tables and the hat-moment sandwich",
       Cal::full, {"tvar.k_list"}},
      {"proxy-report", "strip proxy X: exact moments, MC, Chebyshev bounds",
       Cal::full, {"proxy.eta", "proxy.k"}},
      {"stretches", "alternating-stretch statistics of two renewals",
       Cal::none, {"stretch.n_tilde", "stretch.ell_max"}},
      {"free-energy", "E[log Z_N]/N on a doubling grid, superadditivity",
       Cal::full, {"fe.n_min"}},
      {"finite-volume", "Dirac-grid sup of half moments at scale L, decay in m",
       Cal::full, {"fv.m_list"}},
      {"skeleton-q", "coarse skeleton weights Q(y) with tail certificates",
       Cal::full, {"skeleton.ys"}},
      {"tv-identity", "truncated mean vs total-variation route with audits",
       Cal::full, {}},
      {"appendix-b", "collision-count moments by DP and by renewal series",
       Cal::full, {"ab.n_grid"}},
  };
  return s;
}

const ExpSchema* find_schema(const std::string& name) {
  for (const ExpSchema& s : schemas())
    if (name == s.name) return &s;
  return nullptr;
}

// ---------------------------------------------------------------- parsing --

bool parse_i64(const std::string& s, long long& out) {
  try {
    std::size_t pos = 0;
    out = std::stoll(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool parse_u64(const std::string& s, uint64_t& out) {
  try {
    std::size_t pos = 0;
    out = std::stoull(s, &pos);
    return pos == s.size() && s.find('-') == std::string::npos;
  } catch (...) {
    return false;
  }
}

bool parse_f64(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(out);
  } catch (...) {
    return false;
  }
}

bool parse_f64_list(const std::string& s, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v;
    if (!parse_f64(trim(item), v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

bool parse_i_list(const std::string& s, std::vector<int>& out) {
  std::vector<double> vs;
  if (!parse_f64_list(s, vs)) return false;
  out.clear();
  for (double v : vs) {
    if (v != std::floor(v) || std::abs(v) > 1e9) return false;
    out.push_back(int(v));
  }
  return true;
}

// "a,b;c,d" -> {{a,b},{c,d}}
bool parse_pairs(const std::string& s, std::vector<std::array<int, 2>>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    std::vector<int> p;
    if (!parse_i_list(trim(item), p) || p.size() != 2) return false;
    out.push_back({p[0], p[1]});
  }
  return !out.empty();
}

// typed read-with-default; validation has already vetted the value
long geti(const Config& c, const std::string& k, long def) {
  auto it = c.kv.find(k);
  if (it == c.kv.end()) return def;
  long long v = 0;
  parse_i64(it->second, v);
  return long(v);
}

double getf(const Config& c, const std::string& k, double def) {
  auto it = c.kv.find(k);
  if (it == c.kv.end()) return def;
  double v = def;
  parse_f64(it->second, v);
  return v;
}

// ------------------------------------------------------------- validation --

void check_int_range(const Config& c, const std::string& k, long long lo,
                     long long hi, std::vector<std::string>& out) {
  auto it = c.kv.find(k);
  if (it == c.kv.end()) return;
  long long v;
  if (!parse_i64(it->second, v))
    out.push_back(k + ": not an integer");
  else if (v < lo || v > hi)
    out.push_back(k + ": out of range [" + std::to_string(lo) + ", " +
                  std::to_string(hi) + "]");
}

void check_f_range(const Config& c, const std::string& k, double lo, double hi,
                   std::vector<std::string>& out) {
  auto it = c.kv.find(k);
  if (it == c.kv.end()) return;
  double v;
  if (!parse_f64(it->second, v))
    out.push_back(k + ": not a number");
  else if (v < lo || v > hi)
    out.push_back(k + ": out of range");
}

// ------------------------------------------------------------- emission ----

struct Emitter {
  std::string name, dir, stamp;
  json j;
  json checks = json::array();
  bool all_pass = true;

  Emitter(const std::string& name_, const std::string& dir_,
          const std::string& digest, uint64_t seed)
      : name(name_), dir(dir_) {
    stamp = std::string("# polymer2d v") + kArtifactVersion +
            " digest=" + digest + " seed=" + std::to_string(seed);
    j["name"] = name_;
    j["version"] = kArtifactVersion;
    j["digest"] = digest;
    j["seed"] = seed;
  }

  std::string path(const char* ext) const { return dir + "/" + name + ext; }

  void check(const std::string& nm, bool pass, double margin) {
    checks.push_back({{"name", nm}, {"pass", pass}, {"margin", margin}});
    all_pass = all_pass && pass;
  }

  std::ofstream open_csv(const std::string& header) const {
    std::ofstream out(path(".csv"));
    if (!out) throw std::runtime_error("cannot write " + path(".csv"));
    out << stamp << "\n" << header << "\n";
    return out;
  }

  void write_plot(const std::string& ylabel, const std::string& plot_cmd,
                  const std::string& extra = "") const {
    std::ofstream out(path(".plot"));
    if (!out) throw std::runtime_error("cannot write " + path(".plot"));
    out << stamp << "\n"
        << "set datafile separator ','\n"
        << "set terminal pngcairo size 960,640\n"
        << "set output '" << name << ".png'\n"
        << "set ylabel '" << ylabel << "'\n"
        << "set key top right\n";
    if (!extra.empty()) out << extra << "\n";
    out << "plot " << plot_cmd << "\n";
  }

  int finish(std::ostream& log) {
    j["checks"] = checks;
    j["all_pass"] = all_pass;
    std::ofstream out(path(".json"));
    if (!out) throw std::runtime_error("cannot write " + path(".json"));
    out << j.dump(2) << "\n";
    for (const auto& c : checks)
      log << name << ": check " << c["name"].get<std::string>() << " "
          << (c["pass"].get<bool>() ? "pass" : "FAIL")
          << " (margin " << c["margin"].get<double>() << ")\n";
    log << name << ": " << (all_pass ? "all checks passed" : "CHECKS FAILED")
        << "\n";
    return all_pass ? 0 : 1;
  }
};

struct Resolved {
  DisorderModel model;
  double beta = 0, theta = 0, sigma2 = 0;
  int n = 0;
  long reps = 0;
  uint64_t seed = 0;
  DpOpts opts;
};

Resolved resolve(const Config& cfg, Cal cal, std::optional<uint64_t> seed_ov,
                 long default_reps) {
  Resolved r;
  uint64_t s = 1;
  if (cfg.has("seed")) parse_u64(cfg.kv.at("seed"), s);
  r.seed = seed_ov ? *seed_ov : s;
  r.reps = geti(cfg, "reps", default_reps);
  r.opts.window_c = getf(cfg, "window.c", 2.5);
  r.opts.mem_cap_bytes =
      std::size_t(geti(cfg, "window.memcap_mb", 2048)) << 20;
  if (cal == Cal::none) return r;
  r.model.family = family_from_string(cfg.kv.at("family"));
  r.n = int(geti(cfg, "calibration.n", 0));
  if (cal == Cal::n_only) return r;
  if (cfg.has("calibration.theta")) {
    const CriticalPoint cp =
        solve_beta(r.model, r.n, getf(cfg, "calibration.theta", 0));
    r.beta = cp.beta;
    r.theta = cp.theta;
    r.sigma2 = cp.sigma2;
  } else {
    r.beta = getf(cfg, "calibration.beta", 0);
    r.theta = theta_of(r.n, r.model, r.beta);
    r.sigma2 = r.model.pair_variance(r.beta);
  }
  return r;
}

void record_calibration(Emitter& em, const Resolved& r) {
  em.j["family"] = to_string(r.model.family);
  em.j["calibration"] = {{"n", r.n},
                         {"beta", r.beta},
                         {"theta", r.theta},
                         {"sigma2", r.sigma2}};
}

json check_json(const std::vector<CheckResult>& cs, Emitter& em) {
  json arr = json::array();
  for (const CheckResult& c : cs) {
    em.check(c.name, c.pass, c.margin);
    arr.push_back({{"name", c.name}, {"pass", c.pass}, {"margin", c.margin}});
  }
  return arr;
}

// ------------------------------------------------------------ experiments --

void exp_kernels(const Config& cfg, Resolved& r, Emitter& em) {
  const int n_max = int(geti(cfg, "kernels.n_max", 4096));
  auto csv = em.open_csv("n,u_n,R_n");
  for (int n = 1; n <= n_max; ++n)
    csv << n << "," << g17(return_mass(n)) << "," << g17(overlap_sum(n))
        << "\n";
  const double alpha = kPi * overlap_sum(n_max) - std::log(double(n_max));
  em.j["results"] = {{"n_max", n_max}, {"alpha_n", alpha}};
  const double a0 = 4 * std::log(2.0) + kEulerGamma - kPi;
  em.check("alpha-window-lower", alpha >= a0 - 1e-9, alpha - a0);
  em.check("alpha-window-upper", alpha <= a0 + kPi / n_max + 1e-9,
           a0 + kPi / n_max - alpha);
  em.write_plot("R_n", "'" + em.name + ".csv' skip 2 using 1:3 with lines title 'R_n'",
                "set logscale x");
}

void exp_calibrate(const Config& cfg, Resolved& r, Emitter& em) {
  record_calibration(em, r);
  const double tmin = getf(cfg, "calibrate.theta_min", -2.0);
  const double tmax = getf(cfg, "calibrate.theta_max", 3.0);
  const int steps = int(geti(cfg, "calibrate.steps", 11));
  auto csv = em.open_csv("theta,beta,sigma2,etheta_direct,etheta_split");
  double max_rt = 0, max_route = 0;
  for (int i = 0; i < steps; ++i) {
    const double th =
        steps == 1 ? tmin : tmin + (tmax - tmin) * double(i) / (steps - 1);
    const CriticalPoint cp = solve_beta(r.model, r.n, th);
    const double ed = etheta_direct(r.n, r.model, cp.beta);
    const double es = etheta_split(r.n, r.model, cp.beta);
    csv << g17(th) << "," << g17(cp.beta) << "," << g17(cp.sigma2) << ","
        << g17(ed) << "," << g17(es) << "\n";
    max_rt = std::max(max_rt, std::abs(theta_of(r.n, r.model, cp.beta) - th));
    max_route = std::max(max_route, std::abs(ed - es) / std::max(ed, 1e-300));
  }
  em.j["results"] = {{"max_roundtrip_error", max_rt},
                     {"max_route_mismatch", max_route}};
  em.check("round-trip", max_rt <= 1e-9, 1e-9 - max_rt);
  em.check("etheta-routes", max_route <= 1e-10, 1e-10 - max_route);
  em.write_plot("beta",
                "'" + em.name + ".csv' skip 2 using 1:2 with linespoints title 'beta(theta)'");
}

void exp_decay(const Config& cfg, Resolved& r, Emitter& em) {
  em.j["family"] = to_string(r.model.family);
  std::vector<double> thetas{0, 1, 2, 3};
  if (cfg.has("decay.thetas")) parse_f64_list(cfg.kv.at("decay.thetas"), thetas);
  const MassFunction u = MassFunction::uniform_ball(std::sqrt(double(r.n)));
  auto csv = em.open_csv("theta,estimate,stderr");
  std::vector<double> est, se;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const CriticalPoint cp = solve_beta(r.model, r.n, thetas[i]);
    const McSummary s =
        truncated_mean(r.model, r.n, cp.beta, u, r.reps,
                       mix64(r.seed + 0x9e37 * (i + 1)), r.opts);
    est.push_back(s.estimate);
    se.push_back(s.stderr_);
    csv << g17(thetas[i]) << "," << g17(s.estimate) << "," << g17(s.stderr_)
        << "\n";
    for (const CheckResult& c : s.checks)
      em.check(c.name + "-t" + std::to_string(i), c.pass, c.margin);
  }
  bool mono = true;
  for (std::size_t i = 0; i + 1 < est.size(); ++i) mono = mono && est[i + 1] < est[i];
  em.check("strictly-decreasing", mono, 0);
  if (est.size() >= 2) {
    const double gap = est.front() - est.back();
    const double s2 = 2.0 * std::hypot(se.front(), se.back());
    em.check("endpoint-separation", gap >= s2, gap - s2);
  }
  for (std::size_t i = 1; i + 1 < est.size(); ++i) {
    const double d2 = -std::log(est[i + 1]) + 2 * std::log(est[i]) -
                      std::log(est[i - 1]);
    const double sd = std::sqrt(
        se[i + 1] * se[i + 1] / (est[i + 1] * est[i + 1]) +
        4 * se[i] * se[i] / (est[i] * est[i]) +
        se[i - 1] * se[i - 1] / (est[i - 1] * est[i - 1]));
    em.check("superlinear-" + std::to_string(i), d2 >= sd, d2 - sd);
  }
  em.j["results"] = {{"theta", thetas}, {"estimate", est}, {"stderr", se}};
  em.write_plot("E[Z and 1]",
                "'" + em.name + ".csv' skip 2 using 1:2:3 with yerrorlines title 'truncated mean'");
}

void exp_second_moment(const Config& cfg, Resolved& r, Emitter& em) {
  record_calibration(em, r);
  const MassFunction u = MassFunction::uniform_ball(std::sqrt(double(r.n)));
  const std::vector<double> b = second_moment_point(r.n, r.sigma2);
  auto csv = em.open_csv("m,B_m");
  for (int m = 0; m <= r.n; ++m) csv << m << "," << g17(b[std::size_t(m)]) << "\n";
  const double ez2 = second_moment_field(r.n, r.sigma2, u);
  const double g = green_weighted(r.n, u, u);
  em.j["results"] = {{"second_moment_uniform", ez2},
                     {"green_uniform", g},
                     {"b_final", b.back()}};
  em.check("green-bounded", g <= 3.0, 3.0 - g);
  if (ez2 > 1.0) {
    const double ll = std::log(std::log(ez2));
    const double bound = r.theta - kEulerGamma + 0.5;
    em.j["results"]["loglog"] = ll;
    em.j["results"]["loglog_bound"] = bound;
    em.check("quasicritical-bound", ll <= bound, bound - ll);
  }
  em.write_plot("B_m", "'" + em.name + ".csv' skip 2 using 1:2 with lines title 'B'",
                "set logscale y");
}

void exp_truncated_variance(const Config& cfg, Resolved& r, Emitter& em) {
  record_calibration(em, r);
  std::vector<int> ks{1, 2, 4, 8};
  if (cfg.has("tvar.k_list")) parse_i_list(cfg.kv.at("tvar.k_list"), ks);
  const std::vector<double> b = second_moment_point(r.n, r.sigma2);
  std::vector<std::vector<double>> vs;
  std::string header = "m,B";
  for (int k : ks) {
    vs.push_back(truncated_variance(r.n, r.sigma2, k));
    header += ",V_" + std::to_string(k);
  }
  auto csv = em.open_csv(header);
  for (int m = 0; m <= r.n; ++m) {
    csv << m << "," << g17(b[std::size_t(m)]);
    for (const auto& v : vs) csv << "," << g17(v[std::size_t(m)]);
    csv << "\n";
  }
  bool mono = true;
  for (std::size_t i = 0; i + 1 < vs.size(); ++i)
    for (int m = 0; m <= r.n; ++m)
      mono = mono && vs[i][std::size_t(m)] <= vs[i + 1][std::size_t(m)] + 1e-15;
  for (const auto& v : vs)
    for (int m = 0; m <= r.n; ++m)
      mono = mono && v[std::size_t(m)] <= b[std::size_t(m)] * (1 + 1e-12);
  em.check("truncation-monotone", mono, 0);
  const MassFunction f = MassFunction::delta(0, 0);
  const MassFunction u = MassFunction::uniform_ball(std::sqrt(double(r.n)));
  const HatMoment hm = hat_moment(r.n, r.sigma2, ks.back(), f, u);
  em.j["results"] = {{"hat_value", hm.value},
                     {"hat_lower", hm.lower},
                     {"hat_upper", hm.upper},
                     {"k_list", ks}};
  em.check("hat-sandwich-lower", hm.lower <= hm.value * (1 + 1e-12),
           hm.value - hm.lower);
  em.check("hat-sandwich-upper", hm.value <= hm.upper * (1 + 1e-12),
           hm.upper - hm.value);
  em.write_plot("V(m,K)",
                "'" + em.name + ".csv' skip 2 using 1:3 with lines title 'V_K'",
                "set logscale y");
}

void exp_proxy_report(const Config& cfg, Resolved& r, Emitter& em) {
  record_calibration(em, r);
  const double eta = getf(cfg, "proxy.eta", r.theta / 3.0);
  const int K = int(geti(cfg, "proxy.k", 0));
  const StripDecomposition strips = make_strips(r.n, eta);
  em.j["strips"] = {{"eta", eta},
                    {"M", strips.M},
                    {"n_tilde", strips.n_tilde},
                    {"n_effective", strips.n_effective}};
  ProxyReport pr;
  try {
    pr = event_report(r.model, r.beta, strips, K, r.reps, r.seed, r.opts);
  } catch (const std::runtime_error& e) {
    em.check(e.what(), false, 0);
    em.open_csv("l,var_strip");
    em.write_plot("X", "0 title ''");
    return;
  }
  auto csv = em.open_csv("l,var_strip");
  for (std::size_t l = 0; l < pr.exact.var_strip.size(); ++l)
    csv << (l + 1) << "," << g17(pr.exact.var_strip[l]) << "\n";
  em.j["results"] = {
      {"var_exact", pr.exact.var_x},
      {"tilted_mean_inf", pr.exact.tilted_mean_inf},
      {"argmin", {pr.exact.argmin[0], pr.exact.argmin[1]}},
      {"threshold", pr.exact.threshold},
      {"plain_mean", pr.plain_mc.mean},
      {"plain_mean_se", pr.plain_mc.mean_se},
      {"plain_var", pr.plain_mc.var},
      {"plain_var_se", pr.plain_mc.var_se},
      {"tilted_mean", pr.tilted_mc.mean},
      {"tilted_mean_se", pr.tilted_mc.mean_se},
      {"tilted_var", pr.tilted_mc.var},
      {"p_event", pr.p_event},
      {"p_comp_tilted", pr.p_comp_tilted},
      {"cheby_plain", pr.cheby_plain},
      {"cheby_tilted", pr.cheby_tilted}};
  em.check("plain-mean-zero",
           std::abs(pr.plain_mc.mean) <= 3 * pr.plain_mc.mean_se,
           3 * pr.plain_mc.mean_se - std::abs(pr.plain_mc.mean));
  em.check("variance-exact-vs-mc",
           std::abs(pr.plain_mc.var - pr.exact.var_x) <= 3 * pr.plain_mc.var_se,
           3 * pr.plain_mc.var_se - std::abs(pr.plain_mc.var - pr.exact.var_x));
  em.check("tilted-mean-exact-vs-mc",
           std::abs(pr.tilted_mc.mean - pr.exact.tilted_mean_inf) <=
               3 * pr.tilted_mc.mean_se,
           3 * pr.tilted_mc.mean_se -
               std::abs(pr.tilted_mc.mean - pr.exact.tilted_mean_inf));
  em.check("chebyshev-plain", pr.plain_within_bound,
           pr.cheby_plain + 3 * pr.p_event_se - pr.p_event);
  em.check("chebyshev-tilted", pr.tilted_within_bound,
           pr.cheby_tilted - pr.p_comp_tilted);
  em.write_plot("Var X_l",
                "'" + em.name + ".csv' skip 2 using 1:2 with boxes title 'strip variance'");
}

void exp_stretches(const Config& cfg, Resolved& r, Emitter& em) {
  const int nt = int(geti(cfg, "stretch.n_tilde", 4096));
  const int lmax = int(geti(cfg, "stretch.ell_max", 6));
  const StretchReport sr = stretch_prob_mc(nt, lmax, r.reps, r.seed);
  auto csv = em.open_csv("ell,J_ell,stderr");
  for (std::size_t l = 0; l < sr.j_ell.size(); ++l)
    csv << l << "," << g17(sr.j_ell[l]) << "," << g17(sr.stderr_[l]) << "\n";
  em.j["results"] = {{"n_tilde", nt}, {"j_ell", sr.j_ell}, {"stderr", sr.stderr_}};
  em.check("j2-at-most-one", sr.j_ell[2] <= 1.0, 1.0 - sr.j_ell[2]);
  for (int l = 2; l + 1 <= lmax; ++l) {
    const double drop = sr.j_ell[std::size_t(l)] - sr.j_ell[std::size_t(l + 1)];
    const double slack =
        2 * (sr.stderr_[std::size_t(l)] + sr.stderr_[std::size_t(l + 1)]);
    em.check("nonincreasing-l" + std::to_string(l), drop >= -slack, drop + slack);
  }
  if (nt >= 4096 && lmax >= 6) {
    // least-squares slope of log J_ell over ell = 2..6, points with >= 5 hits
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int pts = 0;
    for (int l = 2; l <= 6; ++l) {
      const double j = sr.j_ell[std::size_t(l)];
      if (j * double(sr.reps) < 5.0) break;
      sx += l; sy += std::log(j); sxx += double(l) * l; sxy += l * std::log(j);
      ++pts;
    }
    if (pts >= 3) {
      const double slope = (pts * sxy - sx * sy) / (pts * sxx - sx * sx);
      em.check("slope-bound", slope <= std::log(0.5), std::log(0.5) - slope);
      em.j["results"]["slope"] = slope;
      em.j["results"]["slope_points"] = pts;
    } else {
      em.check("slope-bound", false, 0.0);
    }
  }
  em.write_plot("J_ell",
                "'" + em.name + ".csv' skip 2 using 1:2:3 with yerrorlines title 'J'",
                "set logscale y");
}

void exp_free_energy(const Config& cfg, Resolved& r, Emitter& em) {
  record_calibration(em, r);
  const int n_min = int(geti(cfg, "fe.n_min", 16));
  std::vector<int> grid;
  for (int n = n_min; n <= r.n; n *= 2) grid.push_back(n);
  if (grid.empty() || grid.back() != r.n) grid.push_back(r.n);
  const FreeEnergyReport fr =
      free_energy(r.model, r.beta, grid, r.reps, r.seed, r.opts);
  auto csv = em.open_csv("N,fhat,stderr");
  for (std::size_t i = 0; i < fr.n_grid.size(); ++i)
    csv << fr.n_grid[i] << "," << g17(fr.fhat[i]) << "," << g17(fr.se[i])
        << "\n";
  em.j["results"] = {{"f_extrapolated", fr.f_extrapolated},
                     {"f_se", fr.f_se},
                     {"finite_size_band", fr.finite_size_band}};
  check_json(fr.checks, em);
  em.write_plot("E[log Z]/N",
                "'" + em.name + ".csv' skip 2 using 1:2:3 with yerrorlines title 'fhat'",
                "set logscale x");
}

void exp_finite_volume(const Config& cfg, Resolved& r, Emitter& em) {
  record_calibration(em, r);
  std::vector<int> ms{1, 2, 3};
  if (cfg.has("fv.m_list")) parse_i_list(cfg.kv.at("fv.m_list"), ms);
  const FiniteVolumeReport fv =
      finite_volume_criterion(r.model, r.n, r.beta, r.reps, ms, r.seed, r.opts);
  auto csv = em.open_csv("m,half_moment,stderr");
  for (std::size_t i = 0; i < fv.m_list.size(); ++i)
    csv << fv.m_list[i] << "," << g17(fv.decay[i]) << "," << g17(fv.decay_se[i])
        << "\n";
  em.j["results"] = {{"sup_half_moment", fv.sup_half_moment},
                     {"sup_se", fv.sup_se},
                     {"arg_start", {fv.arg_start[0], fv.arg_start[1]}},
                     {"uniform_is_max", fv.uniform_is_max},
                     {"criterion_threshold", 1.0 / 300.0},
                     {"criterion_satisfied", fv.criterion}};
  check_json(fv.checks, em);
  em.write_plot("E[sqrt Z_mL]",
                "'" + em.name + ".csv' skip 2 using 1:2:3 with yerrorlines title 'half moment'",
                "set logscale y");
}

void exp_skeleton_q(const Config& cfg, Resolved& r, Emitter& em) {
  record_calibration(em, r);
  std::vector<std::array<int, 2>> ys{{0, 0}, {2, 0}, {1, 1}, {4, 0},
                                     {2, 2}, {6, 0}, {3, 3}, {8, 0}, {4, 4}};
  if (cfg.has("skeleton.ys")) parse_pairs(cfg.kv.at("skeleton.ys"), ys);
  const SkeletonTable st =
      skeleton_q_table(r.model, r.n, r.beta, ys, r.reps, r.seed, r.opts);
  auto csv = em.open_csv("y1,y2,l1,q,stderr");
  for (std::size_t i = 0; i < st.ys.size(); ++i)
    csv << st.ys[i][0] << "," << st.ys[i][1] << ","
        << std::abs(st.ys[i][0]) + std::abs(st.ys[i][1]) << "," << g17(st.q[i])
        << "," << g17(st.q_se[i]) << "\n";
  em.j["results"] = {{"sum_q", st.sum_q},
                     {"sum_q_se", st.sum_q_se},
                     {"threshold_e_inv", std::exp(-1.0)},
                     {"bookkeeping_k6", 85.0 / 300.0}};
  check_json(st.checks, em);
  em.write_plot("Q(y)",
                "'" + em.name + ".csv' skip 2 using 3:4 with points pt 7 title 'Q'",
                "set logscale y");
}

void exp_tv_identity(const Config& cfg, Resolved& r, Emitter& em) {
  record_calibration(em, r);
  const MassFunction u = MassFunction::uniform_ball(std::sqrt(double(r.n)));
  const TvReport tv = sizebias_tv(r.model, r.n, r.beta, u, r.reps, r.seed, r.opts);
  auto csv = em.open_csv("block,route1_mean");
  for (std::size_t i = 0; i < tv.route1.blocks.size(); ++i)
    csv << i << "," << g17(tv.route1.blocks[i]) << "\n";
  em.j["results"] = {{"route1", tv.route1.estimate},
                     {"route1_se", tv.route1.stderr_},
                     {"p_ge", tv.p_ge},
                     {"pt_lt", tv.pt_lt},
                     {"route2", tv.route2},
                     {"route2_se", tv.route2_se}};
  check_json(tv.checks, em);
  em.write_plot("block mean",
                "'" + em.name + ".csv' skip 2 using 1:2 with points title 'route1 blocks'");
}

void exp_appendix_b(const Config& cfg, Resolved& r, Emitter& em) {
  record_calibration(em, r);
  std::vector<int> grid{64, 128, 256};
  if (cfg.has("ab.n_grid")) parse_i_list(cfg.kv.at("ab.n_grid"), grid);
  const bool per_n = cfg.has("calibration.theta");
  auto csv = em.open_csv("N,beta,sigma2,m0,m1,claim");
  double max_rel = 0, claim_lo = 1e300, claim_hi = 0;
  for (int n : grid) {
    double beta = r.beta, sigma2 = r.sigma2;
    if (per_n) {
      const CriticalPoint cp =
          solve_beta(r.model, n, getf(cfg, "calibration.theta", 0));
      beta = cp.beta;
      sigma2 = cp.sigma2;
    }
    const double l2 = std::log1p(sigma2);
    const CollisionMoments dp = collision_moments(n, l2);
    const CollisionMoments sr = collision_moments_series(n, l2);
    max_rel = std::max(max_rel, std::abs(dp.m0 - sr.m0) / sr.m0);
    max_rel = std::max(max_rel, std::abs(dp.m1 - sr.m1) / sr.m1);
    const double claim = beta * beta * (1.0 + 1.0 / sigma2) * dp.m1 /
                         std::pow(std::log(double(n)), 2);
    claim_lo = std::min(claim_lo, claim);
    claim_hi = std::max(claim_hi, claim);
    csv << n << "," << g17(beta) << "," << g17(sigma2) << "," << g17(dp.m0)
        << "," << g17(dp.m1) << "," << g17(claim) << "\n";
  }
  em.check("series-matches-dp", max_rel <= 1e-8, 1e-8 - max_rel);
  const int nl = grid.back();
  const double m1_zero = collision_moments(nl, 0.0).m1;
  const double rn = overlap_sum(nl);
  em.check("mean-collisions-at-zero", std::abs(m1_zero - rn) / rn <= 1e-12,
           1e-12 - std::abs(m1_zero - rn) / rn);
  const DiamondField fld = DiamondField::sample(r.model, 8, 0, r.seed, 0);
  const MassFunction d0 = MassFunction::delta(0, 0);
  const double g1 = grad_log_norm_sq(fld, r.model, r.beta, d0);
  const double g2 = pair_collision_functional(fld, r.model, r.beta, d0);
  const double grel = std::abs(g1 - g2) / std::max(std::abs(g2), 1e-300);
  em.check("gradient-pair-route", grel <= 1e-8, 1e-8 - grel);
  em.j["results"] = {{"max_series_dp_rel", max_rel},
                     {"claim_min", claim_lo},
                     {"claim_max", claim_hi},
                     {"grad_route_rel", grel}};
  em.write_plot("claim ratio",
                "'" + em.name + ".csv' skip 2 using 1:6 with linespoints title 'claim'",
                "set logscale x");
}

}  // namespace

// ---------------------------------------------------------------- public --

Config parse_config_text(const std::string& text) {
  Config c;
  std::stringstream ss(text);
  std::string line;
  int ln = 0;
  while (std::getline(ss, line)) {
    ++ln;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(ln) +
                                  ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key.empty() || val.empty())
      throw std::invalid_argument("config line " + std::to_string(ln) +
                                  ": empty key or value");
    if (c.kv.count(key))
      throw std::invalid_argument("config line " + std::to_string(ln) +
                                  ": duplicate key " + key);
    c.kv[key] = val;
  }
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over sorted normalized lines
  for (const auto& [k, v] : c.kv) {
    const std::string s = k + "=" + v + "\n";
    for (char ch : s) {
      h ^= uint64_t(uint8_t(ch));
      h *= 0x100000001b3ULL;
    }
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  c.digest = buf;
  return c;
}

Config parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

const std::vector<std::string>& experiment_catalog() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const ExpSchema& s : schemas()) v.push_back(s.name);
    return v;
  }();
  return names;
}

std::string experiment_description(const std::string& name) {
  const ExpSchema* s = find_schema(name);
  return s ? s->desc : "";
}

std::vector<std::string> validate_config(const Config& cfg,
                                         const std::string& name_hint) {
  std::vector<std::string> v;
  std::string name = name_hint;
  if (cfg.has("experiment")) {
    const std::string& ce = cfg.kv.at("experiment");
    if (!name.empty() && ce != name)
      v.push_back("experiment name mismatch: config says " + ce);
    name = name.empty() ? ce : name;
  } else if (name.empty()) {
    v.push_back("missing key: experiment");
  }
  if (!v.empty() && name.empty()) return v;
  const ExpSchema* sch = find_schema(name);
  if (!sch) {
    v.push_back("unknown experiment: " + name);
    return v;
  }

  std::vector<std::string> allowed = {"experiment", "seed",       "reps",
                                      "out",        "window.c",   "window.memcap_mb"};
  if (sch->cal != Cal::none) {
    allowed.push_back("family");
    allowed.push_back("calibration.n");
  }
  if (sch->cal == Cal::full) {
    allowed.push_back("calibration.beta");
    allowed.push_back("calibration.theta");
  }
  for (const char* k : sch->extra) allowed.push_back(k);
  for (const auto& [k, val] : cfg.kv)
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      v.push_back("unknown key: " + k);

  if (cfg.has("seed")) {
    uint64_t s;
    if (!parse_u64(cfg.kv.at("seed"), s)) v.push_back("seed: not a non-negative integer");
  }
  check_int_range(cfg, "reps", 1, 1000000000LL, v);
  check_f_range(cfg, "window.c", 0.0, 10.0, v);
  check_int_range(cfg, "window.memcap_mb", 64, 4096, v);
  check_int_range(cfg, "kernels.n_max", 1, 10000000LL, v);
  check_int_range(cfg, "calibrate.steps", 1, 100000LL, v);
  check_int_range(cfg, "stretch.n_tilde", 4, 1 << 22, v);
  check_int_range(cfg, "stretch.ell_max", 2, 64, v);
  check_int_range(cfg, "fe.n_min", 1, 1 << 22, v);
  check_int_range(cfg, "proxy.k", -1000, 1000, v);
  check_f_range(cfg, "calibrate.theta_min", -1e6, 1e6, v);
  check_f_range(cfg, "calibrate.theta_max", -1e6, 1e6, v);
  check_f_range(cfg, "proxy.eta", -1e6, 1e6, v);
  check_f_range(cfg, "calibration.beta", 0.0, 50.0, v);

  int n = 0;
  if (sch->cal != Cal::none) {
    if (!cfg.has("family"))
      v.push_back("missing key: family");
    else {
      try {
        family_from_string(cfg.kv.at("family"));
      } catch (const std::exception&) {
        v.push_back("unknown family: " + cfg.kv.at("family"));
      }
    }
    if (!cfg.has("calibration.n")) {
      v.push_back("missing key: calibration.n");
    } else {
      check_int_range(cfg, "calibration.n", 1, 1 << 22, v);
      n = int(geti(cfg, "calibration.n", 0));
    }
  }
  const bool family_ok =
      sch->cal == Cal::none ||
      (cfg.has("family") && [&] {
        try {
          family_from_string(cfg.kv.at("family"));
          return true;
        } catch (...) {
          return false;
        }
      }());

  if (sch->cal == Cal::full && n >= 1 && family_ok) {
    const bool hb = cfg.has("calibration.beta"), ht = cfg.has("calibration.theta");
    if (hb == ht) {
      v.push_back(
          "exactly one of calibration.beta and calibration.theta must be given");
    } else if (ht) {
      double th;
      if (!parse_f64(cfg.kv.at("calibration.theta"), th)) {
        v.push_back("calibration.theta: not a number");
      } else {
        DisorderModel m{family_from_string(cfg.kv.at("family"))};
        try {
          solve_beta(m, n, th);
        } catch (const std::invalid_argument& e) {
          v.push_back(e.what());  // "calibration out of range: ..."
        }
      }
    }
  }
  if (sch->cal == Cal::n_only) {
    if (cfg.has("calibration.beta") || cfg.has("calibration.theta"))
      v.push_back(
          "calibration.beta/theta are not used by this experiment (theta sweep)");
    if (n >= 1 && family_ok) {
      std::vector<double> ts{0.0, 1.0, 2.0, 3.0};
      if (cfg.has("decay.thetas") &&
          !parse_f64_list(cfg.kv.at("decay.thetas"), ts)) {
        v.push_back("decay.thetas: not a number list");
      } else {
        DisorderModel m{family_from_string(cfg.kv.at("family"))};
        for (double th : ts) {
          try {
            solve_beta(m, n, th);
          } catch (const std::invalid_argument& e) {
            v.push_back(e.what());
            break;
          }
        }
      }
    }
  }

  if (name == "proxy-report" && n >= 1 && v.empty()) {
    double theta = 0;
    if (cfg.has("calibration.theta"))
      parse_f64(cfg.kv.at("calibration.theta"), theta);
    else {
      DisorderModel m{family_from_string(cfg.kv.at("family"))};
      theta = theta_of(n, m, getf(cfg, "calibration.beta", 0));
    }
    const double eta = getf(cfg, "proxy.eta", theta / 3.0);
    try {
      const StripDecomposition sd = make_strips(n, eta);
      if (geti(cfg, "proxy.k", 0) > 0 && sd.n_effective > 12)
        v.push_back("proxy.k: chaos truncation requires n_effective <= 12");
    } catch (const std::invalid_argument& e) {
      v.push_back(e.what());
    }
  }
  if (name == "finite-volume" && cfg.has("calibration.n"))
    check_int_range(cfg, "calibration.n", 16, 1 << 22, v);
  if (name == "skeleton-q" && cfg.has("calibration.n"))
    check_int_range(cfg, "calibration.n", 16, 1 << 22, v);
  if (cfg.has("fv.m_list")) {
    std::vector<int> ms;
    if (!parse_i_list(cfg.kv.at("fv.m_list"), ms))
      v.push_back("fv.m_list: not an integer list");
    else
      for (int m : ms)
        if (m < 0) v.push_back("fv.m_list: entries must be >= 0");
  }
  if (cfg.has("ab.n_grid")) {
    std::vector<int> g;
    if (!parse_i_list(cfg.kv.at("ab.n_grid"), g))
      v.push_back("ab.n_grid: not an integer list");
    else
      for (int x : g)
        if (x < 2) v.push_back("ab.n_grid: entries must be >= 2");
  }
  if (cfg.has("skeleton.ys")) {
    std::vector<std::array<int, 2>> ys;
    if (!parse_pairs(cfg.kv.at("skeleton.ys"), ys))
      v.push_back("skeleton.ys: expected pairs like \"a,b;c,d\"");
  }
  if (cfg.has("decay.thetas") && sch->cal != Cal::n_only)
    v.push_back("unknown key: decay.thetas");
  return v;
}

int run_experiment(const std::string& name, const Config& cfg,
                   std::optional<uint64_t> seed_override,
                   const std::string& out_dir, std::ostream& log) {
  if (!find_schema(name)) {
    log << "unknown experiment: " << name << "\navailable:\n";
    for (const std::string& s : experiment_catalog())
      log << "  " << s << "  - " << experiment_description(s) << "\n";
    return 2;
  }
  const std::vector<std::string> violations = validate_config(cfg, name);
  if (!violations.empty()) {
    log << "invalid config: " << violations.front() << "\n";
    return 3;
  }
  const ExpSchema* sch = find_schema(name);
  long def_reps = 200;
  if (name == "decay-vs-theta" || name == "tv-identity") def_reps = 2000;
  if (name == "proxy-report") def_reps = 4000;
  if (name == "stretches") def_reps = 200000;
  if (name == "skeleton-q") def_reps = 400;
  Resolved r = resolve(cfg, sch->cal, seed_override, def_reps);
  Emitter em(name, out_dir, cfg.digest, r.seed);
  em.j["config"] = cfg.kv;
  em.j["reps"] = r.reps;

  if (name == "kernels") exp_kernels(cfg, r, em);
  else if (name == "calibrate") exp_calibrate(cfg, r, em);
  else if (name == "decay-vs-theta") exp_decay(cfg, r, em);
  else if (name == "second-moment") exp_second_moment(cfg, r, em);
  else if (name == "truncated-variance") exp_truncated_variance(cfg, r, em);
  else if (name == "proxy-report") exp_proxy_report(cfg, r, em);
  else if (name == "stretches") exp_stretches(cfg, r, em);
  else if (name == "free-energy") exp_free_energy(cfg, r, em);
  else if (name == "finite-volume") exp_finite_volume(cfg, r, em);
  else if (name == "skeleton-q") exp_skeleton_q(cfg, r, em);
  else if (name == "tv-identity") exp_tv_identity(cfg, r, em);
  else if (name == "appendix-b") exp_appendix_b(cfg, r, em);
  return em.finish(log);
}

}  // namespace polymer2d
