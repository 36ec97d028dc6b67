#include "polymer2d/moments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "polymer2d/disorder.hpp"
#include "polymer2d/kernels.hpp"
#include "polymer2d/numerics.hpp"
#include "polymer2d/rng.hpp"

namespace polymer2d {

std::vector<double> second_moment_point(int n, double sigma2) {
  if (n < 0) throw std::invalid_argument("second_moment_point: n must be >= 0");
  if (!(sigma2 >= 0)) throw std::invalid_argument("second_moment_point: sigma2 must be >= 0");
  std::vector<double> B(static_cast<std::size_t>(n) + 1);
  B[0] = 1.0;
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  for (int j = 1; j <= n; ++j) u[static_cast<std::size_t>(j)] = return_mass(j);
  for (int m = 1; m <= n; ++m) {
    double acc = 0;
    for (int j = 1; j <= m; ++j)
      acc += u[static_cast<std::size_t>(j)] * B[static_cast<std::size_t>(m - j)];
    B[static_cast<std::size_t>(m)] = 1.0 + sigma2 * acc;
  }
  return B;
}

double second_moment_point_series(int n, double sigma2) {
  const std::vector<double> b = renewal_subset_sums(n, n);
  double acc = 0, sk = 1;
  for (std::size_t k = 0; k < b.size(); ++k) {
    acc += sk * b[k];
    sk *= sigma2;
  }
  return acc;
}

namespace {
// integers in [lo, hi] congruent to par (mod 2)
long count_parity(int lo, int hi, int par) {
  if (hi < lo) return 0;
  int first = lo + (((lo % 2 + 2) % 2) != par ? 1 : 0);
  if (first > hi) return 0;
  return (hi - first) / 2 + 1;
}

struct DiffHist {
  // weights on rotated differences k = du, l = dv; index step 2
  int k_lo = 0, l_lo = 0, nk = 0, nl = 0;
  std::vector<double> w;  // nk x nl row-major
  double& at(int ik, int il) { return w[static_cast<std::size_t>(ik) * nl + il]; }
  double at(int ik, int il) const { return w[static_cast<std::size_t>(ik) * nl + il]; }
};

DiffHist difference_histogram(const MassFunction& f, const MassFunction& g) {
  int fu0, fu1, fv0, fv1, gu0, gu1, gv0, gv1;
  f.bounds(fu0, fu1, fv0, fv1);
  g.bounds(gu0, gu1, gv0, gv1);
  DiffHist h;
  h.k_lo = gu0 - fu1;
  h.l_lo = gv0 - fv1;
  h.nk = (gu1 - fu0 - h.k_lo) / 2 + 1;
  h.nl = (gv1 - fv0 - h.l_lo) / 2 + 1;
  h.w.assign(static_cast<std::size_t>(h.nk) * h.nl, 0.0);

  const bool big = f.size() * g.size() > std::size_t{20000000};
  if (!big) {
    for (std::size_t i = 0; i < f.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j) {
        const int k = (g.sites[j][0] + g.sites[j][1]) - (f.sites[i][0] + f.sites[i][1]);
        const int l = (g.sites[j][0] - g.sites[j][1]) - (f.sites[i][0] - f.sites[i][1]);
        h.at((k - h.k_lo) / 2, (l - h.l_lo) / 2) += f.w[i] * g.w[j];
      }
    return h;
  }
  if (f.kind != MassFunction::Kind::ball || g.kind != MassFunction::Kind::ball)
    throw std::length_error("overlap kernel: supports too large for direct product");
  // centered even balls: count pairs per difference by row-chord intersection
  const double rf = f.radius, rg = g.radius;
  const int Rf = static_cast<int>(std::floor(rf)), Rg = static_cast<int>(std::floor(rg));
  const double wt = f.w[0] * g.w[0];  // uniform weights
  for (int z1 = -(Rf + Rg); z1 <= Rf + Rg; ++z1)
    for (int z2 = -(Rf + Rg); z2 <= Rf + Rg; ++z2) {
      if ((z1 + z2) & 1) continue;
      long cnt = 0;
      for (int x1 = -Rf; x1 <= Rf; ++x1) {
        const int y1 = x1 + z1;
        const double cf2 = rf * rf - static_cast<double>(x1) * x1;
        const double cg2 = rg * rg - static_cast<double>(y1) * y1;
        if (cf2 < 0 || cg2 < 0) continue;
        const int cf = static_cast<int>(std::floor(std::sqrt(cf2)));
        const int cg = static_cast<int>(std::floor(std::sqrt(cg2)));
        const int lo = std::max(-cf, -cg - z2), hi = std::min(cf, cg - z2);
        cnt += count_parity(lo, hi, (x1 % 2 + 2) % 2);
      }
      if (cnt == 0) continue;
      const int k = z1 + z2, l = z1 - z2;
      h.at((k - h.k_lo) / 2, (l - h.l_lo) / 2) += wt * static_cast<double>(cnt);
    }
  return h;
}
}  // namespace

std::vector<double> overlap_kernel(int n, const MassFunction& f,
                                   const MassFunction& g) {
  if (n < 0) throw std::invalid_argument("overlap_kernel: n must be >= 0");
  f.validate();
  g.validate();
  std::vector<double> q(static_cast<std::size_t>(n) + 1, 0.0);
  if (((f.parity() ^ g.parity()) & 1) != 0) return q;  // odd differences never meet
  const DiffHist h = difference_histogram(f, g);
  // grids of rotated difference values (all even by parity match)
  std::vector<double> pk(static_cast<std::size_t>(h.nk)), pl(static_cast<std::size_t>(h.nl));
  for (int i = 0; i <= n; ++i) {
    const int t = 2 * i;
    for (int a = 0; a < h.nk; ++a) pk[static_cast<std::size_t>(a)] = srw_p1(t, h.k_lo + 2 * a);
    for (int b = 0; b < h.nl; ++b) pl[static_cast<std::size_t>(b)] = srw_p1(t, h.l_lo + 2 * b);
    // q_{2i}(f,g) = pk . H . pl
    double acc = 0;
    for (int a = 0; a < h.nk; ++a) {
      if (pk[static_cast<std::size_t>(a)] == 0.0) continue;
      const double* row = h.w.data() + static_cast<std::size_t>(a) * h.nl;
      double dot = 0;
      for (int b = 0; b < h.nl; ++b) dot += row[b] * pl[static_cast<std::size_t>(b)];
      acc += pk[static_cast<std::size_t>(a)] * dot;
    }
    q[static_cast<std::size_t>(i)] = acc;
  }
  return q;
}

double second_moment_field(int n, double sigma2, const MassFunction& f,
                           const MassFunction& g) {
  const std::vector<double> q = overlap_kernel(n, f, g);
  const std::vector<double> B = second_moment_point(n, sigma2);
  double acc = 0;
  for (int i = 1; i <= n; ++i)
    acc += q[static_cast<std::size_t>(i)] * B[static_cast<std::size_t>(n - i)];
  return f.total() * g.total() + sigma2 * acc;
}

double second_moment_field(int n, double sigma2, const MassFunction& f) {
  return second_moment_field(n, sigma2, f, f);
}

double green_weighted(int n, const MassFunction& f, const MassFunction& g) {
  const std::vector<double> q = overlap_kernel(n, f, g);
  double acc = 0;
  for (int i = 1; i <= n; ++i) acc += q[static_cast<std::size_t>(i)];
  return acc;
}

std::vector<double> truncated_variance(int n, double sigma2, int K) {
  if (n < 0) throw std::invalid_argument("truncated_variance: n must be >= 0");
  if (K <= 0) return second_moment_point(n, sigma2);
  std::vector<double> V(static_cast<std::size_t>(n) + 1, 1.0);  // k = 0 term
  if (K == 1) return V;
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  for (int j = 1; j <= n; ++j) u[static_cast<std::size_t>(j)] = return_mass(j);
  std::vector<double> fk = u;  // law of tau_k, k = 1
  double sk = sigma2;
  for (int k = 1; k <= K - 1; ++k) {
    double pref = 0;
    for (int m = 1; m <= n; ++m) {
      pref += fk[static_cast<std::size_t>(m)];
      V[static_cast<std::size_t>(m)] += sk * pref;
    }
    if (k < K - 1) {
      std::vector<double> nx(static_cast<std::size_t>(n) + 1, 0.0);
      for (int m = k; m <= n; ++m) {
        const double fm = fk[static_cast<std::size_t>(m)];
        if (fm == 0.0) continue;
        for (int j = 1; m + j <= n; ++j)
          nx[static_cast<std::size_t>(m + j)] += fm * u[static_cast<std::size_t>(j)];
      }
      fk.swap(nx);
    }
    sk *= sigma2;
  }
  return V;
}

HatMoment hat_moment(int n, double sigma2, int K, const MassFunction& f,
                     const MassFunction& g) {
  const std::vector<double> q = overlap_kernel(n, f, g);
  const std::vector<double> V = truncated_variance(n, sigma2, K);
  HatMoment hm;
  double acc = 0, g_half = 0, g_full = 0;
  for (int i = 1; i <= n; ++i) {
    acc += q[static_cast<std::size_t>(i)] * V[static_cast<std::size_t>(n - i)];
    g_full += q[static_cast<std::size_t>(i)];
    if (i <= n / 2) g_half += q[static_cast<std::size_t>(i)];
  }
  hm.value = sigma2 * acc;
  hm.lower = sigma2 * V[static_cast<std::size_t>(n / 2)] * g_half;
  hm.upper = sigma2 * V[static_cast<std::size_t>(n)] * g_full;
  return hm;
}

QuasicriticalReport quasicritical_check(int n, double theta) {
  QuasicriticalReport r;
  r.n = n;
  r.theta = theta;
  const DisorderModel gm{Family::gaussian};
  const CriticalPoint cp = solve_beta(gm, n, theta);
  r.beta = cp.beta;
  r.sigma2 = cp.sigma2;
  const MassFunction U = MassFunction::uniform_ball(std::sqrt(static_cast<double>(n)));
  r.second_moment = second_moment_field(n, r.sigma2, U);
  r.loglog = std::log(std::log(r.second_moment));
  r.gap = r.loglog - (theta - kEulerGamma);
  return r;
}

StretchReport stretch_prob_mc(int n_tilde, int ell_max, long reps, uint64_t seed) {
  if (reps < 1000) throw std::invalid_argument("stretch_prob_mc: reps must be >= 1000");
  if (ell_max < 2) throw std::invalid_argument("stretch_prob_mc: ell_max must be >= 2");
  const RenewalLaw law(n_tilde);
  StretchReport rep;
  rep.n_tilde = n_tilde;
  rep.reps = reps;
  std::vector<long> hits(static_cast<std::size_t>(ell_max) + 1, 0);

  std::vector<int> ta, tb;
  for (long r = 0; r < reps; ++r) {
    SeqRng rng(seed, static_cast<uint64_t>(r), kSaltRenewal);
    auto draw = [&](std::vector<int>& out) {
      out.clear();
      int t = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(n_tilde)));
      while (t <= n_tilde) {
        out.push_back(t);
        t += law.sample(rng);
      }
    };
    draw(ta);
    draw(tb);
    // merge; disjointness and label-run count
    bool disjoint = true;
    int runs = 0, last_label = -1;
    std::size_t ia = 0, ib = 0;
    while (ia < ta.size() || ib < tb.size()) {
      int label;
      if (ia < ta.size() && ib < tb.size() && ta[ia] == tb[ib]) {
        disjoint = false;
        break;
      }
      if (ib >= tb.size() || (ia < ta.size() && ta[ia] < tb[ib])) {
        label = 0;
        ++ia;
      } else {
        label = 1;
        ++ib;
      }
      if (label != last_label) {
        ++runs;
        last_label = label;
      }
    }
    if (!disjoint) continue;
    for (int l = 0; l <= ell_max; ++l)
      if (runs >= l) ++hits[static_cast<std::size_t>(l)];
  }
  rep.j_ell.resize(static_cast<std::size_t>(ell_max) + 1);
  rep.stderr_.resize(static_cast<std::size_t>(ell_max) + 1);
  for (int l = 0; l <= ell_max; ++l) {
    const double p = static_cast<double>(hits[static_cast<std::size_t>(l)]) /
                     static_cast<double>(reps);
    rep.j_ell[static_cast<std::size_t>(l)] = p;
    rep.stderr_[static_cast<std::size_t>(l)] =
        std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(reps)) /
                  static_cast<double>(reps));
  }
  return rep;
}

void export_moment_csv(const std::string& path, int n, double sigma2, int K) {
  const std::vector<double> B = second_moment_point(n, sigma2);
  const std::vector<double> V = truncated_variance(n, sigma2, K);
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + path);
  std::fprintf(fp, "m,B,V_K%d\n", K);
  for (int m = 0; m <= n; ++m)
    std::fprintf(fp, "%d,%.17g,%.17g\n", m, B[static_cast<std::size_t>(m)],
                 V[static_cast<std::size_t>(m)]);
  std::fclose(fp);
}

}  // namespace polymer2d
