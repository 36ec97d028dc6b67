#include "polymer2d/kernels.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <stdexcept>

namespace polymer2d {

// ---------------------------------------------------------------- u(n), R_n
// c_n = 2^{-2n} binom(2n,n) via the exact ratio c_n = c_{n-1}(2n-1)/(2n);
// u(n) = c_n^2. Relative error stays at a few ulps per step.
namespace {
struct OverlapCache {
  std::vector<double> u{0.0};  // u[0] unused
  std::vector<double> R{0.0};
  double c_last = 1.0;  // c_{n} for n = u.size()-1
  std::mutex mu;
  void ensure(int64_t n) {
    std::lock_guard<std::mutex> lock(mu);
    while (int64_t(u.size()) <= n) {
      int64_t m = int64_t(u.size());
      c_last *= double(2 * m - 1) / double(2 * m);
      u.push_back(c_last * c_last);
      R.push_back(R.back() + u.back());
    }
  }
};
OverlapCache g_overlap;
}  // namespace

double return_mass(int64_t n) {
  if (n < 1) throw std::domain_error("return_mass: n must be >= 1");
  g_overlap.ensure(n);
  return g_overlap.u[size_t(n)];
}

double overlap_sum(int64_t n) {
  if (n < 1) throw std::domain_error("overlap_sum: n must be >= 1");
  g_overlap.ensure(n);
  return g_overlap.R[size_t(n)];
}

double srw_q(int64_t n, int64_t x1, int64_t x2) {
  if (n < 0) throw std::domain_error("srw_q: n < 0");
  if (n == 0) return (x1 == 0 && x2 == 0) ? 1.0 : 0.0;
  return srw_p1(n, x1 + x2) * srw_p1(n, x1 - x2);
}

// ------------------------------------------------------------- KernelTable
// Full-cone convolution in rotated compressed coordinates: at time n the
// slice is (n+1)x(n+1) with u = 2 iu - n, v = 2 iv - n. One step is the
// separable pair-sum stencil divided by 4.
KernelTable KernelTable::build(int n_max, int r_win,
                               const std::vector<int>& persist_times) {
  if (n_max < 1) throw std::invalid_argument("KernelTable: n_max >= 1");
  if (r_win < 0) throw std::invalid_argument("KernelTable: r_win >= 0");
  KernelTable t;
  t.n_max_ = n_max;
  t.r_win_ = r_win;
  t.times_ = persist_times;
  std::sort(t.times_.begin(), t.times_.end());
  for (int m : t.times_)
    if (m < 1 || m > n_max)
      throw std::invalid_argument("KernelTable: persist time out of range");
  t.slices_.resize(t.times_.size());
  t.u_.assign(size_t(n_max) + 1, 0.0);
  t.r_.assign(size_t(n_max) + 1, 0.0);

  std::vector<double> cur{1.0}, tmp, nxt;  // slice at n=0: single cell
  for (int n = 1; n <= n_max; ++n) {
    int w = n + 1;  // new slice is w x w
    // row pass: tmp[iu][j] = cur[iu-1][j] + cur[iu][j], iu in [0,w), j in [0,n)
    tmp.assign(size_t(w) * size_t(n), 0.0);
    for (int iu = 0; iu < w; ++iu) {
      const double* lo = (iu > 0) ? &cur[size_t(iu - 1) * n] : nullptr;
      const double* hi = (iu < n) ? &cur[size_t(iu) * n] : nullptr;
      double* dst = &tmp[size_t(iu) * n];
      if (lo && hi)
        for (int j = 0; j < n; ++j) dst[j] = lo[j] + hi[j];
      else if (lo)
        for (int j = 0; j < n; ++j) dst[j] = lo[j];
      else if (hi)
        for (int j = 0; j < n; ++j) dst[j] = hi[j];
    }
    // column pass with the 1/4
    nxt.assign(size_t(w) * size_t(w), 0.0);
    for (int iu = 0; iu < w; ++iu) {
      const double* src = &tmp[size_t(iu) * n];
      double* dst = &nxt[size_t(iu) * w];
      dst[0] = 0.25 * src[0];
      for (int j = 1; j < n; ++j) dst[j] = 0.25 * (src[j - 1] + src[j]);
      dst[n] = 0.25 * src[n - 1];
    }
    cur.swap(nxt);
    double s2 = 0;
    for (double q : cur) s2 += q * q;
    t.u_[size_t(n)] = s2;
    t.r_[size_t(n)] = t.r_[size_t(n - 1)] + s2;
    auto it = std::lower_bound(t.times_.begin(), t.times_.end(), n);
    if (it != t.times_.end() && *it == n)
      t.slices_[size_t(it - t.times_.begin())] = cur;
  }
  return t;
}

double KernelTable::step_kernel(int n, int x1, int x2) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), n);
  if (it == times_.end() || *it != n)
    throw std::out_of_range("step_kernel: time not persisted");
  if (std::abs(x1) > r_win_ || std::abs(x2) > r_win_)
    throw std::out_of_range("step_kernel: site outside persisted window");
  int u = x1 + x2, v = x1 - x2;
  if (((u + n) & 1) != 0) return 0.0;  // parity-excluded site
  int iu = (u + n) / 2, iv = (v + n) / 2;
  if (iu < 0 || iu > n || iv < 0 || iv > n) return 0.0;  // outside the cone
  const auto& s = slices_[size_t(it - times_.begin())];
  return s[size_t(iu) * size_t(n + 1) + size_t(iv)];
}

double KernelTable::return_mass(int n) const {
  if (n < 1 || n > n_max_) throw std::out_of_range("return_mass: n");
  return u_[size_t(n)];
}

double KernelTable::overlap_sum(int n) const {
  if (n < 1 || n > n_max_) throw std::out_of_range("overlap_sum: n");
  return r_[size_t(n)];
}

// -------------------------------------------------------------- RenewalLaw
RenewalLaw::RenewalLaw(int n_) : n(n_) {
  if (n < 1) throw std::invalid_argument("RenewalLaw: n >= 1");
  double Rn = polymer2d::overlap_sum(n);
  mass.assign(size_t(n) + 1, 0.0);
  cum.assign(size_t(n) + 1, 0.0);
  for (int j = 1; j <= n; ++j) {
    mass[size_t(j)] = polymer2d::return_mass(j) / Rn;
    cum[size_t(j)] = cum[size_t(j) - 1] + mass[size_t(j)];
  }
  cum[size_t(n)] = 1.0;
}

double RenewalLaw::hit_prob(int k) const {
  if (k < 0) throw std::domain_error("hit_prob: k >= 0");
  if (k == 0) return 1.0;
  std::vector<double> g(mass.begin(), mass.end());  // g_1
  for (int ord = 2; ord <= k; ++ord) {
    std::vector<double> h(size_t(n) + 1, 0.0);
    for (int m = 2; m <= n; ++m) {
      double acc = 0;
      for (int j = 1; j < m; ++j) acc += g[size_t(j)] * mass[size_t(m - j)];
      h[size_t(m)] = acc;
    }
    g.swap(h);
  }
  double p = 0;
  for (int m = 1; m <= n; ++m) p += g[size_t(m)];
  return p;
}

int RenewalLaw::sample(SeqRng& rng) const {
  double x = rng.uniform();
  auto it = std::lower_bound(cum.begin() + 1, cum.end(), x);
  return int(it - cum.begin());
}

std::vector<double> renewal_subset_sums(int n, int kmax) {
  if (n < 1 || kmax < 0) throw std::invalid_argument("renewal_subset_sums");
  std::vector<double> u(size_t(n) + 1, 0.0);
  for (int j = 1; j <= n; ++j) u[size_t(j)] = polymer2d::return_mass(j);
  std::vector<double> b{1.0};
  std::vector<double> g = u;  // g_1(m) = u(m)
  for (int k = 1; k <= kmax; ++k) {
    double s = 0;
    for (int m = 1; m <= n; ++m) s += g[size_t(m)];
    b.push_back(s);
    if (k == kmax) break;
    std::vector<double> h(size_t(n) + 1, 0.0);
    for (int m = 2; m <= n; ++m) {
      double acc = 0;
      for (int j = 1; j < m; ++j) acc += g[size_t(j)] * u[size_t(m - j)];
      h[size_t(m)] = acc;
    }
    g.swap(h);
  }
  return b;
}

// ---------------------------------------------------------- Laplace overlap
LaplaceResult laplace_overlap(double lambda, double tail_tol) {
  if (!(lambda > 0))
    throw std::domain_error("laplace_overlap: lambda must be positive");
  LaplaceResult res;
  double geo = 1.0 / (1.0 - std::exp(-lambda));
  for (int64_t n = 1;; ++n) {
    double term = std::exp(-lambda * double(n)) * return_mass(n);
    res.value += term;
    res.n_terms = n;
    // u decreasing => remainder <= u(n+1) e^{-lambda(n+1)} / (1 - e^{-lambda})
    res.tail_bound =
        return_mass(n + 1) * std::exp(-lambda * double(n + 1)) * geo;
    if (res.tail_bound < tail_tol) break;
    if (n > 100000000) throw std::runtime_error("laplace_overlap: no converge");
  }
  return res;
}

// ------------------------------------------------------------------ Dickman
double dickman_density(double t) {
  if (!(t > 0.0) || t > 1.0)
    throw std::domain_error("dickman_density: t must be in (0,1]");
  auto f = [t](double s) {
    if (s <= 0.0) return 0.0;
    return std::exp(std::log(s) + (s - 1.0) * std::log(t) - kEulerGamma * s -
                    std::lgamma(s + 1.0));
  };
  // tail beyond s=50 is below 1e-70/t (Stirling), ignored
  return integrate(f, 0.0, 1.0, 1e-12) + integrate(f, 1.0, 50.0, 1e-12);
}

double dickman_laplace(double lambda) {
  if (!(lambda >= 0)) throw std::domain_error("dickman_laplace: lambda >= 0");
  // Swap the order of integration in \int_0^1 G_0(t) e^{-lambda t} dt:
  // the inner \int_0^1 t^{s-1} e^{-lambda t} dt equals lambda^{-s} gamma(s,
  // lambda) and the prefactors cancel, leaving one smooth integral in s.
  if (lambda == 0.0) {
    auto f0 = [](double s) {
      return std::exp(-kEulerGamma * s - std::lgamma(s + 1.0));
    };
    return integrate(f0, 0.0, 1.0, 1e-10) + integrate(f0, 1.0, 60.0, 1e-10);
  }
  const double c = kEulerGamma + std::log(lambda);
  auto f = [lambda, c](double s) {
    if (s <= 0.0) return 1.0;  // continuous limit e^0 * P(0+, lambda)
    return std::exp(-c * s) * boost::math::gamma_p(s, lambda);
  };
  return integrate(f, 0.0, 1.0, 1e-10) + integrate(f, 1.0, 60.0, 1e-10);
}

// ---------------------------------------------------------------- CSV dump
void export_overlap_csv(const std::string& path, int n) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_overlap_csv: cannot open " + path);
  out << "n,u_n,R_n\n";
  char buf[128];
  for (int m = 1; m <= n; ++m) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", m, return_mass(m),
                  overlap_sum(m));
    out << buf;
  }
}

}  // namespace polymer2d
