#include "polymer2d/numerics.hpp"

#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace polymer2d {

namespace {
double simpson(double fa, double fm, double fb, double a, double b) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(const std::function<double(double)>& f, double a, double b,
             double fa, double fm, double fb, double whole, double tol,
             int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(fa, flm, fm, a, m);
  double right = simpson(fm, frm, fb, m, b);
  double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adapt(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1) +
         adapt(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1);
}
}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  if (!(a < b)) throw std::invalid_argument("integrate: empty interval");
  double m = 0.5 * (a + b);
  double fa = f(a), fm = f(m), fb = f(b);
  return adapt(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48);
}

double srw_p1(int64_t n, int64_t k) {
  if (n < 0) throw std::domain_error("srw_p1: n < 0");
  if (k < -n || k > n || ((n + k) & 1)) return 0.0;
  double h = double(n + k) / 2.0;
  return std::exp(std::lgamma(double(n) + 1.0) - std::lgamma(h + 1.0) -
                  std::lgamma(double(n) - h + 1.0) -
                  double(n) * 0.6931471805599453094);
}

MeanVar mean_var(const std::vector<double>& xs) {
  MeanVar s;
  s.n = long(xs.size());
  if (s.n == 0) return s;
  double m = 0;
  for (double x : xs) m += x;
  m /= double(s.n);
  double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  s.mean = m;
  s.var = s.n > 1 ? v / double(s.n - 1) : 0.0;
  return s;
}

Jackknife jackknife_blocks(
    const std::vector<std::vector<double>>& rows, size_t block,
    const std::function<double(const std::vector<double>&, long)>& phi) {
  Jackknife jk;
  size_t R = rows.size();
  if (R == 0) return jk;
  size_t m = rows[0].size();
  size_t nb = R / block;
  if (nb < 2) nb = 1;
  std::vector<double> total(m, 0.0);
  for (const auto& r : rows)
    for (size_t j = 0; j < m; ++j) total[j] += r[j];
  jk.estimate = phi(total, long(R));
  jk.blocks = int(nb);
  if (nb == 1) {  // fall back: stderr from per-replica spread of phi inputs
    jk.stderr_ = 0.0;
    return jk;
  }
  std::vector<double> loo(nb);
  double mean_loo = 0;
  for (size_t b = 0; b < nb; ++b) {
    size_t lo = b * block;
    size_t hi = (b + 1 == nb) ? R : lo + block;  // last block absorbs tail
    std::vector<double> t = total;
    long cnt = long(R - (hi - lo));
    for (size_t i = lo; i < hi; ++i)
      for (size_t j = 0; j < m; ++j) t[j] -= rows[i][j];
    loo[b] = phi(t, cnt);
    mean_loo += loo[b];
  }
  mean_loo /= double(nb);
  double s = 0;
  for (double v : loo) s += (v - mean_loo) * (v - mean_loo);
  jk.stderr_ = std::sqrt(double(nb - 1) / double(nb) * s);
  return jk;
}

std::vector<double> block_means(const std::vector<double>& xs, size_t block) {
  std::vector<double> out;
  for (size_t i = 0; i < xs.size(); i += block) {
    size_t hi = std::min(xs.size(), i + block);
    double m = 0;
    for (size_t j = i; j < hi; ++j) m += xs[j];
    out.push_back(m / double(hi - i));
  }
  return out;
}

static unsigned worker_count() {
  if (const char* s = std::getenv("POLYMER2D_WORKERS")) {
    long w = std::strtol(s, nullptr, 10);
    if (w >= 1 && w <= 4096) return unsigned(w);
  }
  unsigned h = std::thread::hardware_concurrency();
  return h ? h : 1;
}

std::vector<std::vector<double>> parallel_replicas(
    long reps, const std::function<std::vector<double>(long)>& fn) {
  if (reps <= 0) return {};
  const std::size_t nrows = static_cast<std::size_t>(reps);
  std::vector<std::vector<double>> rows(nrows);
  unsigned T = std::min<unsigned>(worker_count(), unsigned(reps));
  if (T <= 1) {
    for (long r = 0; r < reps; ++r) rows[size_t(r)] = fn(r);
    return rows;
  }
  std::vector<std::thread> pool;
  std::mutex err_mu;
  std::exception_ptr err;
  for (unsigned w = 0; w < T; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (long r = w; r < reps; r += T) rows[size_t(r)] = fn(r);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  return rows;
}

}  // namespace polymer2d
