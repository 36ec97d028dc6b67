#pragma once
// Small numeric utilities: adaptive quadrature, 1D walk kernels, summary stats.
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace polymer2d {

inline constexpr double kEulerGamma = 0.57721566490153286061;
inline constexpr double kPi = 3.14159265358979323846;

// adaptive Simpson to absolute tolerance tol on [a,b]
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol);

// 1D SRW kernel p_n(k) = 2^{-n} binom(n,(n+k)/2); 0 on parity mismatch.
double srw_p1(int64_t n, int64_t k);

// mean / sample variance
struct MeanVar {
  double mean = 0, var = 0;  // var with 1/(R-1)
  long n = 0;
};
MeanVar mean_var(const std::vector<double>& xs);

// Delete-one-block jackknife for a statistic phi computed from per-replica
// rows. blocks of fixed size; trailing partial block folded into the last.
struct Jackknife {
  double estimate = 0, stderr_ = 0;
  int blocks = 0;
};
Jackknife jackknife_blocks(
    const std::vector<std::vector<double>>& rows, size_t block,
    const std::function<double(const std::vector<double>&, long)>& phi);

// block means over blocks of `block` replicas (for CSV dumps)
std::vector<double> block_means(const std::vector<double>& xs, size_t block);

// Runs fn(rep) for rep = 0..reps-1 across POLYMER2D_WORKERS threads (default:
// hardware concurrency). Worker w handles rep = w mod T; results land in a
// vector indexed by rep, so the outcome is identical for every worker count.
std::vector<std::vector<double>> parallel_replicas(
    long reps, const std::function<std::vector<double>(long)>& fn);

}  // namespace polymer2d
