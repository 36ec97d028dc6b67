#pragma once
// Replica-parallel Monte Carlo estimators: truncated means, fractional
// moments, free energy, the finite-volume half-moment criterion, coarse
// skeleton weights Q(y), and the total-variation identity. Every estimator
// is deterministic in (seed, config) independent of the worker count.
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "polymer2d/engine.hpp"

namespace polymer2d {

struct CheckResult {
  std::string name;
  bool pass = false;
  double margin = 0;  // signed slack in units natural to the check
};

struct McSummary {
  std::string name;
  std::string config_digest;
  uint64_t seed = 0;
  long reps = 0;
  double estimate = 0;
  double stderr_ = 0;
  std::vector<CheckResult> checks;
  std::vector<double> blocks;  // per-block means of the primary statistic
  bool all_pass() const;
};

void write_summary_json(const McSummary& s, const std::string& path);
void write_blocks_csv(const McSummary& s, const std::string& path);

// E[Z_N(f) /\ 1]; audited against the exact-second-moment lower bound
McSummary truncated_mean(const DisorderModel& m, int N, double beta,
                         const MassFunction& f, long reps, uint64_t seed,
                         const DpOpts& opts = {});

// E[Z_N(f)^gamma], gamma in [0,1]; batch-level half-moment sandwich audit
McSummary fractional_moment(const DisorderModel& m, int N, double beta,
                            const MassFunction& f, double gamma, long reps,
                            uint64_t seed, const DpOpts& opts = {});

struct FreeEnergyReport {
  std::vector<int> n_grid;
  std::vector<double> fhat;  // E[log Z_N]/N per grid point
  std::vector<double> se;
  double f_extrapolated = 0;  // largest-N value (one-sided lower bound)
  double f_se = 0;
  double finite_size_band = 0;  // gap to the previous grid point + 3 se
  long reps = 0;
  uint64_t seed = 0;
  std::vector<CheckResult> checks;
  bool all_pass() const;
};
FreeEnergyReport free_energy(const DisorderModel& m, double beta,
                             const std::vector<int>& n_grid, long reps,
                             uint64_t seed, const DpOpts& opts = {});

struct FiniteVolumeReport {
  int L = 0;
  double beta = 0;
  // grid-sup lower bound of sup_f E[Z_L(f)^{1/2}] over Dirac starts in
  // B(sqrt L) plus the uniform start
  double sup_half_moment = 0;
  double sup_se = 0;
  std::array<int, 2> arg_start{0, 0};
  bool uniform_is_max = false;
  bool criterion = false;  // sup + 3 se <= 1/300
  std::vector<int> m_list;
  std::vector<double> decay;     // E[Z_{mL}(delta at arg_start)^{1/2}]
  std::vector<double> decay_se;
  std::vector<CheckResult> checks;
  long reps = 0;
  uint64_t seed = 0;
  bool all_pass() const;
};
FiniteVolumeReport finite_volume_criterion(const DisorderModel& m, int L,
                                           double beta, long reps,
                                           const std::vector<int>& m_list,
                                           uint64_t seed,
                                           const DpOpts& opts = {});

// Q(y): max over Dirac starts on a grid in B(0, sqrt(N0)/2) and the uniform
// start of E[Z_{0,N0}(f; B(y sqrt(N0), sqrt(N0)/2))^{1/2}]
McSummary skeleton_q(const DisorderModel& m, int N0, double beta,
                     std::array<int, 2> y, long reps, uint64_t seed,
                     const DpOpts& opts = {});

struct SkeletonTable {
  int N0 = 0;
  double beta = 0;
  std::vector<std::array<int, 2>> ys;
  std::vector<double> q, q_se;
  double sum_q = 0;     // over the requested ys
  double sum_q_se = 0;
  std::vector<CheckResult> checks;
  long reps = 0;
  uint64_t seed = 0;
};
// batch evaluation over a list of block indices y (tail certificates checked
// for |y|_1 >= 4)
SkeletonTable skeleton_q_table(const DisorderModel& m, int N0, double beta,
                               const std::vector<std::array<int, 2>>& ys,
                               long reps, uint64_t seed,
                               const DpOpts& opts = {});

struct TvReport {
  McSummary route1;  // E[Z /\ 1]
  double p_ge = 0, p_ge_se = 0;    // P(Z >= 1) under the plain law
  double pt_lt = 0, pt_lt_se = 0;  // P~(Z < 1) under size-biased sampling
  double route2 = 0, route2_se = 0;
  std::vector<CheckResult> checks;
  long reps = 0;
  uint64_t seed = 0;
  bool all_pass() const;
};
// the identity E[Z /\ 1] = 1 - d_TV(P, P~) estimated two ways, with
// change-of-measure audits E[Z /\ K] <= K P(Z>=1) + E~[Z 1_{Z<1}], K = 1, 2
TvReport sizebias_tv(const DisorderModel& m, int N, double beta,
                     const MassFunction& f, long reps, uint64_t seed,
                     const DpOpts& opts = {});

// change-of-scale audit: S(4A) <= 4 S(A) + 3 se, where S(L) is the Dirac-grid
// sup of E[Z_L(delta_x)^{1/2}] over B(sqrt L)
McSummary change_of_scale_audit(const DisorderModel& m, int A, double beta,
                                long reps, uint64_t seed,
                                const DpOpts& opts = {});

}  // namespace polymer2d
