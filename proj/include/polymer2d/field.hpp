#pragma once
// Environment fields on the space-time cone and finitely supported initial
// mass functions. A field is a pure function of (seed, replica, n, x); the
// materialized and lazy views agree cell for cell.
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "polymer2d/disorder.hpp"
#include "polymer2d/rng.hpp"

namespace polymer2d {

// cell-bit salts: two words per site feed the disorder transforms
inline constexpr uint32_t kSaltOmega0 = 0;
inline constexpr uint32_t kSaltOmega1 = 1;
// sequential streams
inline constexpr uint32_t kSaltPath = 100;
inline constexpr uint32_t kSaltRenewal = 200;
inline constexpr uint32_t kSaltEstimator = 300;

// nonnegative mass on lattice sites of one parity (x1 + x2 constant mod 2)
struct MassFunction {
  enum class Kind { generic, ball };
  std::vector<std::array<int, 2>> sites;
  std::vector<double> w;
  Kind kind = Kind::generic;
  double radius = 0;  // Kind::ball only

  static MassFunction delta(int x1, int x2);
  // normalized indicator of even sites with |x|_2 <= r
  static MassFunction uniform_ball(double r);

  void validate() const;  // nonempty, finite w >= 0, total > 0, one parity
  double total() const;
  int parity() const;  // (x1 + x2) mod 2, common to all sites
  // rotated-coordinate support bounds (u = x1 + x2, v = x1 - x2)
  void bounds(int& u_min, int& u_max, int& v_min, int& v_max) const;
  std::size_t size() const { return sites.size(); }
};

// a nearest-neighbour path S_0..S_N (pos[n] = S_n)
struct Path {
  std::vector<std::array<int, 2>> pos;
  int len() const { return static_cast<int>(pos.size()) - 1; }
};

// materialized field on the cone |x - x0|_1 <= n + r0 around the origin,
// times 1..N; rotated-compressed storage
class DiamondField {
 public:
  static DiamondField sample(const DisorderModel& m, int N, int r0,
                             uint64_t seed, uint64_t replica,
                             std::size_t mem_cap_bytes = std::size_t{1} << 29);
  static DiamondField zeros(int N, int r0,
                            std::size_t mem_cap_bytes = std::size_t{1} << 29);

  int horizon() const { return n_; }
  int base_radius() const { return r0_; }
  bool in_cone(int n, int x1, int x2) const;
  double omega(int n, int x1, int x2) const;     // throws outside cone
  void set(int n, int x1, int x2, double val);   // for constructed test fields
  void export_csv(const std::string& path) const;  // n,x1,x2,omega

 private:
  DiamondField() = default;
  std::size_t idx(int n, int x1, int x2) const;  // throws outside cone
  int n_ = 0, r0_ = 0;
  std::vector<std::vector<double>> slices_;  // [n-1], (n+r0+1)^2 row-major
};

// counter-based view; with `tilt` set, cells on the path are replaced by
// draws from the exponentially tilted law (shared uniforms)
struct LazyField {
  const DisorderModel* model = nullptr;
  CellRng rng{0, 0};
  double beta = 0;
  const Path* tilt = nullptr;

  double omega(int n, int x1, int x2) const;
};

}  // namespace polymer2d
