#include "polymer2d/field.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace polymer2d {

MassFunction MassFunction::delta(int x1, int x2) {
  MassFunction f;
  f.sites.push_back({x1, x2});
  f.w.push_back(1.0);
  return f;
}

MassFunction MassFunction::uniform_ball(double r) {
  if (!(r >= 0)) throw std::invalid_argument("uniform_ball: radius must be >= 0");
  MassFunction f;
  f.kind = Kind::ball;
  f.radius = r;
  const int R = static_cast<int>(std::floor(r));
  for (int x1 = -R; x1 <= R; ++x1)
    for (int x2 = -R; x2 <= R; ++x2)
      if (((x1 + x2) & 1) == 0 &&
          static_cast<double>(x1) * x1 + static_cast<double>(x2) * x2 <= r * r)
        f.sites.push_back({x1, x2});
  if (f.sites.empty()) throw std::invalid_argument("uniform_ball: empty ball");
  f.w.assign(f.sites.size(), 1.0 / static_cast<double>(f.sites.size()));
  return f;
}

void MassFunction::validate() const {
  if (sites.empty() || sites.size() != w.size())
    throw std::invalid_argument("mass function: empty or mismatched support");
  const int par = ((sites[0][0] + sites[0][1]) % 2 + 2) % 2;
  double tot = 0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (!(w[i] >= 0) || !std::isfinite(w[i]))
      throw std::invalid_argument("mass function: weights must be finite and >= 0");
    if ((((sites[i][0] + sites[i][1]) % 2 + 2) % 2) != par)
      throw std::invalid_argument("mass function: support must sit on one parity class");
    tot += w[i];
  }
  if (!(tot > 0)) throw std::invalid_argument("mass function: total mass must be positive");
}

double MassFunction::total() const {
  double t = 0;
  for (double x : w) t += x;
  return t;
}

int MassFunction::parity() const {
  return ((sites.at(0)[0] + sites.at(0)[1]) % 2 + 2) % 2;
}

void MassFunction::bounds(int& u_min, int& u_max, int& v_min, int& v_max) const {
  u_min = v_min = 1 << 30;
  u_max = v_max = -(1 << 30);
  for (const auto& s : sites) {
    const int u = s[0] + s[1], v = s[0] - s[1];
    u_min = std::min(u_min, u);
    u_max = std::max(u_max, u);
    v_min = std::min(v_min, v);
    v_max = std::max(v_max, v);
  }
}

std::size_t DiamondField::idx(int n, int x1, int x2) const {
  if (n < 1 || n > n_) throw std::out_of_range("field: time outside [1, N]");
  const int u = x1 + x2, v = x1 - x2, r = n + r0_;
  if (std::abs(x1) + std::abs(x2) > r || ((u + n) & 1))
    throw std::out_of_range("field: site outside cone");
  const std::size_t side = static_cast<std::size_t>(r) + 1;
  return static_cast<std::size_t>((u + r) / 2) * side +
         static_cast<std::size_t>((v + r) / 2);
}

bool DiamondField::in_cone(int n, int x1, int x2) const {
  return n >= 1 && n <= n_ && std::abs(x1) + std::abs(x2) <= n + r0_ &&
         (((x1 + x2 + n) & 1) == 0);
}

double DiamondField::omega(int n, int x1, int x2) const {
  return slices_[static_cast<std::size_t>(n) - 1][idx(n, x1, x2)];
}

void DiamondField::set(int n, int x1, int x2, double val) {
  slices_[static_cast<std::size_t>(n) - 1][idx(n, x1, x2)] = val;
}

DiamondField DiamondField::zeros(int N, int r0, std::size_t mem_cap_bytes) {
  if (N < 1 || r0 < 0) throw std::invalid_argument("field: need N >= 1, r0 >= 0");
  std::size_t bytes = 0;
  for (int n = 1; n <= N; ++n) {
    const std::size_t side = static_cast<std::size_t>(n + r0) + 1;
    bytes += side * side * sizeof(double);
  }
  if (bytes > mem_cap_bytes) throw std::length_error("field too large to materialize");
  DiamondField f;
  f.n_ = N;
  f.r0_ = r0;
  f.slices_.resize(static_cast<std::size_t>(N));
  for (int n = 1; n <= N; ++n) {
    const std::size_t side = static_cast<std::size_t>(n + r0) + 1;
    f.slices_[static_cast<std::size_t>(n) - 1].assign(side * side, 0.0);
  }
  return f;
}

DiamondField DiamondField::sample(const DisorderModel& m, int N, int r0,
                                  uint64_t seed, uint64_t replica,
                                  std::size_t mem_cap_bytes) {
  DiamondField f = zeros(N, r0, mem_cap_bytes);
  const CellRng rng{seed, replica};
  for (int n = 1; n <= N; ++n) {
    const uint64_t k0 = rng.slice_key(n, kSaltOmega0);
    const uint64_t k1 = rng.slice_key(n, kSaltOmega1);
    const int r = n + r0;
    for (int u = -r; u <= r; u += 2) {
      // v runs over the same parity class as u
      for (int v = -r; v <= r; v += 2) {
        const int x1 = (u + v) / 2, x2 = (u - v) / 2;
        const uint64_t key = pack_xy(x1, x2);
        f.set(n, x1, x2, m.sample(mix64(k0 ^ key), mix64(k1 ^ key)));
      }
    }
  }
  return f;
}

void DiamondField::export_csv(const std::string& path) const {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + path);
  std::fprintf(fp, "n,x1,x2,omega\n");
  for (int n = 1; n <= n_; ++n) {
    const int r = n + r0_;
    for (int u = -r; u <= r; u += 2)
      for (int v = -r; v <= r; v += 2) {
        const int x1 = (u + v) / 2, x2 = (u - v) / 2;
        std::fprintf(fp, "%d,%d,%d,%.17g\n", n, x1, x2, omega(n, x1, x2));
      }
  }
  std::fclose(fp);
}

double LazyField::omega(int n, int x1, int x2) const {
  const uint64_t k0 = rng.slice_key(n, kSaltOmega0);
  const uint64_t k1 = rng.slice_key(n, kSaltOmega1);
  const uint64_t key = pack_xy(x1, x2);
  const uint64_t b1 = mix64(k0 ^ key), b2 = mix64(k1 ^ key);
  if (tilt && n >= 0 && n <= tilt->len() && tilt->pos[static_cast<std::size_t>(n)][0] == x1 &&
      tilt->pos[static_cast<std::size_t>(n)][1] == x2)
    return model->tilted_sample(beta, b1, b2);
  return model->sample(b1, b2);
}

}  // namespace polymer2d
