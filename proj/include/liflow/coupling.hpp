#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "liflow/geometry.hpp"
#include "liflow/point_cloud.hpp"

namespace liflow {

using Rng = std::mt19937_64;

/// splitmix64 mixing of (base, index); independent child seeds for cases,
/// workers and steps.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Per-axis Gaussian offset applied to the replicated scan.
struct NoiseConfig {
  double scale = 1.0;  // meters, standard deviation per axis
  std::uint64_t seed = 0;
};

/// Network conditioning: either a scan or the null token.
///
/// Holds a non-owning pointer; the scan must outlive the condition.
class Condition {
 public:
  static Condition null() { return Condition{}; }
  static Condition of(const PointCloud& scan) { return Condition{&scan}; }

  bool is_null() const { return scan_ == nullptr; }
  const PointCloud& scan() const { return *scan_; }

 private:
  Condition() = default;
  explicit Condition(const PointCloud* scan) : scan_(scan) {}
  const PointCloud* scan_ = nullptr;
};

struct ConditionDraw {
  double keep_probability = 1.0;
  Condition outcome = Condition::null();
};

/// One training tuple along the nearest-neighbor path.
struct FlowSample {
  double t = 0.0;
  PointCloud x0;
  PointCloud x_t;
  VectorList v_target;
  CorrespondenceMap map;  // x0[i] flows to x1[map[i]]
  PointCloud x1;
  Condition condition = Condition::null();
};

/// Replicates the scan `k` times and adds an independent N(0, scale^2)
/// offset to every coordinate. A zero scale draws nothing from `rng`.
inline PointCloud init_noisy(const PointCloud& scan, std::size_t k, double scale,
                             Rng& rng) {
  require(!scan.empty(), "empty scan");
  require(scale >= 0.0 && std::isfinite(scale), "noise scale must be >= 0");
  PointCloud out = concat_k(scan, k);
  if (scale == 0.0) return out;
  std::normal_distribution<double> gauss(0.0, scale);
  for (auto& p : out.mutable_points()) {
    p.x += gauss(rng);
    p.y += gauss(rng);
    p.z += gauss(rng);
  }
  return out;
}

inline PointCloud init_noisy(const PointCloud& scan, std::size_t k,
                             const NoiseConfig& noise) {
  Rng rng(noise.seed);
  return init_noisy(scan, k, noise.scale, rng);
}

/// Straight-line path between two points: (t*x1 + (1-t)*x0, x1 - x0).
inline std::pair<Vec3, Vec3> ot_flow(const Vec3& x0, const Vec3& x1, double t) {
  require(t >= 0.0 && t <= 1.0, "time outside [0, 1]");
  return {t * x1 + (1.0 - t) * x0, x1 - x0};
}

/// Builds the point-wise flow from x0 towards the nearest neighbors of its
/// points in x1. The path is deterministic (no smoothing variance).
inline FlowSample nn_flow(const PointCloud& x0, const PointCloud& x1, double t,
                          Condition condition = Condition::null()) {
  require(!x0.empty(), "empty source cloud");
  require(t >= 0.0 && t <= 1.0, "time outside [0, 1]");
  FlowSample s;
  s.t = t;
  s.map = nearest_neighbor_map(x0, x1);
  s.x0 = x0;
  s.x1 = x1;
  s.condition = condition;
  s.x_t.reserve(x0.size());
  s.v_target.reserve(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    auto [xt, v] = ot_flow(x0[i], x1[s.map[i]], t);
    s.x_t.push_back(xt);
    s.v_target.push_back(v);
  }
  return s;
}

inline double sample_time(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Drops the scan with probability `p_null` (classifier-free training).
inline ConditionDraw draw_condition(const PointCloud& scan, double p_null, Rng& rng) {
  require(p_null >= 0.0 && p_null <= 1.0, "null probability outside [0, 1]");
  const bool drop = std::bernoulli_distribution(p_null)(rng);
  return {1.0 - p_null, drop ? Condition::null() : Condition::of(scan)};
}

}  // namespace liflow
