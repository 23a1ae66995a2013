#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "liflow/kdtree.hpp"
#include "liflow/point_cloud.hpp"

namespace liflow {

/// For every source point, the index of its closest target point
/// (lowest index on ties).
inline CorrespondenceMap nearest_neighbor_map(const PointCloud& source,
                                              const PointCloud& target) {
  require(!target.empty(), "empty target cloud");
  const KdTree tree(target.points());
  CorrespondenceMap map(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    map[i] = tree.nearest(source[i]).index;
  }
  return map;
}

namespace detail {

// Per-point squared distance from every point of `from` to its NN in `to`.
inline std::vector<double> nn_squared_distances(const PointCloud& from,
                                                const PointCloud& to) {
  const KdTree tree(to.points());
  std::vector<double> d2(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) {
    d2[i] = tree.nearest(from[i]).squared_distance;
  }
  return d2;
}

}  // namespace detail

/// Chamfer distance as a plain sum of squared nearest-neighbor distances in
/// both directions. Summation runs in point order, so the result does not
/// depend on scheduling.
inline double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  require(!a.empty() && !b.empty(), "empty cloud in chamfer");
  // Each direction is summed on its own so that CD(a, b) == CD(b, a) exactly.
  double ab = 0.0, ba = 0.0;
  for (double d2 : detail::nn_squared_distances(a, b)) ab += d2;
  for (double d2 : detail::nn_squared_distances(b, a)) ba += d2;
  return ab + ba;
}

/// Reporting form of the Chamfer distance, in meters: the mean (unsquared)
/// nearest-neighbor distance of each direction, averaged over both
/// directions.
inline double chamfer_distance_mean(const PointCloud& a, const PointCloud& b) {
  require(!a.empty() && !b.empty(), "empty cloud in chamfer");
  auto mean_distance = [](const std::vector<double>& d2) {
    double sum = 0.0;
    for (double v : d2) sum += std::sqrt(v);
    return sum / static_cast<double>(d2.size());
  };
  return 0.5 * (mean_distance(detail::nn_squared_distances(a, b)) +
                mean_distance(detail::nn_squared_distances(b, a)));
}

/// Farthest point sampling starting from a fixed index. Returns indices into
/// `cloud` in selection order; ties pick the lowest index.
inline std::vector<std::size_t> farthest_point_indices(const PointCloud& cloud,
                                                       std::size_t n,
                                                       std::size_t first) {
  require(!cloud.empty(), "empty cloud in farthest point sampling");
  require(n <= cloud.size(), "sample size exceeds cloud");
  require(first < cloud.size(), "first index out of range");
  std::vector<std::size_t> picked;
  picked.reserve(n);
  if (n == 0) return picked;

  std::vector<double> min_d2(cloud.size(), std::numeric_limits<double>::infinity());
  std::size_t current = first;
  for (std::size_t k = 0; k < n; ++k) {
    picked.push_back(current);
    min_d2[current] = -1.0;  // never re-selected
    std::size_t next = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (min_d2[i] < 0.0) continue;
      min_d2[i] = std::min(min_d2[i], squared_distance(cloud[i], cloud[current]));
      if (min_d2[i] > best) {
        best = min_d2[i];
        next = i;
      }
    }
    current = next;
  }
  return picked;
}

/// Farthest point sampling with a seeded uniform draw for the first point.
inline PointCloud farthest_point_sample(const PointCloud& cloud, std::size_t n,
                                        std::uint64_t seed) {
  require(!cloud.empty(), "empty cloud in farthest point sampling");
  require(n <= cloud.size(), "sample size exceeds cloud");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
  PointCloud out;
  out.reserve(n);
  for (std::size_t i : farthest_point_indices(cloud, n, pick(rng))) {
    out.push_back(cloud[i]);
  }
  return out;
}

/// Replicates the scan `k` times block-wise: point i*|scan|+j is scan[j].
inline PointCloud concat_k(const PointCloud& scan, std::size_t k) {
  require(k >= 1, "concatenation count must be >= 1");
  PointCloud out;
  out.reserve(k * scan.size());
  for (std::size_t rep = 0; rep < k; ++rep) {
    for (const auto& p : scan) out.push_back(p);
  }
  return out;
}

struct VoxelCell {
  std::int64_t i = 0;
  std::int64_t j = 0;
  std::int64_t k = 0;
  friend auto operator<=>(const VoxelCell&, const VoxelCell&) = default;
};

/// Occupied cells of a regular grid. `occupied` is sorted and duplicate-free.
struct VoxelSet {
  double resolution = 0.0;
  Vec3 origin;
  std::vector<VoxelCell> occupied;

  std::size_t size() const { return occupied.size(); }
  bool contains(const VoxelCell& c) const {
    return std::binary_search(occupied.begin(), occupied.end(), c);
  }
};

inline VoxelCell voxel_of(const Vec3& p, double resolution, const Vec3& origin) {
  return {static_cast<std::int64_t>(std::floor((p.x - origin.x) / resolution)),
          static_cast<std::int64_t>(std::floor((p.y - origin.y) / resolution)),
          static_cast<std::int64_t>(std::floor((p.z - origin.z) / resolution))};
}

inline VoxelSet voxelize(const PointCloud& cloud, double resolution,
                         const Vec3& origin = {}) {
  require(resolution > 0.0 && std::isfinite(resolution),
          "voxel resolution must be positive");
  VoxelSet set{resolution, origin, {}};
  set.occupied.reserve(cloud.size());
  for (const auto& p : cloud) set.occupied.push_back(voxel_of(p, resolution, origin));
  std::sort(set.occupied.begin(), set.occupied.end());
  set.occupied.erase(std::unique(set.occupied.begin(), set.occupied.end()),
                     set.occupied.end());
  return set;
}

/// Axis-aligned rectangle in the x/y plane; the upper bounds are exclusive.
struct Extent2D {
  double xmin = -50.0;
  double xmax = 50.0;
  double ymin = -50.0;
  double ymax = 50.0;

  bool contains(double x, double y) const {
    return x >= xmin && x < xmax && y >= ymin && y < ymax;
  }
};

/// Bird's-eye-view point counts; counts are row-major with x as the row.
struct BevHistogram {
  double resolution = 0.0;
  Extent2D extent;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t dropped = 0;

  std::uint64_t at(std::size_t ix, std::size_t iy) const { return counts[ix * ny + iy]; }
  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (auto c : counts) sum += c;
    return sum;
  }
};

inline BevHistogram bev_histogram(const PointCloud& cloud, double resolution,
                                  const Extent2D& extent) {
  require(resolution > 0.0 && std::isfinite(resolution),
          "BEV resolution must be positive");
  require(extent.xmax > extent.xmin && extent.ymax > extent.ymin,
          "degenerate BEV extent");
  BevHistogram h;
  h.resolution = resolution;
  h.extent = extent;
  h.nx = static_cast<std::size_t>(std::ceil((extent.xmax - extent.xmin) / resolution));
  h.ny = static_cast<std::size_t>(std::ceil((extent.ymax - extent.ymin) / resolution));
  h.counts.assign(h.nx * h.ny, 0);
  for (const auto& p : cloud) {
    if (!extent.contains(p.x, p.y)) {
      ++h.dropped;
      continue;
    }
    auto ix = static_cast<std::size_t>(std::floor((p.x - extent.xmin) / resolution));
    auto iy = static_cast<std::size_t>(std::floor((p.y - extent.ymin) / resolution));
    ix = std::min(ix, h.nx - 1);
    iy = std::min(iy, h.ny - 1);
    ++h.counts[ix * h.ny + iy];
  }
  return h;
}

}  // namespace liflow
