#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "liflow/point_cloud.hpp"

namespace liflow {

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = std::numeric_limits<double>::infinity();
};

/// Exact single-nearest-neighbor search over a static 3-D point set.
///
/// Equidistant candidates resolve to the lowest point index, which makes the
/// result identical to an exhaustive scan. Sets smaller than
/// `kExhaustiveBelow` skip the tree entirely. The tree keeps a view of the
/// points, so the referenced storage must outlive it.
class KdTree {
 public:
  static constexpr std::size_t kExhaustiveBelow = 32;
  static constexpr std::size_t kLeafSize = 12;

  explicit KdTree(std::span<const Vec3> points) : points_(points) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (points_.size() >= kExhaustiveBelow) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 1);
      build(0, points_.size());
    }
  }

  std::size_t size() const { return points_.size(); }

  Neighbor nearest(const Vec3& query) const {
    Neighbor best;
    if (nodes_.empty()) {
      scan(0, points_.size(), query, best);
    } else {
      search(0, query, best);
    }
    return best;
  }

 private:
  struct Node {
    // Leaves: [begin, end) into order_. Inner: split on `axis` at `split`.
    std::size_t begin = 0;
    std::size_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Vec3 lo = points_[order_[begin]];
    Vec3 hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3& p = points_[order_[i]];
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const Vec3 spread = hi - lo;
    std::uint8_t axis = 0;
    if (spread.y > spread[axis]) axis = 1;
    if (spread.z > spread[axis]) axis = 2;
    if (spread[axis] == 0.0) return id;  // all coincident: keep as leaf

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       return points_[a][axis] < points_[b][axis];
                     });
    const double split = points_[order_[mid]][axis];

    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.left = left;
    node.right = right;
    node.axis = axis;
    node.split = split;
    return id;
  }

  void scan(std::size_t begin, std::size_t end, const Vec3& query,
            Neighbor& best) const {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t idx = order_[i];
      const double d2 = squared_distance(query, points_[idx]);
      if (d2 < best.squared_distance ||
          (d2 == best.squared_distance && idx < best.index)) {
        best = {idx, d2};
      }
    }
  }

  void search(std::int32_t id, const Vec3& query, Neighbor& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.left < 0) {
      scan(node.begin, node.end, query, best);
      return;
    }
    // Left holds coordinates <= split, right holds >= split.
    const double diff = query[node.axis] - node.split;
    const std::int32_t near = diff <= 0.0 ? node.left : node.right;
    const std::int32_t far = diff <= 0.0 ? node.right : node.left;
    search(near, query, best);
    // Non-strict test keeps equidistant candidates reachable for tie-breaking.
    if (diff * diff <= best.squared_distance) search(far, query, best);
  }

  std::span<const Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace liflow
