#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace liflow {

/// Raised for violated preconditions and malformed inputs.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  constexpr double operator[](std::size_t axis) const {
    return axis == 0 ? x : (axis == 1 ? y : z);
  }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }

constexpr double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Every distance comparison in the library goes through this one expression
// so that accelerated and exhaustive searches agree bit-for-bit.
constexpr double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Per-point 3-vectors (velocities, displacements, gradients).
using VectorList = std::vector<Vec3>;

/// Ordered list of 3-D points in meters.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> points) : points_(std::move(points)) {}
  PointCloud(std::initializer_list<Vec3> points) : points_(points) {}

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  const Vec3& operator[](std::size_t i) const { return points_[i]; }
  Vec3& operator[](std::size_t i) { return points_[i]; }

  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }
  auto begin() { return points_.begin(); }
  auto end() { return points_.end(); }

  void reserve(std::size_t n) { points_.reserve(n); }
  void push_back(const Vec3& p) { points_.push_back(p); }

  std::span<const Vec3> points() const { return points_; }
  std::vector<Vec3>& mutable_points() { return points_; }

  bool all_finite() const {
    for (const auto& p : points_) {
      if (!is_finite(p)) return false;
    }
    return true;
  }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<Vec3> points_;
};

/// Index into the target cloud for every source point.
using CorrespondenceMap = std::vector<std::size_t>;

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace liflow
