#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "liflow/coupling.hpp"
#include "liflow/geometry.hpp"
#include "liflow/point_cloud.hpp"

namespace liflow {

/// Parallelogram spanned from `corner` by two orthogonal edges.
struct Rectangle {
  Vec3 corner;
  Vec3 edge_u;
  Vec3 edge_v;
};

/// Box resting on the ground (z = 0), rotated by `yaw` about the z axis.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double size_x = 1.0;
  double size_y = 1.0;
  double height = 1.0;
  double yaw = 0.0;
};

/// Vertical capped cylinder resting on the ground.
struct Cylinder {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.5;
  double height = 1.0;
};

using Primitive = std::variant<Rectangle, Box, Cylinder>;

struct SceneSpec {
  double ground_half_extent = 3.0;  // ground covers [-e, e]^2 at z = 0
  std::vector<Primitive> primitives;
  double density = 200.0;  // points per m^2
  std::uint64_t seed = 0;
};

struct ScanSpec {
  // 1.75 m keeps the floor, at z = -1.75 in the sensor frame, off the 0.5 m
  // and 0.1 m voxel boundaries.
  Vec3 origin{0.0, 0.0, 1.75};
  std::size_t azimuth_channels = 180;
  std::size_t elevation_channels = 16;
  double elevation_min_deg = -60.0;
  double elevation_max_deg = 5.0;
  double max_range = 6.0;
  double dropout = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(max_range > 0.0, "scan max range must be positive");
    require(azimuth_channels >= 1 && elevation_channels >= 1, "scan channels must be >= 1");
    require(dropout >= 0.0 && dropout <= 1.0, "dropout outside [0, 1]");
    require(elevation_max_deg >= elevation_min_deg, "elevation range is inverted");
  }
};

namespace detail {

inline Vec3 rotate_z(const Vec3& p, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

inline Rectangle ground_rectangle(double e) {
  return {{-e, -e, 0.0}, {2.0 * e, 0.0, 0.0}, {0.0, 2.0 * e, 0.0}};
}

inline void check_primitive(const Primitive& prim) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Rectangle>) {
          require(norm(cross(p.edge_u, p.edge_v)) > 0.0, "degenerate rectangle");
          require(std::abs(dot(p.edge_u, p.edge_v)) <= 1e-9 * norm(p.edge_u) * norm(p.edge_v),
                  "rectangle edges must be orthogonal");
        } else if constexpr (std::is_same_v<T, Box>) {
          require(p.size_x > 0.0 && p.size_y > 0.0 && p.height > 0.0, "degenerate box");
        } else {
          require(p.radius > 0.0 && p.height > 0.0, "degenerate cylinder");
        }
      },
      prim);
}

// Box footprint half sizes and the local frame.
inline Vec3 to_box_frame(const Box& b, const Vec3& p) {
  return rotate_z({p.x - b.cx, p.y - b.cy, p.z}, -b.yaw);
}

inline bool inside_footprint(const Primitive& prim, double x, double y) {
  if (const auto* b = std::get_if<Box>(&prim)) {
    const Vec3 q = to_box_frame(*b, {x, y, 0.0});
    return std::abs(q.x) < 0.5 * b->size_x && std::abs(q.y) < 0.5 * b->size_y;
  }
  if (const auto* c = std::get_if<Cylinder>(&prim)) {
    const double dx = x - c->cx, dy = y - c->cy;
    return dx * dx + dy * dy < c->radius * c->radius;
  }
  return false;
}

inline void sample_rectangle(const Rectangle& r, double density, Rng& rng, PointCloud& out) {
  const double area = norm(cross(r.edge_u, r.edge_v));
  const auto count = std::poisson_distribution<std::uint64_t>(area * density)(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::uint64_t i = 0; i < count; ++i) {
    const double a = unit(rng);
    const double b = unit(rng);
    out.push_back(r.corner + a * r.edge_u + b * r.edge_v);
  }
}

inline std::vector<Rectangle> box_faces(const Box& b) {
  // Top and four sides; the bottom face rests on the ground.
  const double hx = 0.5 * b.size_x, hy = 0.5 * b.size_y, h = b.height;
  const Vec3 c{b.cx, b.cy, 0.0};
  auto world = [&](const Vec3& local) { return c + rotate_z(local, b.yaw); };
  auto dir = [&](const Vec3& local) { return rotate_z(local, b.yaw); };
  return {
      {world({-hx, -hy, h}), dir({2 * hx, 0, 0}), dir({0, 2 * hy, 0})},
      {world({-hx, -hy, 0}), dir({2 * hx, 0, 0}), dir({0, 0, h})},
      {world({-hx, hy, 0}), dir({2 * hx, 0, 0}), dir({0, 0, h})},
      {world({-hx, -hy, 0}), dir({0, 2 * hy, 0}), dir({0, 0, h})},
      {world({hx, -hy, 0}), dir({0, 2 * hy, 0}), dir({0, 0, h})},
  };
}

inline void sample_cylinder(const Cylinder& c, double density, Rng& rng, PointCloud& out) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const auto side = std::poisson_distribution<std::uint64_t>(two_pi * c.radius * c.height * density)(rng);
  for (std::uint64_t i = 0; i < side; ++i) {
    const double th = two_pi * unit(rng);
    const double z = c.height * unit(rng);
    out.push_back({c.cx + c.radius * std::cos(th), c.cy + c.radius * std::sin(th), z});
  }
  const auto top = std::poisson_distribution<std::uint64_t>(std::numbers::pi * c.radius * c.radius * density)(rng);
  for (std::uint64_t i = 0; i < top; ++i) {
    const double th = two_pi * unit(rng);
    const double r = c.radius * std::sqrt(unit(rng));
    out.push_back({c.cx + r * std::cos(th), c.cy + r * std::sin(th), c.height});
  }
}

inline std::optional<double> intersect(const Rectangle& r, const Vec3& o, const Vec3& d) {
  const Vec3 n = cross(r.edge_u, r.edge_v);
  const double denom = dot(d, n);
  if (denom == 0.0) return std::nullopt;
  const double s = dot(r.corner - o, n) / denom;
  if (!(s > 0.0)) return std::nullopt;
  const Vec3 rel = o + s * d - r.corner;
  const double a = dot(rel, r.edge_u) / dot(r.edge_u, r.edge_u);
  const double b = dot(rel, r.edge_v) / dot(r.edge_v, r.edge_v);
  if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) return std::nullopt;
  return s;
}

inline std::optional<double> intersect(const Box& b, const Vec3& o, const Vec3& d) {
  const Vec3 lo_world = to_box_frame(b, o);
  const Vec3 ld = rotate_z(d, -b.yaw);
  const double lo[3] = {-0.5 * b.size_x, -0.5 * b.size_y, 0.0};
  const double hi[3] = {0.5 * b.size_x, 0.5 * b.size_y, b.height};
  double t_near = 0.0, t_far = std::numeric_limits<double>::infinity();
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const double oa = lo_world[axis], da = ld[axis];
    if (da == 0.0) {
      if (oa < lo[axis] || oa > hi[axis]) return std::nullopt;
      continue;
    }
    double t0 = (lo[axis] - oa) / da;
    double t1 = (hi[axis] - oa) / da;
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  if (!(t_near > 0.0)) return std::nullopt;  // sensor inside the box
  return t_near;
}

inline std::optional<double> intersect(const Cylinder& c, const Vec3& o, const Vec3& d) {
  std::optional<double> best;
  auto consider = [&](double s) {
    if (s > 0.0 && (!best || s < *best)) best = s;
  };
  const double ox = o.x - c.cx, oy = o.y - c.cy;
  const double a = d.x * d.x + d.y * d.y;
  if (a > 0.0) {
    const double bq = 2.0 * (ox * d.x + oy * d.y);
    const double cq = ox * ox + oy * oy - c.radius * c.radius;
    const double disc = bq * bq - 4.0 * a * cq;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double s : {(-bq - sq) / (2.0 * a), (-bq + sq) / (2.0 * a)}) {
        const double z = o.z + s * d.z;
        if (z >= 0.0 && z <= c.height) consider(s);
      }
    }
  }
  if (d.z != 0.0) {
    const double s = (c.height - o.z) / d.z;
    const double px = ox + s * d.x, py = oy + s * d.y;
    if (px * px + py * py <= c.radius * c.radius) consider(s);
  }
  return best;
}

}  // namespace detail

/// Distance from `p` to the surface of one primitive.
inline double surface_distance(const Primitive& prim, const Vec3& p) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Rectangle>) {
          const Vec3 rel = p - s.corner;
          const double a = std::clamp(dot(rel, s.edge_u) / dot(s.edge_u, s.edge_u), 0.0, 1.0);
          const double b = std::clamp(dot(rel, s.edge_v) / dot(s.edge_v, s.edge_v), 0.0, 1.0);
          return norm(p - (s.corner + a * s.edge_u + b * s.edge_v));
        } else if constexpr (std::is_same_v<T, Box>) {
          const Vec3 q = detail::to_box_frame(s, p);
          const Vec3 d{std::abs(q.x) - 0.5 * s.size_x, std::abs(q.y) - 0.5 * s.size_y,
                       std::abs(q.z - 0.5 * s.height) - 0.5 * s.height};
          const Vec3 outside{std::max(d.x, 0.0), std::max(d.y, 0.0), std::max(d.z, 0.0)};
          const double inside = std::min(std::max({d.x, d.y, d.z}), 0.0);
          return std::abs(norm(outside) + inside);
        } else {
          const double radial = std::hypot(p.x - s.cx, p.y - s.cy) - s.radius;
          const double axial = std::abs(p.z - 0.5 * s.height) - 0.5 * s.height;
          const double outside = std::hypot(std::max(radial, 0.0), std::max(axial, 0.0));
          const double inside = std::min(std::max(radial, axial), 0.0);
          return std::abs(outside + inside);
        }
      },
      prim);
}

/// All surfaces of the scene, the ground rectangle first.
inline std::vector<Primitive> scene_surfaces(const SceneSpec& spec) {
  std::vector<Primitive> all;
  all.emplace_back(detail::ground_rectangle(spec.ground_half_extent));
  all.insert(all.end(), spec.primitives.begin(), spec.primitives.end());
  return all;
}

inline void validate(const SceneSpec& spec) {
  require(spec.ground_half_extent > 0.0, "ground extent must be positive");
  require(spec.density > 0.0, "surface density must be positive");
  const double e = spec.ground_half_extent;
  for (const auto& prim : spec.primitives) {
    detail::check_primitive(prim);
    const bool inside = std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Rectangle>) {
            for (const Vec3& c : {s.corner, s.corner + s.edge_u, s.corner + s.edge_v,
                                  s.corner + s.edge_u + s.edge_v}) {
              if (std::abs(c.x) > e || std::abs(c.y) > e) return false;
            }
            return true;
          } else if constexpr (std::is_same_v<T, Box>) {
            const double r = 0.5 * std::hypot(s.size_x, s.size_y);
            return std::abs(s.cx) + r <= e && std::abs(s.cy) + r <= e;
          } else {
            return std::abs(s.cx) + s.radius <= e && std::abs(s.cy) + s.radius <= e;
          }
        },
        prim);
    require(inside, "primitive outside the ground extent");
  }
}

/// Uniform surface samples of every primitive and of the ground plane at the
/// configured density. Ground under box and cylinder footprints is skipped.
inline PointCloud generate_scene(const SceneSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  PointCloud ground;
  detail::sample_rectangle(detail::ground_rectangle(spec.ground_half_extent), spec.density, rng,
                           ground);
  PointCloud out;
  for (const auto& p : ground) {
    const bool covered = std::any_of(spec.primitives.begin(), spec.primitives.end(),
                                     [&](const Primitive& prim) {
                                       return detail::inside_footprint(prim, p.x, p.y);
                                     });
    if (!covered) out.push_back(p);
  }
  for (const auto& prim : spec.primitives) {
    if (const auto* r = std::get_if<Rectangle>(&prim)) {
      detail::sample_rectangle(*r, spec.density, rng, out);
    } else if (const auto* b = std::get_if<Box>(&prim)) {
      for (const auto& face : detail::box_faces(*b)) {
        detail::sample_rectangle(face, spec.density, rng, out);
      }
    } else {
      detail::sample_cylinder(std::get<Cylinder>(prim), spec.density, rng, out);
    }
  }
  return out;
}

/// Ray-casts an azimuth x elevation grid from the sensor origin against the
/// scene surfaces and keeps the first hit within range, then applies
/// per-return dropout.
inline PointCloud simulate_scan(const std::vector<Primitive>& surfaces, const ScanSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::bernoulli_distribution drop(spec.dropout);
  const double deg = std::numbers::pi / 180.0;
  PointCloud out;
  for (std::size_t e = 0; e < spec.elevation_channels; ++e) {
    const double frac = spec.elevation_channels > 1
                            ? static_cast<double>(e) / static_cast<double>(spec.elevation_channels - 1)
                            : 0.5;
    const double elev =
        (spec.elevation_min_deg + frac * (spec.elevation_max_deg - spec.elevation_min_deg)) * deg;
    for (std::size_t a = 0; a < spec.azimuth_channels; ++a) {
      const double az = 2.0 * std::numbers::pi * static_cast<double>(a) /
                        static_cast<double>(spec.azimuth_channels);
      const Vec3 dir{std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev)};
      std::optional<double> best;
      for (const auto& prim : surfaces) {
        const auto hit = std::visit([&](const auto& s) { return detail::intersect(s, spec.origin, dir); },
                                    prim);
        if (hit && (!best || *hit < *best)) best = hit;
      }
      if (!best || *best > spec.max_range) continue;
      if (drop(rng)) continue;
      out.push_back(spec.origin + *best * dir);
    }
  }
  return out;
}

/// Complete scene G and simulated scan P, both reduced to their point budgets.
/// A complete scene and its scan, both in the sensor frame (sensor at the
/// origin), which is also where the evaluation grids are anchored.
struct SceneCase {
  PointCloud scene;
  PointCloud scan;
  SceneSpec spec;
  ScanSpec scan_spec;
  std::uint64_t seed = 0;
};

/// Knobs for drawing random scenes.
struct SceneDistribution {
  double ground_half_extent = 3.0;
  double density = 300.0;
  std::size_t min_boxes = 2;
  std::size_t max_boxes = 3;
  std::size_t min_cylinders = 1;
  std::size_t max_cylinders = 2;
  double box_size_min = 0.6;
  double box_size_max = 1.2;
  double box_height_min = 0.3;
  double box_height_max = 0.8;
  double cylinder_radius_min = 0.15;
  double cylinder_radius_max = 0.5;
  double cylinder_height_min = 0.5;
  double cylinder_height_max = 1.0;
  double keep_out_radius = 1.0;  // no primitive this close to the sensor axis
  std::size_t scan_points = 512;   // N
  std::size_t scene_points = 5120;  // M
  ScanSpec scan;
};

inline SceneSpec random_scene_spec(const SceneDistribution& dist, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  auto count = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  SceneSpec spec;
  spec.ground_half_extent = dist.ground_half_extent;
  spec.density = dist.density;
  spec.seed = seed ^ 0x9e3779b97f4a7c15ULL;
  const double e = dist.ground_half_extent;

  // Rejection-place footprints in the annulus keep_out_radius .. e - margin.
  auto place = [&](double footprint_radius, double& x, double& y) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double r = uniform(dist.keep_out_radius + footprint_radius, e - footprint_radius);
      const double th = uniform(0.0, 2.0 * std::numbers::pi);
      x = r * std::cos(th);
      y = r * std::sin(th);
      if (std::abs(x) + footprint_radius <= e && std::abs(y) + footprint_radius <= e) return true;
    }
    return false;
  };

  const std::size_t boxes = count(dist.min_boxes, dist.max_boxes);
  for (std::size_t i = 0; i < boxes; ++i) {
    Box b;
    b.size_x = uniform(dist.box_size_min, dist.box_size_max);
    b.size_y = uniform(dist.box_size_min, dist.box_size_max);
    b.height = uniform(dist.box_height_min, dist.box_height_max);
    b.yaw = uniform(0.0, std::numbers::pi);
    if (place(0.5 * std::hypot(b.size_x, b.size_y), b.cx, b.cy)) spec.primitives.emplace_back(b);
  }
  const std::size_t cylinders = count(dist.min_cylinders, dist.max_cylinders);
  for (std::size_t i = 0; i < cylinders; ++i) {
    Cylinder c;
    c.radius = uniform(dist.cylinder_radius_min, dist.cylinder_radius_max);
    c.height = uniform(dist.cylinder_height_min, dist.cylinder_height_max);
    if (place(c.radius, c.cx, c.cy)) spec.primitives.emplace_back(c);
  }
  return spec;
}

/// Draws a random scene, scans it, and applies the point budgets: farthest
/// point sampling for the scan, uniform sampling without replacement for the
/// complete scene. Both clouds are shifted into the sensor frame.
inline SceneCase make_case(const SceneDistribution& dist, std::uint64_t seed) {
  SceneCase c;
  c.seed = seed;
  c.spec = random_scene_spec(dist, seed);
  c.scan_spec = dist.scan;
  c.scan_spec.seed = seed + 1;
  PointCloud scene = generate_scene(c.spec);
  PointCloud scan = simulate_scan(scene_surfaces(c.spec), c.scan_spec);
  require(!scan.empty(), "simulated scan is empty");

  const std::size_t n = std::min(dist.scan_points, scan.size());
  c.scan = farthest_point_sample(scan, n, seed + 2);
  for (auto& p : c.scan) p -= c.scan_spec.origin;

  const std::size_t m = std::min(dist.scene_points, scene.size());
  Rng rng(seed + 3);
  std::vector<std::size_t> idx(scene.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first m entries are a uniform subset.
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  c.scene.reserve(m);
  for (std::size_t i = 0; i < m; ++i) c.scene.push_back(scene[idx[i]] - c.scan_spec.origin);
  return c;
}

}  // namespace liflow
