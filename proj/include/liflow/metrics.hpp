#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "liflow/geometry.hpp"

namespace liflow {

inline const double kLn2 = std::log(2.0);

struct EvalConfig {
  double bev_resolution = 0.5;
  Extent2D bev_extent{};  // defaults to the 50 m scan range square
  std::vector<double> iou_resolutions{0.5, 0.2, 0.1};
  Vec3 voxel_origin{};
};

struct EvalReport {
  double cd_m = 0.0;
  double jsd = 0.0;
  std::map<double, double> voxel_iou;  // resolution (m) -> IoU
  double wall_time_s = 0.0;
};

/// Symmetric mean nearest-neighbor distance in meters.
inline double eval_cd(const PointCloud& pred, const PointCloud& gt) {
  return chamfer_distance_mean(pred, gt);
}

/// Jensen-Shannon divergence (natural log) between two histograms of equal
/// shape after normalization. Empty bins contribute nothing.
inline double jensen_shannon(const std::vector<std::uint64_t>& a,
                             const std::vector<std::uint64_t>& b) {
  require(a.size() == b.size(), "histogram shape mismatch");
  double sa = 0.0, sb = 0.0;
  for (auto c : a) sa += static_cast<double>(c);
  for (auto c : b) sb += static_cast<double>(c);
  require(sa > 0.0 && sb > 0.0, "no points inside the BEV extent");
  double kl_p = 0.0, kl_q = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double p = static_cast<double>(a[i]) / sa;
    const double q = static_cast<double>(b[i]) / sb;
    const double m = 0.5 * (p + q);
    if (p > 0.0) kl_p += p * std::log(p / m);
    if (q > 0.0) kl_q += q * std::log(q / m);
  }
  const double jsd = 0.5 * kl_p + 0.5 * kl_q;
  return std::clamp(jsd, 0.0, kLn2);
}

inline double eval_jsd_bev(const PointCloud& pred, const PointCloud& gt, double resolution,
                           const Extent2D& extent) {
  const BevHistogram hp = bev_histogram(pred, resolution, extent);
  const BevHistogram hg = bev_histogram(gt, resolution, extent);
  return jensen_shannon(hp.counts, hg.counts);
}

inline double voxel_iou(const VoxelSet& a, const VoxelSet& b) {
  std::vector<VoxelCell> inter;
  std::set_intersection(a.occupied.begin(), a.occupied.end(), b.occupied.begin(),
                        b.occupied.end(), std::back_inserter(inter));
  const std::size_t uni = a.size() + b.size() - inter.size();
  return uni == 0 ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
}

inline double eval_voxel_iou(const PointCloud& pred, const PointCloud& gt, double resolution,
                             const Vec3& origin = {}) {
  require(!gt.empty(), "empty ground truth cloud");
  return voxel_iou(voxelize(pred, resolution, origin), voxelize(gt, resolution, origin));
}

inline EvalReport eval_all(const PointCloud& pred, const PointCloud& gt,
                           const EvalConfig& config = {}) {
  const auto start = std::chrono::steady_clock::now();
  EvalReport r;
  r.cd_m = eval_cd(pred, gt);
  r.jsd = eval_jsd_bev(pred, gt, config.bev_resolution, config.bev_extent);
  for (double res : config.iou_resolutions) {
    r.voxel_iou[res] = eval_voxel_iou(pred, gt, res, config.voxel_origin);
  }
  r.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

namespace detail {

// Shortest representation that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string iou_key(double res) { return "voxel_iou_" + format_number(res); }

}  // namespace detail

/// Flat key-value serialization, one metric per line:
///   cd_m <v> / jsd <v> / voxel_iou_<res> <v> / wall_time_s <v>
inline void write_report(std::ostream& os, const EvalReport& r) {
  os << "cd_m " << detail::format_number(r.cd_m) << '\n';
  os << "jsd " << detail::format_number(r.jsd) << '\n';
  for (const auto& [res, iou] : r.voxel_iou) {
    os << detail::iou_key(res) << ' ' << detail::format_number(iou) << '\n';
  }
  os << "wall_time_s " << detail::format_number(r.wall_time_s) << '\n';
}

inline EvalReport read_report(std::istream& is) {
  EvalReport r;
  std::string key;
  std::string value;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (!(ls >> key >> value)) throw Error("malformed report line " + std::to_string(line_no));
    const double v = std::stod(value);
    if (key == "cd_m") {
      r.cd_m = v;
    } else if (key == "jsd") {
      r.jsd = v;
    } else if (key == "wall_time_s") {
      r.wall_time_s = v;
    } else if (key.rfind("voxel_iou_", 0) == 0) {
      r.voxel_iou[std::stod(key.substr(10))] = v;
    } else {
      throw Error("unknown report key '" + key + "' on line " + std::to_string(line_no));
    }
  }
  return r;
}

/// Table with the column order CD, JSD, Voxel IoU (coarse to fine), IoU in
/// percent. `rows` pairs a label with its report.
inline void write_table(std::ostream& os,
                        const std::vector<std::pair<std::string, EvalReport>>& rows) {
  if (rows.empty()) return;
  std::vector<double> resolutions;
  for (const auto& [res, iou] : rows.front().second.voxel_iou) resolutions.push_back(res);
  std::sort(resolutions.rbegin(), resolutions.rend());
  os << std::left << std::setw(24) << "case" << std::right << std::setw(10) << "CD[m]"
     << std::setw(10) << "JSD";
  for (double res : resolutions) {
    std::ostringstream h;
    h << "IoU@" << res;
    os << std::setw(10) << h.str();
  }
  os << '\n';
  os << std::fixed;
  for (const auto& [label, r] : rows) {
    os << std::left << std::setw(24) << label << std::right << std::setprecision(3)
       << std::setw(10) << r.cd_m << std::setw(10) << r.jsd << std::setprecision(1);
    for (double res : resolutions) {
      auto it = r.voxel_iou.find(res);
      os << std::setw(10) << (it == r.voxel_iou.end() ? 0.0 : 100.0 * it->second);
    }
    os << '\n';
  }
  os << std::defaultfloat;
}

/// Per-field arithmetic mean of a set of reports.
inline EvalReport mean_report(const std::vector<EvalReport>& reports) {
  EvalReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.cd_m += r.cd_m;
    m.jsd += r.jsd;
    m.wall_time_s += r.wall_time_s;
    for (const auto& [res, iou] : r.voxel_iou) m.voxel_iou[res] += iou;
  }
  const auto n = static_cast<double>(reports.size());
  m.cd_m /= n;
  m.jsd /= n;
  m.wall_time_s /= n;
  for (auto& [res, iou] : m.voxel_iou) iou /= n;
  return m;
}

}  // namespace liflow
