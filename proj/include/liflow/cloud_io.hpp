#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "liflow/point_cloud.hpp"

namespace liflow {

enum class CloudFormat { kXyz, kPlyAscii, kPlyBinary };

/// `.xyz` -> XYZ text, anything else -> PLY (binary when writing; the reader
/// detects the PLY encoding from the header).
inline CloudFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".xyz" ? CloudFormat::kXyz : CloudFormat::kPlyBinary;
}

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

inline std::string format_xyz_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

struct PlyProperty {
  std::string type;
  std::string name;
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

inline std::size_t ply_type_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
      type == "float" || type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  throw Error("unsupported PLY property type '" + type + "'");
}

inline double read_binary_scalar(const std::string& type, const char* p) {
  auto load = [p](auto v) {
    std::memcpy(&v, p, sizeof v);
    return static_cast<double>(v);
  };
  if (type == "char" || type == "int8") return load(std::int8_t{});
  if (type == "uchar" || type == "uint8") return load(std::uint8_t{});
  if (type == "short" || type == "int16") return load(std::int16_t{});
  if (type == "ushort" || type == "uint16") return load(std::uint16_t{});
  if (type == "int" || type == "int32") return load(std::int32_t{});
  if (type == "uint" || type == "uint32") return load(std::uint32_t{});
  if (type == "float" || type == "float32") return load(float{});
  return load(double{});
}

inline PointCloud read_xyz(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Vec3 p;
    std::string extra;
    if (!(ls >> p.x >> p.y >> p.z) || (ls >> extra)) {
      throw Error("malformed XYZ line " + std::to_string(line_no) + ": '" + line + "'");
    }
    if (!is_finite(p)) throw Error("non-finite coordinate on XYZ line " + std::to_string(line_no));
    cloud.push_back(p);
  }
  return cloud;
}

inline PointCloud read_ply(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line() || line != "ply") throw Error("not a PLY file: missing 'ply' magic");

  std::string format;
  std::vector<PlyElement> elements;
  bool ended = false;
  while (next_line()) {
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "format") {
      ls >> format;
    } else if (keyword == "element") {
      PlyElement e;
      if (!(ls >> e.name >> e.count)) throw Error("malformed PLY element on line " + std::to_string(line_no));
      elements.push_back(e);
    } else if (keyword == "property") {
      if (elements.empty()) throw Error("PLY property before any element on line " + std::to_string(line_no));
      PlyProperty prop;
      ls >> prop.type;
      if (prop.type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type;
        prop.is_list = true;
        prop.type = count_type + ":" + item_type;
      }
      ls >> prop.name;
      elements.back().properties.push_back(prop);
    } else if (keyword == "end_header") {
      ended = true;
      break;
    } else if (keyword != "comment" && keyword != "obj_info" && !keyword.empty()) {
      throw Error("unknown PLY header keyword '" + keyword + "' on line " + std::to_string(line_no));
    }
  }
  if (format.empty()) throw Error("PLY header missing 'format' line");
  if (!ended) throw Error("truncated PLY header: missing 'end_header'");

  std::size_t vertex_element = elements.size();
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (elements[i].name == "vertex") vertex_element = i;
  }
  if (vertex_element == elements.size()) throw Error("PLY header missing element 'vertex'");
  const PlyElement& vertex = elements[vertex_element];
  int axis_of[3] = {-1, -1, -1};
  for (std::size_t k = 0; k < vertex.properties.size(); ++k) {
    const auto& name = vertex.properties[k].name;
    if (name == "x") axis_of[0] = static_cast<int>(k);
    if (name == "y") axis_of[1] = static_cast<int>(k);
    if (name == "z") axis_of[2] = static_cast<int>(k);
  }
  for (int a = 0; a < 3; ++a) {
    if (axis_of[a] < 0) throw Error(std::string("PLY vertex element missing property '") + "xyz"[a] + "'");
  }

  PointCloud cloud;
  cloud.reserve(vertex.count);
  if (format == "ascii") {
    // Elements are stored in header order; only those up to the vertices matter.
    for (std::size_t e = 0; e <= vertex_element; ++e) {
      for (std::size_t r = 0; r < elements[e].count; ++r) {
        if (!next_line()) {
          throw Error("truncated PLY body: expected " + std::to_string(elements[e].count) + " '" +
                      elements[e].name + "' rows, got " + std::to_string(r));
        }
        if (e != vertex_element) continue;
        std::istringstream ls(line);
        std::vector<double> values;
        double v;
        while (ls >> v) values.push_back(v);
        if (values.size() < vertex.properties.size()) {
          throw Error("malformed PLY vertex row on line " + std::to_string(line_no));
        }
        cloud.push_back({values[static_cast<std::size_t>(axis_of[0])],
                         values[static_cast<std::size_t>(axis_of[1])],
                         values[static_cast<std::size_t>(axis_of[2])]});
      }
    }
  } else if (format == "binary_little_endian") {
    for (std::size_t e = 0; e < vertex_element; ++e) {
      std::size_t stride = 0;
      for (const auto& p : elements[e].properties) {
        if (p.is_list) throw Error("list properties before the vertex element are not supported");
        stride += ply_type_size(p.type);
      }
      in.ignore(static_cast<std::streamsize>(stride * elements[e].count));
    }
    std::vector<std::size_t> offsets;
    std::size_t stride = 0;
    for (const auto& p : vertex.properties) {
      if (p.is_list) throw Error("list property in PLY vertex element");
      offsets.push_back(stride);
      stride += ply_type_size(p.type);
    }
    std::vector<char> row(stride);
    for (std::size_t r = 0; r < vertex.count; ++r) {
      if (!in.read(row.data(), static_cast<std::streamsize>(stride))) {
        throw Error("truncated PLY body at vertex " + std::to_string(r) + " of " +
                    std::to_string(vertex.count));
      }
      Vec3 p;
      double* dst[3] = {&p.x, &p.y, &p.z};
      for (int a = 0; a < 3; ++a) {
        const auto k = static_cast<std::size_t>(axis_of[a]);
        *dst[a] = read_binary_scalar(vertex.properties[k].type, row.data() + offsets[k]);
      }
      cloud.push_back(p);
    }
  } else {
    throw Error("unsupported PLY format '" + format + "'");
  }
  if (!cloud.all_finite()) throw Error("non-finite coordinate in PLY file");
  return cloud;
}

}  // namespace detail

inline void write_cloud(const PointCloud& cloud, std::ostream& out, CloudFormat format) {
  switch (format) {
    case CloudFormat::kXyz:
      for (const auto& p : cloud) {
        out << detail::format_xyz_number(p.x) << ' ' << detail::format_xyz_number(p.y) << ' '
            << detail::format_xyz_number(p.z) << '\n';
      }
      break;
    case CloudFormat::kPlyAscii:
    case CloudFormat::kPlyBinary: {
      const bool binary = format == CloudFormat::kPlyBinary;
      out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
          << "element vertex " << cloud.size() << '\n'
          << "property float x\nproperty float y\nproperty float z\nend_header\n";
      for (const auto& p : cloud) {
        const float xyz[3] = {static_cast<float>(p.x), static_cast<float>(p.y),
                              static_cast<float>(p.z)};
        if (binary) {
          out.write(reinterpret_cast<const char*>(xyz), sizeof xyz);
        } else {
          char buf[96];
          std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", xyz[0], xyz[1], xyz[2]);
          out << buf;
        }
      }
      break;
    }
  }
  if (!out) throw Error("failed writing point cloud");
}

inline PointCloud read_cloud(std::istream& in, CloudFormat format) {
  return format == CloudFormat::kXyz ? detail::read_xyz(in) : detail::read_ply(in);
}

inline void write_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                        CloudFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_cloud(cloud, out, format);
}

inline void write_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  write_cloud(cloud, path, format_for_path(path));
}

inline PointCloud read_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return read_cloud(in, format_for_path(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace liflow
