#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "liflow/field.hpp"

namespace liflow {

struct Checkpoint {
  FieldConfig field;
  ModelState model;
  OptimizerState optimizer;
};

inline constexpr char kCheckpointMagic[8] = {'L', 'I', 'F', 'L', 'O', 'W', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string serialize_field_config(const FieldConfig& c) {
  std::ostringstream os;
  os << "hidden_widths=";
  for (std::size_t i = 0; i < c.hidden_widths.size(); ++i) {
    os << (i ? "," : "") << c.hidden_widths[i];
  }
  os << "\ntime_embed_dim=" << c.time_embed_dim << "\ncond_feature_mode="
     << to_string(c.cond_feature_mode) << "\nactivation=" << to_string(c.activation)
     << "\nseed=" << c.seed << "\nzero_init_output=" << (c.zero_init_output ? 1 : 0) << '\n';
  return os.str();
}

inline FieldConfig parse_field_config(const std::string& text) {
  FieldConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("malformed checkpoint config line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "hidden_widths") {
      c.hidden_widths.clear();
      std::istringstream vs(value);
      std::string item;
      while (std::getline(vs, item, ',')) c.hidden_widths.push_back(std::stoull(item));
    } else if (key == "time_embed_dim") {
      c.time_embed_dim = std::stoull(value);
    } else if (key == "cond_feature_mode") {
      c.cond_feature_mode = parse_condition_mode(value);
    } else if (key == "activation") {
      c.activation = parse_activation(value);
    } else if (key == "seed") {
      c.seed = std::stoull(value);
    } else if (key == "zero_init_output") {
      c.zero_init_output = value == "1";
    } else {
      throw Error("unknown checkpoint config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

namespace detail {

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_doubles(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw Error(std::string("truncated checkpoint while reading ") + what);
  }
  return v;
}

inline std::vector<double> get_doubles(std::istream& is, std::size_t n, const char* what) {
  std::vector<double> v(n);
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw Error(std::string("truncated checkpoint while reading ") + what);
  }
  return v;
}

}  // namespace detail

/// Binary container: magic, version, field config text, step count, then the
/// weights, EMA weights and both Adam moments as raw little-endian doubles,
/// followed by the Adam hyperparameters.
inline void save_checkpoint(const Checkpoint& ck, std::ostream& os) {
  const std::string config = serialize_field_config(ck.field);
  const std::uint64_t n = ck.model.weights.size();
  require(ck.model.ema_weights.size() == n && ck.optimizer.m.size() == n &&
              ck.optimizer.v.size() == n,
          "checkpoint state shapes disagree");
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put(os, kCheckpointVersion);
  detail::put(os, static_cast<std::uint64_t>(config.size()));
  os.write(config.data(), static_cast<std::streamsize>(config.size()));
  detail::put(os, static_cast<std::uint64_t>(ck.model.step_count));
  detail::put(os, n);
  detail::put_doubles(os, ck.model.weights);
  detail::put_doubles(os, ck.model.ema_weights);
  detail::put_doubles(os, ck.optimizer.m);
  detail::put_doubles(os, ck.optimizer.v);
  detail::put(os, ck.optimizer.learning_rate);
  detail::put(os, ck.optimizer.beta1);
  detail::put(os, ck.optimizer.beta2);
  detail::put(os, ck.optimizer.eps);
  if (!os) throw Error("failed writing checkpoint");
}

inline Checkpoint load_checkpoint(std::istream& is) {
  char magic[sizeof kCheckpointMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw Error("not a checkpoint file");
  }
  const auto version = detail::get<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto config_len = detail::get<std::uint64_t>(is, "config length");
  std::string config(config_len, '\0');
  if (!is.read(config.data(), static_cast<std::streamsize>(config_len))) {
    throw Error("truncated checkpoint while reading config");
  }
  Checkpoint ck;
  ck.field = parse_field_config(config);
  ck.model.step_count = detail::get<std::uint64_t>(is, "step count");
  const auto n = detail::get<std::uint64_t>(is, "parameter count");
  if (n != VectorFieldNet(ck.field).parameter_count()) {
    throw Error("checkpoint parameter count does not match its config");
  }
  ck.model.weights = detail::get_doubles(is, n, "weights");
  ck.model.ema_weights = detail::get_doubles(is, n, "ema weights");
  ck.optimizer.m = detail::get_doubles(is, n, "first moments");
  ck.optimizer.v = detail::get_doubles(is, n, "second moments");
  ck.optimizer.learning_rate = detail::get<double>(is, "learning rate");
  ck.optimizer.beta1 = detail::get<double>(is, "beta1");
  ck.optimizer.beta2 = detail::get<double>(is, "beta2");
  ck.optimizer.eps = detail::get<double>(is, "eps");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  // Write-then-rename so an interrupted save never clobbers the previous file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error("cannot open '" + tmp.string() + "' for writing");
    save_checkpoint(ck, os);
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint '" + path.string() + "'");
  return load_checkpoint(is);
}

}  // namespace liflow
