#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "liflow/field.hpp"
#include "liflow/metrics.hpp"
#include "liflow/objective.hpp"
#include "liflow/sampler.hpp"
#include "liflow/scenes.hpp"
#include "liflow/train.hpp"

namespace liflow {

/// Every knob of a run. Defaults follow the reference hyperparameters where
/// they exist (K = 10, p = 0.1, lambdas 1 / 0.1, 10 Euler steps, w = 6,
/// EMA 0.9999, batch 4, 20 epochs) and the desk-scale scene generator
/// otherwise.
struct RunConfig {
  // dataset
  std::string data_dir = "data";
  std::size_t cases = 16;
  std::uint64_t data_seed = 0;
  SceneDistribution scenes;

  // coupling
  std::size_t k = 10;
  double noise_scale = 1.0;
  double p_null = 0.1;

  ObjectiveConfig objective;
  FieldConfig field;

  // optimizer
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_decay = kDefaultEmaDecay;

  // training schedule
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  std::size_t max_steps = 0;
  std::uint64_t train_seed = 0;
  std::size_t checkpoint_every = 500;
  std::string out_dir = "run";

  // inference
  SamplerConfig sampler;
  std::uint64_t noise_seed = 0;

  // evaluation
  EvalConfig eval;

  TrainConfig train_config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.max_steps = max_steps;
    t.seed = train_seed;
    t.p_null = p_null;
    t.k = k;
    t.noise_scale = noise_scale;
    t.objective = objective;
    t.ema_decay = ema_decay;
    return t;
  }

  OptimizerState fresh_optimizer(std::size_t parameters) const {
    OptimizerState o = OptimizerState::for_size(parameters);
    o.learning_rate = learning_rate;
    o.beta1 = beta1;
    o.beta2 = beta2;
    o.eps = adam_eps;
    return o;
  }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error(key + ": expected a number, got '" + text + "'");
  return v;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw Error(key + ": expected true/false, got '" + text + "'");
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) items.push_back(item);
  return items;
}

inline std::string fmt(double v) { return format_number(v); }

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    os << (i ? "," : "");
    if constexpr (std::is_floating_point_v<T>) {
      os << fmt(v[i]);
    } else {
      os << v[i];
    }
  }
  return os.str();
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

/// The full set of recognized keys, in the order they are written out.
inline const std::vector<ConfigKey>& config_keys() {
  using namespace detail;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto num = [&k](std::string name, std::string help, auto member) {
      k.push_back({name, std::move(help),
                   [name, member](RunConfig& c, const std::string& v) {
                     member(c) = parse_double(name, v);
                   },
                   [member](const RunConfig& c) {
                     return fmt(member(const_cast<RunConfig&>(c)));
                   }});
    };
    auto count = [&k](std::string name, std::string help, auto member) {
      k.push_back({name, std::move(help),
                   [name, member](RunConfig& c, const std::string& v) {
                     member(c) = static_cast<std::decay_t<decltype(member(c))>>(parse_u64(name, v));
                   },
                   [member](const RunConfig& c) {
                     return std::to_string(member(const_cast<RunConfig&>(c)));
                   }});
    };
    auto flag = [&k](std::string name, std::string help, auto member) {
      k.push_back({name, std::move(help),
                   [name, member](RunConfig& c, const std::string& v) {
                     member(c) = parse_bool(name, v);
                   },
                   [member](const RunConfig& c) {
                     return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false");
                   }});
    };
    auto text = [&k](std::string name, std::string help, auto member) {
      k.push_back({name, std::move(help),
                   [member](RunConfig& c, const std::string& v) { member(c) = v; },
                   [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)); }});
    };
#define LIFLOW_MEMBER(expr) [](RunConfig& c) -> auto& { return c.expr; }
    // dataset
    text("data_dir", "dataset directory", LIFLOW_MEMBER(data_dir));
    count("cases", "number of scene cases to generate", LIFLOW_MEMBER(cases));
    count("data_seed", "seed for scene generation", LIFLOW_MEMBER(data_seed));
    num("ground_half_extent", "ground covers [-e, e]^2 meters", LIFLOW_MEMBER(scenes.ground_half_extent));
    num("surface_density", "scene surface samples per m^2", LIFLOW_MEMBER(scenes.density));
    count("min_boxes", "boxes per scene, lower bound", LIFLOW_MEMBER(scenes.min_boxes));
    count("max_boxes", "boxes per scene, upper bound", LIFLOW_MEMBER(scenes.max_boxes));
    count("min_cylinders", "cylinders per scene, lower bound", LIFLOW_MEMBER(scenes.min_cylinders));
    count("max_cylinders", "cylinders per scene, upper bound", LIFLOW_MEMBER(scenes.max_cylinders));
    num("box_size_min", "box footprint side, m", LIFLOW_MEMBER(scenes.box_size_min));
    num("box_size_max", "box footprint side, m", LIFLOW_MEMBER(scenes.box_size_max));
    num("box_height_min", "box height, m", LIFLOW_MEMBER(scenes.box_height_min));
    num("box_height_max", "box height, m", LIFLOW_MEMBER(scenes.box_height_max));
    num("cylinder_radius_min", "cylinder radius, m", LIFLOW_MEMBER(scenes.cylinder_radius_min));
    num("cylinder_radius_max", "cylinder radius, m", LIFLOW_MEMBER(scenes.cylinder_radius_max));
    num("cylinder_height_min", "cylinder height, m", LIFLOW_MEMBER(scenes.cylinder_height_min));
    num("cylinder_height_max", "cylinder height, m", LIFLOW_MEMBER(scenes.cylinder_height_max));
    num("keep_out_radius", "no primitive within this distance of the sensor, m", LIFLOW_MEMBER(scenes.keep_out_radius));
    count("scan_points", "scan budget N (farthest point sampling)", LIFLOW_MEMBER(scenes.scan_points));
    count("scene_points", "complete-scene budget M (uniform sampling)", LIFLOW_MEMBER(scenes.scene_points));
    num("sensor_height", "sensor height above the floor, m", LIFLOW_MEMBER(scenes.scan.origin.z));
    count("azimuth_channels", "rays per revolution", LIFLOW_MEMBER(scenes.scan.azimuth_channels));
    count("elevation_channels", "beams", LIFLOW_MEMBER(scenes.scan.elevation_channels));
    num("elevation_min_deg", "lowest beam angle", LIFLOW_MEMBER(scenes.scan.elevation_min_deg));
    num("elevation_max_deg", "highest beam angle", LIFLOW_MEMBER(scenes.scan.elevation_max_deg));
    num("max_range", "scan range, m", LIFLOW_MEMBER(scenes.scan.max_range));
    num("dropout", "per-return drop probability", LIFLOW_MEMBER(scenes.scan.dropout));
    // coupling
    count("k", "scan replication factor K", LIFLOW_MEMBER(k));
    num("noise_scale", "initial-cloud noise std per axis, m", LIFLOW_MEMBER(noise_scale));
    num("p_null", "condition drop probability during training", LIFLOW_MEMBER(p_null));
    // objective
    num("lambda_nfm", "weight of the nearest-neighbor flow matching loss", LIFLOW_MEMBER(objective.weights.lambda_nfm));
    num("lambda_cdm", "weight of the Chamfer matching loss", LIFLOW_MEMBER(objective.weights.lambda_cdm));
    k.push_back({"cdm_reduction", "sum | mean (sum divided by |x0| + |x1|)",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "sum") {
                     c.objective.cdm_reduction = CdmReduction::kSum;
                   } else if (v == "mean") {
                     c.objective.cdm_reduction = CdmReduction::kMeanOverPoints;
                   } else {
                     throw Error("cdm_reduction: expected sum or mean, got '" + v + "'");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.objective.cdm_reduction == CdmReduction::kSum ? "sum" : "mean");
                 }});
    flag("cdm_from_xt", "apply the prediction to x_t with (1 - t) scaling", LIFLOW_MEMBER(objective.cdm_from_xt));
    // field
    k.push_back({"hidden_widths", "comma-separated hidden layer widths",
                 [](RunConfig& c, const std::string& v) {
                   c.field.hidden_widths.clear();
                   for (const auto& item : split_list(v)) {
                     c.field.hidden_widths.push_back(parse_u64("hidden_widths", item));
                   }
                 },
                 [](const RunConfig& c) { return join(c.field.hidden_widths); }});
    count("time_embed_dim", "sinusoidal time features (even)", LIFLOW_MEMBER(field.time_embed_dim));
    k.push_back({"cond_feature_mode", "nearest-offset | none",
                 [](RunConfig& c, const std::string& v) { c.field.cond_feature_mode = parse_condition_mode(v); },
                 [](const RunConfig& c) { return to_string(c.field.cond_feature_mode); }});
    k.push_back({"activation", "silu | tanh | relu",
                 [](RunConfig& c, const std::string& v) { c.field.activation = parse_activation(v); },
                 [](const RunConfig& c) { return to_string(c.field.activation); }});
    count("field_seed", "weight initialization seed", LIFLOW_MEMBER(field.seed));
    // optimizer
    num("learning_rate", "Adam step size", LIFLOW_MEMBER(learning_rate));
    num("beta1", "Adam first-moment decay", LIFLOW_MEMBER(beta1));
    num("beta2", "Adam second-moment decay", LIFLOW_MEMBER(beta2));
    num("adam_eps", "Adam denominator epsilon", LIFLOW_MEMBER(adam_eps));
    num("ema_decay", "EMA decay of the shadow weights", LIFLOW_MEMBER(ema_decay));
    // schedule
    count("epochs", "passes over the dataset", LIFLOW_MEMBER(epochs));
    count("batch_size", "cases per optimizer step", LIFLOW_MEMBER(batch_size));
    count("max_steps", "cap on optimizer steps (0 = none)", LIFLOW_MEMBER(max_steps));
    count("train_seed", "seed for noise, time and condition draws", LIFLOW_MEMBER(train_seed));
    count("checkpoint_every", "steps between checkpoint writes (0 = only at the end)", LIFLOW_MEMBER(checkpoint_every));
    text("out_dir", "training output directory", LIFLOW_MEMBER(out_dir));
    // inference
    count("steps", "Euler steps", LIFLOW_MEMBER(sampler.steps));
    num("guidance_weight", "classifier-free guidance weight w", LIFLOW_MEMBER(sampler.guidance_weight));
    flag("use_ema", "integrate with the EMA weights", LIFLOW_MEMBER(sampler.use_ema));
    count("noise_seed", "seed of the initial-cloud noise at inference", LIFLOW_MEMBER(noise_seed));
    // evaluation
    num("bev_resolution", "BEV cell size for JSD, m", LIFLOW_MEMBER(eval.bev_resolution));
    k.push_back({"bev_half_extent", "BEV covers [-e, e]^2, m",
                 [](RunConfig& c, const std::string& v) {
                   const double e = parse_double("bev_half_extent", v);
                   c.eval.bev_extent = {-e, e, -e, e};
                 },
                 [](const RunConfig& c) { return fmt(c.eval.bev_extent.xmax); }});
    k.push_back({"iou_resolutions", "comma-separated voxel sizes, m",
                 [](RunConfig& c, const std::string& v) {
                   c.eval.iou_resolutions.clear();
                   for (const auto& item : split_list(v)) {
                     c.eval.iou_resolutions.push_back(parse_double("iou_resolutions", item));
                   }
                 },
                 [](const RunConfig& c) { return join(c.eval.iou_resolutions); }});
#undef LIFLOW_MEMBER
    return k;
  }();
  return keys;
}

inline const ConfigKey* find_config_key(const std::string& name) {
  for (const auto& key : config_keys()) {
    if (key.name == name) return &key;
  }
  return nullptr;
}

inline void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  const ConfigKey* k = find_config_key(key);
  if (!k) throw Error("unknown config key '" + key + "'");
  k->set(config, value);
}

/// Applies `key = value` lines; blank lines and `#` comments are skipped.
inline void apply_config_text(RunConfig& config, std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path.string() + "'");
  apply_config_text(config, in, path.string());
}

inline void write_config(std::ostream& os, const RunConfig& config) {
  for (const auto& key : config_keys()) os << key.name << " = " << key.get(config) << '\n';
}

/// Rejects physically meaningless settings before any work starts.
inline void validate(const RunConfig& c) {
  require(c.k >= 1, "k must be >= 1");
  require(c.noise_scale >= 0.0 && std::isfinite(c.noise_scale), "noise_scale must be >= 0");
  require(c.p_null >= 0.0 && c.p_null <= 1.0, "p_null must lie in [0, 1]");
  c.objective.weights.validate();
  c.field.validate();
  require(c.learning_rate > 0.0, "learning_rate must be positive");
  require(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0,
          "Adam betas must lie in [0, 1)");
  require(c.adam_eps > 0.0, "adam_eps must be positive");
  require(c.ema_decay >= 0.0 && c.ema_decay <= 1.0, "ema_decay must lie in [0, 1]");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  c.sampler.validate();
  require(c.eval.bev_resolution > 0.0, "bev_resolution must be positive");
  require(c.eval.bev_extent.xmax > c.eval.bev_extent.xmin, "bev_half_extent must be positive");
  for (double r : c.eval.iou_resolutions) require(r > 0.0, "iou_resolutions must be positive");
  const SceneDistribution& s = c.scenes;
  require(s.ground_half_extent > 0.0, "ground_half_extent must be positive");
  require(s.density > 0.0, "surface_density must be positive");
  require(s.min_boxes <= s.max_boxes && s.min_cylinders <= s.max_cylinders,
          "primitive count bounds are inverted");
  require(s.box_size_min > 0.0 && s.box_size_min <= s.box_size_max, "invalid box size range");
  require(s.box_height_min > 0.0 && s.box_height_min <= s.box_height_max, "invalid box height range");
  require(s.cylinder_radius_min > 0.0 && s.cylinder_radius_min <= s.cylinder_radius_max,
          "invalid cylinder radius range");
  require(s.cylinder_height_min > 0.0 && s.cylinder_height_min <= s.cylinder_height_max,
          "invalid cylinder height range");
  require(s.keep_out_radius >= 0.0, "keep_out_radius must be >= 0");
  require(s.scan_points >= 1 && s.scene_points >= 1, "point budgets must be >= 1");
  s.scan.validate();
}

}  // namespace liflow
