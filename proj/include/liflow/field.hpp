#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "liflow/coupling.hpp"
#include "liflow/kdtree.hpp"
#include "liflow/objective.hpp"
#include "liflow/point_cloud.hpp"

namespace liflow {

enum class Activation { kSilu, kTanh, kRelu };
enum class ConditionMode { kNearestOffset, kNone };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kSilu: return "silu";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

inline Activation parse_activation(const std::string& name) {
  if (name == "silu") return Activation::kSilu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw Error("unknown activation '" + name + "'");
}

inline std::string to_string(ConditionMode m) {
  return m == ConditionMode::kNearestOffset ? "nearest-offset" : "none";
}

inline ConditionMode parse_condition_mode(const std::string& name) {
  if (name == "nearest-offset") return ConditionMode::kNearestOffset;
  if (name == "none") return ConditionMode::kNone;
  throw Error("unknown condition feature mode '" + name + "'");
}

struct FieldConfig {
  std::vector<std::size_t> hidden_widths{64, 64};
  std::size_t time_embed_dim = 16;
  ConditionMode cond_feature_mode = ConditionMode::kNearestOffset;
  Activation activation = Activation::kSilu;
  std::uint64_t seed = 0;
  bool zero_init_output = true;

  void validate() const {
    require(!hidden_widths.empty(), "field needs at least one hidden layer");
    for (auto w : hidden_widths) require(w >= 1, "hidden widths must be >= 1");
    require(time_embed_dim >= 2 && time_embed_dim % 2 == 0,
            "time embedding dimension must be even and >= 2");
  }
};

/// Trainable weights plus their exponential moving average.
struct ModelState {
  std::vector<double> weights;
  std::vector<double> ema_weights;
  std::uint64_t step_count = 0;

  bool all_finite() const {
    auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return finite(weights) && finite(ema_weights);
  }
};

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptimizerState for_size(std::size_t n) {
    OptimizerState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    return s;
  }
};

/// Sinusoidal embedding: [sin(w_j t), cos(w_j t)] with w_j spaced
/// geometrically from 1 to 100 rad per unit time.
inline std::vector<double> time_embedding(double t, std::size_t dim) {
  require(dim % 2 == 0, "time embedding dimension must be even");
  require(t >= 0.0 && t <= 1.0, "time outside [0, 1]");
  const std::size_t half = dim / 2;
  std::vector<double> out(dim);
  for (std::size_t j = 0; j < half; ++j) {
    const double frac = half > 1 ? static_cast<double>(j) / static_cast<double>(half - 1) : 0.0;
    const double freq = std::exp(frac * std::log(100.0));
    out[2 * j] = std::sin(freq * t);
    out[2 * j + 1] = std::cos(freq * t);
  }
  return out;
}

inline constexpr std::size_t kConditionFeatureDim = 5;
using ConditionFeatures = std::array<double, kConditionFeatureDim>;

/// Nearest-offset encoding of the condition: (q - x, |q - x|, 1) where q is
/// the scan point closest to x, or all zeros for the null condition.
class ConditionIndex {
 public:
  explicit ConditionIndex(const Condition& condition) : condition_(condition) {
    if (!condition_.is_null() && !condition_.scan().empty()) {
      tree_.emplace(condition_.scan().points());
    }
  }

  ConditionFeatures features(const Vec3& x) const {
    if (!tree_) return {0.0, 0.0, 0.0, 0.0, 0.0};
    const Neighbor nn = tree_->nearest(x);
    const Vec3 offset = condition_.scan()[nn.index] - x;
    return {offset.x, offset.y, offset.z, std::sqrt(nn.squared_distance), 1.0};
  }

 private:
  Condition condition_;
  std::optional<KdTree> tree_;
};

inline ConditionFeatures condition_features(const Vec3& x, const Condition& condition) {
  return ConditionIndex(condition).features(x);
}

/// Point-wise MLP u(t, x, c) -> R^3.
///
/// Input per point is [position, time embedding, condition features]; each
/// point is processed independently. Parameters live in one flat vector,
/// laid out layer by layer as a row-major (out x in) weight block followed by
/// the bias.
class VectorFieldNet {
 public:
  explicit VectorFieldNet(FieldConfig config) : config_(std::move(config)) {
    config_.validate();
    std::size_t in = input_dim();
    std::size_t offset = 0;
    auto add_layer = [&](std::size_t out) {
      layers_.push_back({in, out, offset, offset + in * out});
      offset += in * out + out;
      in = out;
    };
    for (auto w : config_.hidden_widths) add_layer(w);
    add_layer(3);
    parameter_count_ = offset;
  }

  const FieldConfig& config() const { return config_; }
  std::size_t parameter_count() const { return parameter_count_; }

  std::size_t condition_dim() const {
    return config_.cond_feature_mode == ConditionMode::kNearestOffset ? kConditionFeatureDim : 0;
  }
  std::size_t input_dim() const { return 3 + config_.time_embed_dim + condition_dim(); }

  /// Seeded initialization: N(0, 1/fan_in) weights, zero biases, and a zero
  /// output layer unless disabled.
  std::vector<double> initial_parameters() const {
    std::vector<double> p(parameter_count_, 0.0);
    Rng rng(config_.seed);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& L = layers_[l];
      if (l + 1 == layers_.size() && config_.zero_init_output) break;
      std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(L.in)));
      for (std::size_t i = 0; i < L.in * L.out; ++i) p[L.w + i] = gauss(rng);
    }
    return p;
  }

  ModelState initial_state() const {
    ModelState s;
    s.weights = initial_parameters();
    s.ema_weights = s.weights;
    return s;
  }

  VectorList forward(std::span<const double> params, double t, const PointCloud& x,
                     const Condition& condition) const {
    thread_local Tape scratch;
    return run(params, t, x, condition, &scratch);
  }

  /// Forward pass that keeps per-point activations, then back-propagates
  /// `upstream` (dL/du per point) into `grad`, which is accumulated into.
  void backward(std::span<const double> params, double t, const PointCloud& x,
                const Condition& condition, const VectorList& upstream,
                std::span<double> grad) const {
    thread_local Tape tape;
    run(params, t, x, condition, &tape);
    backprop(params, tape, upstream, grad);
  }

  /// Activations recorded by a forward pass, stored point-major.
  struct Tape {
    std::vector<double> time_features;
    std::vector<double> inputs;                // points x input_dim
    std::vector<std::vector<double>> acts;     // per hidden layer: points x width
    std::vector<std::vector<double>> slopes;   // activation derivative at each unit
    std::size_t points = 0;
    // Scratch reused across calls.
    std::vector<double> delta, prev, transposed, output;
  };

  VectorList forward_with_tape(std::span<const double> params, double t, const PointCloud& x,
                               const Condition& condition, Tape& tape) const {
    return run(params, t, x, condition, &tape);
  }

  void backprop(std::span<const double> params, Tape& tape, const VectorList& upstream,
                std::span<double> grad) const {
    require(params.size() == parameter_count_ && grad.size() == parameter_count_,
            "parameter size mismatch");
    require(upstream.size() == tape.points, "upstream gradient size mismatch");
    const std::size_t n = tape.points;
    const std::size_t n_hidden = layers_.size() - 1;

    // delta: points x width of the layer whose output it is the gradient of.
    std::vector<double>& delta = tape.delta;
    std::vector<double>& prev = tape.prev;
    delta.resize(n * 3);
    for (std::size_t p = 0; p < n; ++p) {
      delta[3 * p] = upstream[p].x;
      delta[3 * p + 1] = upstream[p].y;
      delta[3 * p + 2] = upstream[p].z;
    }
    for (std::size_t l = n_hidden + 1; l-- > 1;) {
      const Layer& L = layers_[l];
      const std::vector<double>& a_in = tape.acts[l - 1];
      accumulate_weight_grad(L, delta, a_in.data(), L.in, n, grad);
      // prev = delta * W, then through the activation of layer l-1.
      prev.assign(n * L.in, 0.0);
      for (std::size_t p = 0; p < n; ++p) {
        double* out = &prev[p * L.in];
        for (std::size_t o = 0; o < L.out; ++o) {
          const double d = delta[p * L.out + o];
          const double* w = &params[L.w + o * L.in];
          for (std::size_t i = 0; i < L.in; ++i) out[i] += d * w[i];
        }
      }
      const std::vector<double>& slope = tape.slopes[l - 1];
      for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= slope[i];
      std::swap(delta, prev);
    }

    // First layer: per-point columns take per-point products; the time
    // columns and bias only need the delta summed over points.
    const Layer& first = layers_[0];
    const std::size_t in0 = first.in;
    std::vector<double> delta_sum(first.out, 0.0);
    const auto cols = per_point_columns();
    for (std::size_t p = 0; p < n; ++p) {
      const double* input = &tape.inputs[p * in0];
      for (std::size_t o = 0; o < first.out; ++o) {
        const double d = delta[p * first.out + o];
        double* gw = &grad[first.w + o * in0];
        for (std::size_t c : cols) gw[c] += d * input[c];
        delta_sum[o] += d;
      }
    }
    for (std::size_t o = 0; o < first.out; ++o) {
      double* gw = &grad[first.w + o * in0];
      for (std::size_t i = 0; i < config_.time_embed_dim; ++i) {
        gw[3 + i] += delta_sum[o] * tape.time_features[i];
      }
      grad[first.b + o] += delta_sum[o];
    }
  }

 private:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t w = 0;  // offset of the weight block
    std::size_t b = 0;  // offset of the bias
  };

  std::vector<std::size_t> per_point_columns() const {
    std::vector<std::size_t> cols{0, 1, 2};
    for (std::size_t i = 3 + config_.time_embed_dim; i < input_dim(); ++i) cols.push_back(i);
    return cols;
  }

  // grad W[o][i] += sum_p delta[p][o] * a[p][i]; grad b[o] += sum_p delta[p][o].
  static void accumulate_weight_grad(const Layer& L, const std::vector<double>& delta,
                                     const double* a, std::size_t a_stride, std::size_t n,
                                     std::span<double> grad) {
    for (std::size_t p = 0; p < n; ++p) {
      const double* arow = a + p * a_stride;
      for (std::size_t o = 0; o < L.out; ++o) {
        const double d = delta[p * L.out + o];
        double* gw = &grad[L.w + o * L.in];
        for (std::size_t i = 0; i < L.in; ++i) gw[i] += d * arow[i];
        grad[L.b + o] += d;
      }
    }
  }

  // Applies the nonlinearity to z in place and writes the derivative.
  void activate(std::vector<double>& z, std::vector<double>& slope) const {
    slope.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double v = z[i];
      switch (config_.activation) {
        case Activation::kSilu: {
          const double s = 1.0 / (1.0 + std::exp(-v));
          z[i] = v * s;
          slope[i] = s * (1.0 + v * (1.0 - s));
          break;
        }
        case Activation::kTanh: {
          const double th = std::tanh(v);
          z[i] = th;
          slope[i] = 1.0 - th * th;
          break;
        }
        case Activation::kRelu:
          z[i] = v > 0.0 ? v : 0.0;
          slope[i] = v > 0.0 ? 1.0 : 0.0;
          break;
      }
    }
  }

  // out[p][o] = bias[o] + sum_i a[p][i] * W[o][i], summed in increasing i.
  static void dense(const Layer& L, std::span<const double> params, const double* a,
                    std::size_t n, std::vector<double>& wt, std::vector<double>& out) {
    wt.resize(L.in * L.out);  // transposed: in x out
    for (std::size_t o = 0; o < L.out; ++o) {
      for (std::size_t i = 0; i < L.in; ++i) wt[i * L.out + o] = params[L.w + o * L.in + i];
    }
    out.resize(n * L.out);
    for (std::size_t p = 0; p < n; ++p) {
      double* z = &out[p * L.out];
      for (std::size_t o = 0; o < L.out; ++o) z[o] = params[L.b + o];
      const double* arow = a + p * L.in;
      for (std::size_t i = 0; i < L.in; ++i) {
        const double ai = arow[i];
        const double* w = &wt[i * L.out];
        for (std::size_t o = 0; o < L.out; ++o) z[o] += ai * w[o];
      }
    }
  }

  VectorList run(std::span<const double> params, double t, const PointCloud& x,
                 const Condition& condition, Tape* tape) const {
    require(params.size() == parameter_count_, "parameter size mismatch");
    const std::vector<double> temb = time_embedding(t, config_.time_embed_dim);
    const std::size_t in0 = input_dim();
    const std::size_t n = x.size();
    const std::size_t n_hidden = layers_.size() - 1;

    Tape& tp = *tape;
    tp.time_features = temb;
    tp.points = n;
    tp.inputs.resize(n * in0);
    tp.acts.resize(n_hidden);
    tp.slopes.resize(n_hidden);

    const ConditionIndex cond_index(condition);
    for (std::size_t p = 0; p < n; ++p) {
      double* input = &tp.inputs[p * in0];
      input[0] = x[p].x;
      input[1] = x[p].y;
      input[2] = x[p].z;
      std::copy(temb.begin(), temb.end(), input + 3);
      if (condition_dim() > 0) {
        const ConditionFeatures cf = cond_index.features(x[p]);
        std::copy(cf.begin(), cf.end(), input + 3 + temb.size());
      }
    }

    // First layer: the time embedding and bias give a per-call constant.
    const Layer& first = layers_[0];
    const auto cols = per_point_columns();
    std::vector<double> first_const(first.out);
    std::vector<double> w_cols(cols.size() * first.out);  // cols x out
    for (std::size_t o = 0; o < first.out; ++o) {
      double s = params[first.b + o];
      const double* w = &params[first.w + o * first.in];
      for (std::size_t i = 0; i < temb.size(); ++i) s += w[3 + i] * temb[i];
      first_const[o] = s;
      for (std::size_t c = 0; c < cols.size(); ++c) w_cols[c * first.out + o] = w[cols[c]];
    }
    std::vector<double>& z0 = tp.acts[0];
    z0.resize(n * first.out);
    for (std::size_t p = 0; p < n; ++p) {
      double* z = &z0[p * first.out];
      const double* input = &tp.inputs[p * in0];
      std::copy(first_const.begin(), first_const.end(), z);
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const double v = input[cols[c]];
        const double* w = &w_cols[c * first.out];
        for (std::size_t o = 0; o < first.out; ++o) z[o] += v * w[o];
      }
    }
    activate(z0, tp.slopes[0]);

    for (std::size_t l = 1; l < n_hidden; ++l) {
      dense(layers_[l], params, tp.acts[l - 1].data(), n, tp.transposed, tp.acts[l]);
      activate(tp.acts[l], tp.slopes[l]);
    }

    std::vector<double>& u = tp.output;
    dense(layers_.back(), params, tp.acts[n_hidden - 1].data(), n, tp.transposed, u);
    VectorList out(n);
    for (std::size_t p = 0; p < n; ++p) {
      out[p] = {u[3 * p], u[3 * p + 1], u[3 * p + 2]};
      if (!is_finite(out[p])) throw Error("numeric overflow in field");
    }
    return out;
  }

  FieldConfig config_;
  std::vector<Layer> layers_;
  std::size_t parameter_count_ = 0;
};

/// One element of a training batch. `loss` maps the network output for
/// `points` to the loss report and its gradient with respect to that output.
struct BatchItem {
  double t = 0.0;
  const PointCloud* points = nullptr;
  Condition condition = Condition::null();
  std::function<TotalLoss(const VectorList&)> loss;
};

struct GradientResult {
  LossReport report;
  std::vector<double> grad;
};

/// Batch-mean loss and its exact gradient with respect to `params`.
inline GradientResult compute_gradient(const VectorFieldNet& net, std::span<const double> params,
                                       std::span<const BatchItem> batch) {
  require(!batch.empty(), "empty batch");
  GradientResult r;
  r.grad.assign(net.parameter_count(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  thread_local VectorFieldNet::Tape tape;
  for (const auto& item : batch) {
    const VectorList u = net.forward_with_tape(params, item.t, *item.points, item.condition, tape);
    TotalLoss loss = item.loss(u);
    for (auto& g : loss.grad) g *= inv_b;
    net.backprop(params, tape, loss.grad, r.grad);
    r.report.nfm += inv_b * loss.report.nfm;
    r.report.cdm += inv_b * loss.report.cdm;
    r.report.total += inv_b * loss.report.total;
  }
  return r;
}

/// Computes the batch gradient and applies one Adam step. On a non-finite
/// loss or gradient, throws and leaves both states untouched.
inline LossReport backward_and_step(const VectorFieldNet& net, ModelState& state,
                                    OptimizerState& opt, std::span<const BatchItem> batch) {
  require(state.weights.size() == net.parameter_count(), "model state size mismatch");
  require(opt.m.size() == state.weights.size() && opt.v.size() == state.weights.size(),
          "optimizer state size mismatch");
  GradientResult g = compute_gradient(net, state.weights, batch);
  const bool finite = std::isfinite(g.report.total) &&
                      std::all_of(g.grad.begin(), g.grad.end(),
                                  [](double v) { return std::isfinite(v); });
  if (!finite) throw Error("non-finite gradient");

  const auto step = static_cast<double>(state.step_count + 1);
  const double c1 = 1.0 - std::pow(opt.beta1, step);
  const double c2 = 1.0 - std::pow(opt.beta2, step);
  for (std::size_t i = 0; i < g.grad.size(); ++i) {
    const double gi = g.grad[i];
    opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * gi;
    opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * gi * gi;
    const double m_hat = opt.m[i] / c1;
    const double v_hat = opt.v[i] / c2;
    state.weights[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.eps);
  }
  ++state.step_count;
  return g.report;
}

inline constexpr double kDefaultEmaDecay = 0.9999;

/// ema <- decay * ema + (1 - decay) * weights.
inline void ema_update(ModelState& state, double decay = kDefaultEmaDecay) {
  require(decay >= 0.0 && decay <= 1.0, "EMA decay outside [0, 1]");
  require(state.ema_weights.size() == state.weights.size(), "EMA shape mismatch");
  for (std::size_t i = 0; i < state.weights.size(); ++i) {
    state.ema_weights[i] = decay * state.ema_weights[i] + (1.0 - decay) * state.weights[i];
  }
}

}  // namespace liflow
