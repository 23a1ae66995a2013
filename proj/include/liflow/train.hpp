#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

#include "liflow/coupling.hpp"
#include "liflow/field.hpp"
#include "liflow/objective.hpp"

namespace liflow {

struct TrainingCase {
  PointCloud scene;  // x1
  PointCloud scan;   // condition, and the source of x0
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  std::size_t max_steps = 0;  // 0: no cap
  std::uint64_t seed = 0;
  double p_null = 0.1;
  std::size_t k = 10;
  double noise_scale = 1.0;
  ObjectiveConfig objective;
  double ema_decay = kDefaultEmaDecay;

  void validate() const {
    require(batch_size >= 1, "batch size must be >= 1");
    require(k >= 1, "k must be >= 1");
    require(p_null >= 0.0 && p_null <= 1.0, "null probability outside [0, 1]");
    require(noise_scale >= 0.0, "noise scale must be >= 0");
    require(ema_decay >= 0.0 && ema_decay <= 1.0, "EMA decay outside [0, 1]");
    objective.weights.validate();
  }
};

struct StepLog {
  std::size_t step = 0;  // 1-based count of completed optimizer steps
  std::size_t epoch = 0;
  LossReport loss;
};

/// Draws the per-sample randomness (noise, time, condition) from `rng`,
/// builds the flow samples for `batch`, and performs one optimizer step
/// followed by the EMA update.
inline LossReport train_step(const VectorFieldNet& net, ModelState& state, OptimizerState& opt,
                             const std::vector<TrainingCase>& cases,
                             std::span<const std::size_t> batch, const TrainConfig& config,
                             Rng& rng) {
  std::vector<FlowSample> samples;
  samples.reserve(batch.size());
  for (std::size_t idx : batch) {
    const TrainingCase& c = cases[idx];
    const PointCloud x0 = init_noisy(c.scan, config.k, config.noise_scale, rng);
    const double t = sample_time(rng);
    const ConditionDraw cond = draw_condition(c.scan, config.p_null, rng);
    samples.push_back(nn_flow(x0, c.scene, t, cond.outcome));
  }
  std::vector<BatchItem> items;
  items.reserve(samples.size());
  for (const FlowSample& s : samples) {
    items.push_back({s.t, &s.x_t, s.condition, [&s, &config](const VectorList& u) {
                       return total_loss_with_grad(s, u, config.objective);
                     }});
  }
  const LossReport report = backward_and_step(net, state, opt, items);
  ema_update(state, config.ema_decay);
  return report;
}

/// Epoch schedule over `cases` with a per-epoch shuffle. Deterministic given
/// the config seed. `on_step` is invoked after every optimizer step.
inline void train(const VectorFieldNet& net, ModelState& state, OptimizerState& opt,
                  const std::vector<TrainingCase>& cases, const TrainConfig& config,
                  const std::function<void(const StepLog&)>& on_step = {}) {
  config.validate();
  if (config.epochs == 0) return;
  require(!cases.empty(), "no training cases");
  Rng rng(derive_seed(config.seed, 0));
  std::size_t step = 0;
  std::vector<std::size_t> order(cases.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, epoch + 1));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      if (config.max_steps != 0 && step >= config.max_steps) return;
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      const LossReport loss = train_step(net, state, opt, cases, batch, config, rng);
      ++step;
      if (on_step) on_step({step, epoch, loss});
    }
  }
}

}  // namespace liflow
