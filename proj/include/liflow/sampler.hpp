#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "liflow/coupling.hpp"
#include "liflow/field.hpp"

namespace liflow {

struct SamplerConfig {
  std::size_t steps = 10;
  double guidance_weight = 6.0;
  bool use_ema = true;
  bool record_trajectory = false;

  void validate() const {
    require(steps >= 1, "sampler steps must be >= 1");
    require(std::isfinite(guidance_weight), "guidance weight must be finite");
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<PointCloud> states;  // empty unless recording
  PointCloud final_state;
};

/// Any velocity field u(t, X) used by the integrator.
using FieldFunction = std::function<VectorList(double, const PointCloud&)>;

/// Classifier-free guided field: u(∅) + w (u(P) - u(∅)), from exactly two
/// network evaluations.
inline VectorList guided_field(const VectorFieldNet& net, std::span<const double> params,
                               double t, const PointCloud& x, const PointCloud& scan,
                               double w) {
  const VectorList uncond = net.forward(params, t, x, Condition::null());
  VectorList cond = net.forward(params, t, x, Condition::of(scan));
  // a + (b - a) is not always b in floating point; keep the endpoints exact.
  if (w == 1.0) return cond;
  if (w == 0.0) return uncond;
  VectorList out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = uncond[i] + w * (cond[i] - uncond[i]);
  }
  return out;
}

/// Forward Euler from t = 0 to t = 1 with h = 1/steps, evaluating the field
/// at the left end of every step.
inline Trajectory euler_integrate(const FieldFunction& field, const PointCloud& x0,
                                  std::size_t steps, bool record = false) {
  require(steps >= 1, "sampler steps must be >= 1");
  const double h = 1.0 / static_cast<double>(steps);
  Trajectory traj;
  PointCloud x = x0;
  traj.times.push_back(0.0);
  if (record) traj.states.push_back(x);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    const VectorList u = field(t, x);
    require(u.size() == x.size(), "field changed the point count");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += h * u[i];
    if (!x.all_finite()) {
      throw Error("non-finite state at integration step " + std::to_string(k));
    }
    // The last time is pinned to 1 rather than accumulated.
    traj.times.push_back(k + 1 == steps ? 1.0 : static_cast<double>(k + 1) * h);
    if (record) traj.states.push_back(x);
  }
  traj.final_state = std::move(x);
  return traj;
}

inline Trajectory euler_integrate(const VectorFieldNet& net, const ModelState& state,
                                  const PointCloud& x0, const PointCloud& scan,
                                  const SamplerConfig& config) {
  config.validate();
  const std::vector<double>& params = config.use_ema ? state.ema_weights : state.weights;
  FieldFunction field = [&](double t, const PointCloud& x) {
    return guided_field(net, params, t, x, scan, config.guidance_weight);
  };
  return euler_integrate(field, x0, config.steps, config.record_trajectory);
}

/// Scan -> noisy replicated initial cloud -> integrated completion.
inline Trajectory complete_scene(const VectorFieldNet& net, const ModelState& state,
                                 const PointCloud& scan, std::size_t k,
                                 const NoiseConfig& noise, const SamplerConfig& config) {
  require(!scan.empty(), "empty scan");
  const PointCloud x0 = init_noisy(scan, k, noise);
  return euler_integrate(net, state, x0, scan, config);
}

}  // namespace liflow
