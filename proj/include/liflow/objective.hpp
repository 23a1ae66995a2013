#pragma once

#include <cmath>
#include <string>

#include "liflow/coupling.hpp"
#include "liflow/geometry.hpp"
#include "liflow/kdtree.hpp"

namespace liflow {

struct LossWeights {
  double lambda_nfm = 1.0;
  double lambda_cdm = 0.1;

  void validate() const {
    require(lambda_nfm >= 0.0 && lambda_cdm >= 0.0, "loss weights must be >= 0");
    require(lambda_nfm > 0.0 || lambda_cdm > 0.0, "loss weights are both zero");
  }
};

struct LossReport {
  double nfm = 0.0;
  double cdm = 0.0;
  double total = 0.0;
};

enum class CdmReduction {
  kSum,            // raw two-sided sum of squared NN distances
  kMeanOverPoints  // the sum divided by (|x0| + |x1|)
};

struct ObjectiveConfig {
  LossWeights weights;
  CdmReduction cdm_reduction = CdmReduction::kMeanOverPoints;
  // Apply the prediction as x_t + (1 - t) u instead of x0 + u.
  bool cdm_from_xt = false;
};

struct LossWithGrad {
  double value = 0.0;
  VectorList grad;  // d value / d u_pred
};

/// Mean over points of the squared residual between prediction and target.
inline LossWithGrad nfm_loss_with_grad(const VectorList& u_pred,
                                       const VectorList& v_target) {
  require(u_pred.size() == v_target.size(), "length mismatch in nfm loss");
  LossWithGrad out;
  out.grad.resize(u_pred.size());
  if (u_pred.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(u_pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < u_pred.size(); ++i) {
    const Vec3 r = u_pred[i] - v_target[i];
    sum += dot(r, r);
    out.grad[i] = (2.0 * inv_n) * r;
  }
  out.value = sum * inv_n;
  return out;
}

inline double nfm_loss(const VectorList& u_pred, const VectorList& v_target) {
  return nfm_loss_with_grad(u_pred, v_target).value;
}

/// Two-sided Chamfer sum between `moved` and `target` together with its
/// subgradient with respect to the positions of `moved`.
inline LossWithGrad chamfer_with_grad(const PointCloud& moved, const PointCloud& target) {
  require(!moved.empty() && !target.empty(), "empty cloud in chamfer");
  LossWithGrad out;
  out.grad.assign(moved.size(), Vec3{});
  const KdTree target_tree(target.points());
  const KdTree moved_tree(moved.points());
  double sum = 0.0;
  for (std::size_t i = 0; i < moved.size(); ++i) {
    const Neighbor nn = target_tree.nearest(moved[i]);
    sum += nn.squared_distance;
    out.grad[i] += 2.0 * (moved[i] - target[nn.index]);
  }
  for (std::size_t j = 0; j < target.size(); ++j) {
    const Neighbor nn = moved_tree.nearest(target[j]);
    sum += nn.squared_distance;
    out.grad[nn.index] += 2.0 * (moved[nn.index] - target[j]);
  }
  out.value = sum;
  return out;
}

/// Chamfer matching loss: CD(x0 + u_pred, x1) under the chosen reduction.
inline LossWithGrad cdm_loss_with_grad(const PointCloud& x0, const VectorList& u_pred,
                                       const PointCloud& x1,
                                       CdmReduction reduction = CdmReduction::kSum) {
  require(x0.size() == u_pred.size(), "length mismatch in cdm loss");
  PointCloud moved = x0;
  for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += u_pred[i];
  LossWithGrad out = chamfer_with_grad(moved, x1);
  if (reduction == CdmReduction::kMeanOverPoints) {
    const double scale = 1.0 / static_cast<double>(x0.size() + x1.size());
    out.value *= scale;
    for (auto& g : out.grad) g *= scale;
  }
  return out;
}

inline double cdm_loss(const PointCloud& x0, const VectorList& u_pred, const PointCloud& x1,
                       CdmReduction reduction = CdmReduction::kSum) {
  return cdm_loss_with_grad(x0, u_pred, x1, reduction).value;
}

struct TotalLoss {
  LossReport report;
  VectorList grad;  // d total / d u_pred
};

/// Weighted sum of the flow-matching and Chamfer-matching terms.
inline TotalLoss total_loss_with_grad(const FlowSample& sample, const VectorList& u_pred,
                                      const ObjectiveConfig& config) {
  config.weights.validate();
  require(u_pred.size() == sample.x0.size(), "prediction size does not match sample");
  const double lnfm = config.weights.lambda_nfm;
  const double lcdm = config.weights.lambda_cdm;

  TotalLoss out;
  out.grad.assign(u_pred.size(), Vec3{});
  const LossWithGrad nfm = nfm_loss_with_grad(u_pred, sample.v_target);
  out.report.nfm = nfm.value;
  for (std::size_t i = 0; i < u_pred.size(); ++i) out.grad[i] += lnfm * nfm.grad[i];

  if (config.cdm_from_xt) {
    const double s = 1.0 - sample.t;
    VectorList scaled(u_pred.size());
    for (std::size_t i = 0; i < u_pred.size(); ++i) scaled[i] = s * u_pred[i];
    const LossWithGrad cdm =
        cdm_loss_with_grad(sample.x_t, scaled, sample.x1, config.cdm_reduction);
    out.report.cdm = cdm.value;
    for (std::size_t i = 0; i < u_pred.size(); ++i) out.grad[i] += (lcdm * s) * cdm.grad[i];
  } else {
    const LossWithGrad cdm =
        cdm_loss_with_grad(sample.x0, u_pred, sample.x1, config.cdm_reduction);
    out.report.cdm = cdm.value;
    for (std::size_t i = 0; i < u_pred.size(); ++i) out.grad[i] += lcdm * cdm.grad[i];
  }
  out.report.total = lnfm * out.report.nfm + lcdm * out.report.cdm;
  return out;
}

inline LossReport total_loss(const FlowSample& sample, const VectorList& u_pred,
                             const LossWeights& weights) {
  ObjectiveConfig config;
  config.weights = weights;
  return total_loss_with_grad(sample, u_pred, config).report;
}

}  // namespace liflow
