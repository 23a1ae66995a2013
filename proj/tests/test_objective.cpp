#include <gtest/gtest.h>

#include <random>

#include "liflow/objective.hpp"
#include "oracles.hpp"

using namespace liflow;

namespace {

VectorList random_vectors(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  VectorList v;
  for (const auto& p : oracle::random_cloud(rng, n, -scale, scale)) v.push_back(p);
  return v;
}

}  // namespace

TEST(NfmLoss, Examples) {
  const VectorList v{{1, 2, 3}, {0, -1, 0}};
  EXPECT_EQ(nfm_loss(v, v), 0.0);
  EXPECT_EQ(nfm_loss({{1, 0, 0}}, {{0, 0, 0}}), 1.0);
  try {
    nfm_loss(v, {{1, 2, 3}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "length mismatch in nfm loss");
  }
}

TEST(NfmLoss, MatchesElementwiseRecompute) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const VectorList u = random_vectors(rng, 1 + trial * 5);
    const VectorList v = random_vectors(rng, u.size());
    double ref = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double dx = u[i].x - v[i].x, dy = u[i].y - v[i].y, dz = u[i].z - v[i].z;
      ref += dx * dx + dy * dy + dz * dz;
    }
    ref /= static_cast<double>(u.size());
    EXPECT_NEAR(nfm_loss(u, v), ref, 1e-12 * ref);
    EXPECT_GT(nfm_loss(u, v), 0.0);
  }
}

TEST(NfmLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorList u = random_vectors(rng, 12);
    const VectorList v = random_vectors(rng, 12);
    const auto fd = oracle::finite_difference(
        [&](const std::vector<double>& x) { return nfm_loss(oracle::unflatten(x), v); },
        oracle::flatten(u), 1e-4);
    EXPECT_LT(oracle::relative_error(oracle::flatten(nfm_loss_with_grad(u, v).grad), fd), 1e-4);
  }
}

TEST(CdmLoss, Examples) {
  EXPECT_DOUBLE_EQ(cdm_loss(PointCloud{{0, 0, 0}}, {{0, 0, 0}}, PointCloud{{1, 0, 0}}), 2.0);
  // Mean reduction divides by |x0| + |x1|.
  EXPECT_DOUBLE_EQ(cdm_loss(PointCloud{{0, 0, 0}}, {{0, 0, 0}}, PointCloud{{1, 0, 0}},
                            CdmReduction::kMeanOverPoints),
                   1.0);
  // Exact NN displacements onto a bijective map: perfect transport.
  const PointCloud x0{{0, 0, 0}, {5, 0, 0}};
  const PointCloud x1{{0.1, 0, 0}, {5, 0.2, 0}};
  const FlowSample s = nn_flow(x0, x1, 0.0);
  EXPECT_EQ(cdm_loss(x0, s.v_target, x1), 0.0);
  EXPECT_THROW(cdm_loss(x0, {{0, 0, 0}}, x1), Error);
  EXPECT_THROW(cdm_loss(x0, s.v_target, PointCloud{}), Error);
}

TEST(CdmLoss, InvariantUnderTargetPermutation) {
  std::mt19937_64 rng(9);
  const PointCloud x0 = oracle::random_cloud(rng, 30);
  const VectorList u = random_vectors(rng, 30, 0.1);
  PointCloud x1 = oracle::random_cloud(rng, 40);
  const double before = cdm_loss(x0, u, x1);
  std::reverse(x1.mutable_points().begin(), x1.mutable_points().end());
  EXPECT_NEAR(cdm_loss(x0, u, x1), before, 1e-12 * before);
  EXPECT_GE(before, 0.0);
}

TEST(CdmLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (auto reduction : {CdmReduction::kSum, CdmReduction::kMeanOverPoints}) {
    for (int trial = 0; trial < 20; ++trial) {
      const PointCloud x0 = oracle::random_cloud(rng, 10);
      const PointCloud x1 = oracle::random_cloud(rng, 14);
      const VectorList u = random_vectors(rng, 10, 0.3);
      const auto fd = oracle::finite_difference(
          [&](const std::vector<double>& x) {
            return cdm_loss(x0, oracle::unflatten(x), x1, reduction);
          },
          oracle::flatten(u), 1e-6);
      const auto analytic = oracle::flatten(cdm_loss_with_grad(x0, u, x1, reduction).grad);
      EXPECT_LT(oracle::relative_error(analytic, fd), 1e-4) << "trial " << trial;
    }
  }
}

TEST(TotalLoss, WeightsCombine) {
  std::mt19937_64 rng(23);
  const PointCloud x0 = oracle::random_cloud(rng, 20);
  const PointCloud x1 = oracle::random_cloud(rng, 25);
  const FlowSample s = nn_flow(x0, x1, 0.4);
  const VectorList u = random_vectors(rng, 20, 0.5);

  const LossReport only_nfm = total_loss(s, u, {1.0, 0.0});
  EXPECT_EQ(only_nfm.total, only_nfm.nfm);
  const LossReport only_cdm = total_loss(s, u, {0.0, 1.0});
  EXPECT_EQ(only_cdm.total, only_cdm.cdm);
  const LossReport both = total_loss(s, u, LossWeights{});
  EXPECT_NEAR(both.total, both.nfm + 0.1 * both.cdm, 1e-12 * both.total);
  EXPECT_EQ(LossWeights{}.lambda_nfm, 1.0);
  EXPECT_EQ(LossWeights{}.lambda_cdm, 0.1);
  EXPECT_NEAR(both.cdm,
              cdm_loss(x0, u, x1) / static_cast<double>(x0.size() + x1.size()), 1e-12);
  EXPECT_THROW(total_loss(s, u, {0.0, 0.0}), Error);
  EXPECT_THROW(total_loss(s, u, {-1.0, 0.1}), Error);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(29);
  for (bool from_xt : {false, true}) {
    ObjectiveConfig config;
    config.cdm_from_xt = from_xt;
    for (int trial = 0; trial < 20; ++trial) {
      const PointCloud x0 = oracle::random_cloud(rng, 12);
      const PointCloud x1 = oracle::random_cloud(rng, 16);
      const FlowSample s = nn_flow(x0, x1, std::uniform_real_distribution<double>(0, 1)(rng));
      const VectorList u = random_vectors(rng, 12, 0.3);
      const auto fd = oracle::finite_difference(
          [&](const std::vector<double>& x) {
            return total_loss_with_grad(s, oracle::unflatten(x), config).report.total;
          },
          oracle::flatten(u), 1e-6);
      const auto analytic = oracle::flatten(total_loss_with_grad(s, u, config).grad);
      EXPECT_LT(oracle::relative_error(analytic, fd), 1e-4);
    }
  }
}

TEST(TotalLoss, CdmFromXtMovesTheInterpolant) {
  const PointCloud x0{{0, 0, 0}};
  const PointCloud x1{{1, 0, 0}};
  const FlowSample s = nn_flow(x0, x1, 0.5);
  ObjectiveConfig config;
  config.cdm_from_xt = true;
  config.cdm_reduction = CdmReduction::kSum;
  // x_t = 0.5, moved by 0.5 * u = 0.5 -> exactly on target.
  EXPECT_EQ(total_loss_with_grad(s, {{1, 0, 0}}, config).report.cdm, 0.0);
  config.cdm_from_xt = false;
  // x0 + u = 1 -> also on target.
  EXPECT_EQ(total_loss_with_grad(s, {{1, 0, 0}}, config).report.cdm, 0.0);
  EXPECT_DOUBLE_EQ(total_loss_with_grad(s, {{0.5, 0, 0}}, config).report.cdm, 0.5);
}
