#include <gtest/gtest.h>

#include <cmath>

#include "jdp/errors.hpp"
#include "jdp/kernels/kernels.hpp"
#include "jdp/optimizers.hpp"
#include "test_util.hpp"

namespace jdp {
namespace {

OptimizerConfig base_config(Paradigm paradigm, std::uint64_t T) {
  OptimizerConfig cfg;
  cfg.paradigm = paradigm;
  cfg.T = T;
  cfg.seed_sampling = 11;
  cfg.seed_noise = 12;
  cfg.seed_init = 13;
  if (paradigm == Paradigm::kJointDp || paradigm == Paradigm::kFullDp || paradigm == Paradigm::kSmoothJointDp) {
    cfg.privacy = PrivacySpec{1.0, 1e-5, PrivacyLevel::kRecord};
  }
  return cfg;
}

TEST(Optimizers, SingleIterationReturnsInit) {
  const auto p = testing::small_problem(3, 8, 2, 2, 3, 1);
  const auto model = LossModel::shared_mean_norm();
  for (auto paradigm : {Paradigm::kCollabNoDp, Paradigm::kJointDp, Paradigm::kFullDp}) {
    for (auto init : {InitPolicy::kOrigin, InitPolicy::kRandomInDomain}) {
      auto cfg = base_config(paradigm, 1);
      cfg.init = init;
      const auto result = train(p.fed, model, p.domain, cfg);
      EXPECT_EQ(result.final_params, initial_params(p.domain, init, cfg.seed_init));
    }
  }
}

TEST(Optimizers, ZeroNoiseReducesToRsgd) {
  const auto p = testing::small_problem(3, 8, 2, 2, 3, 2);
  const auto model = LossModel::shared_mean_norm();
  auto plain = base_config(Paradigm::kCollabNoDp, 500);
  plain.eta = 0.05;
  const auto reference = train(p.fed, model, p.domain, plain);
  for (auto paradigm : {Paradigm::kJointDp, Paradigm::kFullDp}) {
    auto cfg = base_config(paradigm, 500);
    cfg.eta = 0.05;
    cfg.sigma_override = 0.0;
    EXPECT_EQ(train(p.fed, model, p.domain, cfg).final_params, reference.final_params);
  }
}

TEST(Optimizers, DeterministicUnderSeeds) {
  const auto p = testing::small_problem(3, 8, 2, 2, 3, 3);
  const auto model = LossModel::shared_mean_norm();
  for (auto paradigm : {Paradigm::kPerSilo, Paradigm::kCollabNoDp, Paradigm::kJointDp, Paradigm::kFullDp}) {
    const auto cfg = base_config(paradigm, 900);
    EXPECT_EQ(train(p.fed, model, p.domain, cfg).final_params, train(p.fed, model, p.domain, cfg).final_params);
  }
  auto a = base_config(Paradigm::kJointDp, 900);
  auto b = a;
  b.seed_noise = 99;
  EXPECT_NE(train(p.fed, model, p.domain, a).final_params, train(p.fed, model, p.domain, b).final_params);
}

TEST(Optimizers, IteratesStayInDomain) {
  const auto p = testing::small_problem(4, 8, 2, 3, 3, 4, 0.5, 1.0);
  const auto model = LossModel::shared_mean_norm();
  for (auto paradigm : {Paradigm::kCollabNoDp, Paradigm::kJointDp, Paradigm::kFullDp}) {
    auto cfg = base_config(paradigm, 300);
    cfg.eta = 1.0;  // large steps hit the boundary
    cfg.sigma_override = paradigm == Paradigm::kCollabNoDp ? std::nullopt : std::optional<double>(3.0);
    bool all_inside = true;
    cfg.on_iterate = [&](std::uint64_t, const PartitionedParams& x) { all_inside &= in_domain(x, p.domain, 1e-9); };
    const auto result = train(p.fed, model, p.domain, cfg);
    EXPECT_TRUE(all_inside);
    EXPECT_TRUE(in_domain(result.final_params, p.domain, 1e-9));
  }
}

TEST(Optimizers, SingleOwnerPerSiloMatchesCollaboration) {
  const auto p = testing::small_problem(1, 16, 1, 2, 3, 5);
  const auto model = LossModel::shared_mean_norm();
  auto silo = base_config(Paradigm::kPerSilo, 400);
  auto collab = base_config(Paradigm::kCollabNoDp, 400);
  const auto a = train(p.fed, model, p.domain, silo);
  const auto b = train(p.fed, model, p.domain, collab);
  EXPECT_EQ(a.T, 400u);
  EXPECT_DOUBLE_EQ(a.eta, b.eta);
  const double ea = empirical_loss(model, a.view(), p.fed).value;
  const double eb = empirical_loss(model, b.view(), p.fed).value;
  EXPECT_NEAR(ea, eb, 0.05);
}

TEST(Optimizers, PerSiloUsesTOverNSquaredSteps) {
  const auto p = testing::small_problem(3, 8, 1, 2, 3, 6);
  const auto cfg = base_config(Paradigm::kPerSilo, 900);
  const auto result = train(p.fed, LossModel::shared_mean_norm(), p.domain, cfg);
  EXPECT_EQ(result.T, 100u);
  EXPECT_EQ(result.silo_shared.size(), 3u);
}

TEST(Optimizers, DefaultEtaFormula) {
  EXPECT_DOUBLE_EQ(default_eta(2.0, 1.0, 100, 0.0, 0.0), 0.2);
  EXPECT_DOUBLE_EQ(default_eta(2.0, 1.0, 100, 3.0, 1.0), 0.1);
  const auto p = testing::small_problem(3, 8, 2, 2, 3, 7);
  const auto model = LossModel::shared_mean_norm();
  const auto cfg = base_config(Paradigm::kJointDp, 400);
  const auto result = train(p.fed, model, p.domain, cfg);
  const double sigma = resolve_sigma(p.fed, model, cfg);
  EXPECT_EQ(result.sigma, sigma);
  EXPECT_DOUBLE_EQ(result.eta, default_eta(radius(p.domain), model.lipschitz, 400, 3.0, sigma));
  const auto full = train(p.fed, model, p.domain, base_config(Paradigm::kFullDp, 400));
  EXPECT_DOUBLE_EQ(full.eta, default_eta(radius(p.domain), model.lipschitz, 400, 5.0, sigma));
}

TEST(Optimizers, DefaultT) {
  const ProblemSpec problem{4, 8, 2, 3, 0};
  const PrivacySpec privacy{1.0, 1e-5, PrivacyLevel::kUser};
  EXPECT_EQ(default_T(Paradigm::kJointDp, problem, privacy), 1024u);
  EXPECT_EQ(default_T(Paradigm::kSmoothJointDp, problem, privacy),
            static_cast<std::uint64_t>(std::ceil(16.0 / std::log(1e5))));
}

TEST(Optimizers, SmoothRequirements) {
  const auto p = testing::small_problem(3, 8, 1, 2, 3, 8);
  auto cfg = base_config(Paradigm::kSmoothJointDp, 10);
  EXPECT_THROW(train(p.fed, LossModel::shared_mean_huber(0.2), p.domain, cfg), ConfigError);
  const auto q = testing::small_problem(3, 8, 2, 2, 3, 8);
  EXPECT_THROW(train(q.fed, LossModel::shared_mean_norm(), q.domain, cfg), ConfigError);
  EXPECT_NO_THROW(train(q.fed, LossModel::shared_mean_huber(0.2), q.domain, cfg));
}

// Owner-sampled projected gradient descent on the full owner batch, written
// independently of the optimizer.
PartitionedParams full_batch_reference(const testing::SmallProblem& p, const LossModel& model,
                                       const OptimizerConfig& cfg, double eta) {
  PartitionedParams params = initial_params(p.domain, cfg.init, cfg.seed_init);
  PartitionedParams sum = PartitionedParams::zeros(p.domain);
  RandomStream sampling(cfg.seed_sampling);
  const std::size_t m = p.fed.records_per_owner();
  for (std::uint64_t t = 0; t < cfg.T; ++t) {
    for (std::size_t v = 0; v < sum.size(); ++v) sum.values()[v] += params.values()[v];
    const std::size_t j = sampling.uniform_index(p.domain.n);
    auto g = BlockGradient::for_owner(j, p.domain.k, p.domain.ell);
    for (std::size_t i = 0; i < m; ++i) {
      const auto gi = grad(model, j, params.x(j), params.u(), p.fed.record(j, i));
      for (std::size_t a = 0; a < g.grad_x.size(); ++a) g.grad_x[a] += gi.grad_x[a] / m;
      for (std::size_t a = 0; a < g.grad_u.size(); ++a) g.grad_u[a] += gi.grad_u[a] / m;
    }
    params = apply_step(params, g, eta, p.domain);
  }
  for (auto& v : sum.values()) v /= static_cast<double>(cfg.T);
  return sum;
}

TEST(Optimizers, NoiselessSmoothEqualsFullBatchDescent) {
  // One record per user keeps every user gradient within 2 tau of the mean.
  const auto p = testing::small_problem(3, 4, 4, 2, 3, 9);
  const auto model = LossModel::shared_mean_huber(0.3);
  auto cfg = base_config(Paradigm::kSmoothJointDp, 200);
  cfg.private_mean_noiseless = true;
  cfg.init = InitPolicy::kRandomInDomain;
  const auto result = train(p.fed, model, p.domain, cfg);
  const auto reference = full_batch_reference(p, model, cfg, result.eta);
  for (std::size_t v = 0; v < reference.size(); ++v) {
    EXPECT_NEAR(result.final_params.values()[v], reference.values()[v], 1e-9);
  }
}

TEST(Optimizers, SmoothSharedOnlyPrivatization) {
  const auto p = testing::small_problem(3, 4, 4, 2, 3, 10);
  const auto model = LossModel::shared_mean_huber(0.3);
  auto cfg = base_config(Paradigm::kSmoothJointDp, 200);
  cfg.private_mean_noiseless = true;
  cfg.privatize_personalized = false;
  const auto result = train(p.fed, model, p.domain, cfg);
  const auto reference = full_batch_reference(p, model, cfg, result.eta);
  for (std::size_t v = 0; v < reference.size(); ++v) {
    EXPECT_NEAR(result.final_params.values()[v], reference.values()[v], 1e-9);
  }
}

TEST(Optimizers, TraceRecordsEveryInterval) {
  const auto p = testing::small_problem(3, 8, 2, 2, 3, 11);
  auto cfg = base_config(Paradigm::kCollabNoDp, 100);
  cfg.trace_every = 10;
  const auto result = train(p.fed, LossModel::shared_mean_norm(), p.domain, cfg);
  ASSERT_EQ(result.trace.size(), 10u);
  EXPECT_EQ(result.trace[3].iteration, 30u);
}

TEST(Optimizers, ConfigValidation) {
  const auto p = testing::small_problem(3, 8, 2, 2, 3, 12);
  const auto model = LossModel::shared_mean_norm();
  auto cfg = base_config(Paradigm::kJointDp, 10);
  cfg.privacy.level = PrivacyLevel::kNone;
  EXPECT_THROW(train(p.fed, model, p.domain, cfg), ConfigError);
  auto bad_eta = base_config(Paradigm::kCollabNoDp, 10);
  bad_eta.eta = -1.0;
  EXPECT_THROW(train(p.fed, model, p.domain, bad_eta), ConfigError);
  auto zero_T = base_config(Paradigm::kCollabNoDp, 0);
  EXPECT_THROW(train(p.fed, model, p.domain, zero_T), ConfigError);
  EXPECT_THROW(train(p.fed, LossModel::logistic(1.0), p.domain, base_config(Paradigm::kCollabNoDp, 10)),
               ConfigError);
}

}  // namespace
}  // namespace jdp
