#include <gtest/gtest.h>

#include <random>

#include "jdp/errors.hpp"
#include "jdp/kernels/kernels.hpp"
#include "test_util.hpp"

namespace jdp {
namespace {

TEST(CoreParams, RadiusFormula) {
  const DomainSpec spec{4, 3, 8, 2.0, 6.0};
  EXPECT_DOUBLE_EQ(radius(spec), std::sqrt(4 * 4.0 + 36.0));
  EXPECT_DOUBLE_EQ(spec.radius_x(), 1.0);
  EXPECT_DOUBLE_EQ(spec.radius_u(), 3.0);
  EXPECT_EQ(spec.total_dim(), 4u * 3 + 8);
}

TEST(CoreParams, ValidateRejectsBadDomains) {
  EXPECT_THROW((DomainSpec{0, 1, 1, 1.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((DomainSpec{1, 1, 0, 1.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((DomainSpec{1, 1, 1, -1.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((DomainSpec{1, 1, 1, 1.0, 0.0}.validate()), ConfigError);
  EXPECT_NO_THROW((DomainSpec{1, 0, 1, 0.0, 1.0}.validate()));
}

TEST(CoreParams, BlockLayout) {
  PartitionedParams p(3, 2, 4);
  EXPECT_EQ(p.size(), 10u);
  p.x(1)[0] = 5.0;
  p.u()[3] = 7.0;
  EXPECT_EQ(p.values()[2], 5.0);
  EXPECT_EQ(p.values()[9], 7.0);
}

TEST(CoreParams, ProjectionIsIdempotentAndLandsInDomain) {
  std::mt19937_64 rng(3);
  const DomainSpec spec{3, 2, 5, 1.0, 2.0};
  for (int trial = 0; trial < 200; ++trial) {
    PartitionedParams p(3, 2, 5);
    const auto v = testing::random_vector(rng, p.size(), 3.0);
    std::copy(v.begin(), v.end(), p.values().begin());
    const auto once = project(p, spec);
    EXPECT_TRUE(in_domain(once, spec));
    EXPECT_EQ(project(once, spec), once);
  }
}

TEST(CoreParams, ProjectionIsNonExpansive) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = testing::random_vector(rng, 6, 2.0);
    auto b = testing::random_vector(rng, 6, 2.0);
    const double before = kernels::distance(a, b);
    project_to_ball(a, 1.0);
    project_to_ball(b, 1.0);
    EXPECT_LE(kernels::distance(a, b), before + 1e-12);
  }
}

TEST(CoreParams, ApplyStepTouchesOnlyOwnerAndShared) {
  const DomainSpec spec{3, 2, 2, 10.0, 10.0};
  PartitionedParams p = PartitionedParams::zeros(spec);
  auto g = BlockGradient::for_owner(1, 2, 2);
  g.grad_x = {1.0, 2.0};
  g.grad_u = {-1.0, 0.5};
  const auto q = apply_step(p, g, 0.5, spec);
  EXPECT_EQ(q.x(0)[0], 0.0);
  EXPECT_EQ(q.x(2)[1], 0.0);
  EXPECT_DOUBLE_EQ(q.x(1)[0], -0.5);
  EXPECT_DOUBLE_EQ(q.x(1)[1], -1.0);
  EXPECT_DOUBLE_EQ(q.u()[0], 0.5);
  EXPECT_DOUBLE_EQ(q.u()[1], -0.25);
}

TEST(CoreParams, ApplyStepProjects) {
  const DomainSpec spec{1, 1, 1, 2.0, 2.0};
  PartitionedParams p = PartitionedParams::zeros(spec);
  auto g = BlockGradient::for_owner(0, 1, 1);
  g.grad_x = {-10.0};
  g.grad_u = {10.0};
  const auto q = apply_step(p, g, 1.0, spec);
  EXPECT_DOUBLE_EQ(q.x(0)[0], 1.0);
  EXPECT_DOUBLE_EQ(q.u()[0], -1.0);
}

TEST(CoreParams, ApplyStepRejectsNonPositiveEta) {
  const DomainSpec spec{1, 1, 1, 2.0, 2.0};
  const auto g = BlockGradient::for_owner(0, 1, 1);
  EXPECT_THROW(apply_step(PartitionedParams::zeros(spec), g, 0.0, spec), ConfigError);
  EXPECT_THROW(apply_step(PartitionedParams::zeros(spec), g, -1.0, spec), ConfigError);
}

TEST(CoreParams, FullGradientEmbedding) {
  const DomainSpec spec{2, 1, 1, 2.0, 2.0};
  auto g = BlockGradient::for_owner(1, 1, 1);
  g.grad_x = {3.0};
  g.grad_u = {4.0};
  EXPECT_EQ(g.embed(spec), (std::vector<double>{0.0, 3.0, 4.0}));
  auto all = BlockGradient::for_all(2, 1, 1);
  all.grad_x = {1.0, 2.0};
  all.grad_u = {5.0};
  EXPECT_EQ(all.embed(spec), (std::vector<double>{1.0, 2.0, 5.0}));
}

TEST(CoreParams, DimensionMismatchIsAnError) {
  const DomainSpec spec{2, 1, 1, 2.0, 2.0};
  auto g = BlockGradient::for_owner(0, 2, 1);
  EXPECT_THROW(apply_step(PartitionedParams::zeros(spec), g, 0.1, spec), ConfigError);
}

}  // namespace
}  // namespace jdp
