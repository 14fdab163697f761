#include <gtest/gtest.h>

#include "jdp/config.hpp"
#include "jdp/errors.hpp"

namespace jdp {
namespace {

const char* kBase = R"(
task: {kind: shared_mean, heterogeneity: 0.5, noise_scale: 0.1}
problem: {n: 4, m: 16, r: 2}
domain: {k: 2, ell: 3, d_x: 2, d_u: 2}
loss: {kind: shared_mean_norm}
optimizer: {paradigm: joint_dp, epsilon: 1, delta: 1.0e-5, level: record}
sweep: {m: [16, 32], epsilon: [0.5, 1]}
experiment: {repetitions: 3, eval_samples: 100, seed: 7}
output: {dir: out, csv: a.csv, log: a.jsonl}
)";

TEST(Config, ParsesAndDerives) {
  const auto c = parse_config_text(kBase);
  EXPECT_EQ(c.problem.n, 4u);
  EXPECT_EQ(c.domain.n, 4u);
  EXPECT_EQ(c.problem.record_dim, 5u);
  EXPECT_EQ(c.optimizer.paradigm, Paradigm::kJointDp);
  EXPECT_EQ(c.experiment.seed, 7u);
  ASSERT_EQ(c.sweep.size(), 2u);
  EXPECT_EQ(c.sweep[0].name, "m");
  EXPECT_EQ(c.output.csv, "a.csv");
}

TEST(Config, JsonRoundTripKeepsHash) {
  const auto c = parse_config_text(kBase);
  const auto again = config_from_json(nlohmann::ordered_json::parse(to_json(c).dump()));
  EXPECT_EQ(config_hash(c), config_hash(again));
  EXPECT_EQ(to_json(c).dump(), to_json(again).dump());
  EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Config, HashIgnoresOutputAndSweep) {
  auto c = parse_config_text(kBase);
  auto d = c;
  d.output.dir = "elsewhere";
  d.sweep.clear();
  d.experiment.jobs = 4;
  EXPECT_EQ(config_hash(c), config_hash(d));
  d.problem.m = 32;
  EXPECT_NE(config_hash(c), config_hash(d));
}

TEST(Config, ResolveT) {
  auto c = parse_config_text(kBase);
  bool capped = false;
  EXPECT_EQ(c.resolve_T(Paradigm::kJointDp, &capped), 64u * 64u);
  EXPECT_FALSE(capped);
  c.optimizer.T_cap = 100;
  EXPECT_EQ(c.resolve_T(Paradigm::kJointDp, &capped), 100u);
  EXPECT_TRUE(capped);
  c.optimizer.t_policy = TPolicy::kMn;
  EXPECT_EQ(c.resolve_T(Paradigm::kJointDp), 64u);
  c.optimizer.T = 5;
  EXPECT_EQ(c.resolve_T(Paradigm::kJointDp), 5u);
}

TEST(Config, WithAxis) {
  const auto c = parse_config_text(kBase);
  EXPECT_EQ(c.with_axis("m", 32).problem.m, 32u);
  EXPECT_EQ(c.with_axis("n", 6).domain.n, 6u);
  EXPECT_EQ(c.with_axis("ell", 7).problem.record_dim, 9u);
  EXPECT_EQ(c.with_axis("epsilon", 2).optimizer.privacy.epsilon, 2.0);
  const auto t = c.with_axis("T", 50);
  EXPECT_EQ(t.optimizer.t_policy, TPolicy::kFixed);
  EXPECT_EQ(t.resolve_T(Paradigm::kJointDp), 50u);
  EXPECT_THROW(c.with_axis("r", 3), ConfigError);
  EXPECT_THROW(c.with_axis("bogus", 1), ConfigError);
  const auto both = c.with_axes({{"m", 8}, {"r", 8}});
  EXPECT_EQ(both.problem.r, 8u);
}

TEST(Config, RejectsInvalidInput) {
  EXPECT_THROW(parse_config_text("task: {kind: shared_mean, typo: 1}"), ConfigError);
  EXPECT_THROW(parse_config_text("unknown_section: {}"), ConfigError);
  EXPECT_THROW(parse_config_text("problem: {n: -1}"), ConfigError);
  EXPECT_THROW(parse_config_text("problem: {n: 2.5}"), ConfigError);
  EXPECT_THROW(parse_config_text("problem: {m: 10, r: 3}"), ConfigError);
  EXPECT_THROW(parse_config_text("loss: {kind: logistic}"), ConfigError);
  EXPECT_THROW(parse_config_text("optimizer: {paradigm: joint_dp, level: none}"), ConfigError);
  EXPECT_THROW(parse_config_text("optimizer: {T_policy: fixed}"), ConfigError);
  EXPECT_THROW(parse_config_text("optimizer: {epsilon: 0}"), ConfigError);
  EXPECT_THROW(parse_config_text("sweep: {q: [1, 2]}"), ConfigError);
  EXPECT_THROW(parse_config_text("task: [1, 2"), ConfigError);
  EXPECT_THROW(parse_config_text("problem: {n: \"4\"}"), ConfigError);
  EXPECT_THROW(load_config_file("/nonexistent/config.yaml"), ConfigError);
}

TEST(Config, EmptyTextGivesDefaults) {
  const auto c = parse_config_text("");
  EXPECT_EQ(c.optimizer.paradigm, Paradigm::kJointDp);
  EXPECT_NO_THROW(config_hash(c));
}

TEST(Config, LogisticRecordDimension) {
  const auto c = parse_config_text(
      "task: {kind: logistic}\nloss: {kind: logistic}\ndomain: {k: 2, ell: 3, d_x: 2, d_u: 2}\n");
  EXPECT_EQ(c.problem.record_dim, 6u);
}

TEST(Config, SchemaTextMentionsEverySection) {
  const std::string schema = config_schema_text();
  for (const char* s : {"task", "problem", "domain", "loss", "optimizer", "sweep", "experiment", "output"}) {
    EXPECT_NE(schema.find(s), std::string::npos) << s;
  }
}

}  // namespace
}  // namespace jdp
