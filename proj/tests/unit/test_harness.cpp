#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "jdp/config.hpp"
#include "jdp/errors.hpp"
#include "jdp/harness.hpp"

namespace jdp {
namespace {

ExperimentConfig small_config() {
  return parse_config_text(R"(
task: {kind: shared_mean, heterogeneity: 0.5, noise_scale: 0.2}
problem: {n: 3, m: 8, r: 2}
domain: {k: 2, ell: 3, d_x: 2, d_u: 2}
loss: {kind: shared_mean_norm}
optimizer: {paradigm: joint_dp, epsilon: 1, delta: 1.0e-5, level: record}
experiment: {repetitions: 1, eval_samples: 200, seed: 5}
)");
}

std::string csv_of(const std::vector<RunReport>& rows) {
  std::ostringstream out;
  write_csv(out, rows, false);
  return out.str();
}

TEST(Harness, SeedsRoundTripAndDiffer) {
  const auto a = seeds_for(1, 0);
  EXPECT_EQ(RunSeeds::parse(a.to_string()), a);
  EXPECT_NE(a.data, seeds_for(1, 1).data);
  EXPECT_NE(a.data, seeds_for(2, 0).data);
  EXPECT_NE(a.sampling, a.noise);
  EXPECT_THROW(RunSeeds::parse("1/2/3"), FormatError);
}

TEST(Harness, CompareGivesOneRowPerParadigm) {
  const auto rows = compare_paradigms(small_config());
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].paradigm, Paradigm::kPerSilo);
  EXPECT_EQ(rows[1].paradigm, Paradigm::kCollabNoDp);
  EXPECT_EQ(rows[2].paradigm, Paradigm::kJointDp);
  EXPECT_EQ(rows[3].paradigm, Paradigm::kFullDp);
  for (const auto& row : rows) EXPECT_EQ(row.seeds, rows[0].seeds);
  EXPECT_TRUE(std::isinf(rows[1].epsilon));
  EXPECT_EQ(rows[1].sigma, 0.0);
  EXPECT_GT(rows[2].sigma, 0.0);
  const std::string csv = csv_of(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), csv_header());
}

TEST(Harness, RerunsAreByteIdentical) {
  const auto c = small_config();
  EXPECT_EQ(csv_of(compare_paradigms(c)), csv_of(compare_paradigms(c)));
}

TEST(Harness, ParallelMatchesSerial) {
  auto c = small_config();
  c.experiment.repetitions = 3;
  const std::string serial = csv_of(compare_paradigms(c));
  c.experiment.jobs = 4;
  EXPECT_EQ(csv_of(compare_paradigms(c)), serial);
}

TEST(Harness, SigmaMatchesCalibrationOfReducedBudget) {
  auto c = small_config();
  c.optimizer.privacy.level = PrivacyLevel::kUser;
  c.normalize_and_validate();
  const auto report = run_single(c, seeds_for(5, 0));
  const auto reduced = user_level_reduction(1.0, 1e-5, 8, 2);
  const double expected = calibrate_sigma(std::sqrt(2.0), static_cast<double>(report.T), reduced.epsilon,
                                          reduced.delta, 8, 3);
  EXPECT_EQ(report.sigma, expected);
}

TEST(Harness, UserLevelWithRAtMEqualsRecordLevel) {
  auto c = small_config();
  c.problem.r = 8;
  c.normalize_and_validate();
  auto user = c;
  user.optimizer.privacy.level = PrivacyLevel::kUser;
  const auto a = run_single(user, seeds_for(5, 0));
  const auto b = run_single(c, seeds_for(5, 0));
  EXPECT_EQ(a.sigma, b.sigma);
  EXPECT_EQ(a.excess.value, b.excess.value);
}

TEST(Harness, UserSweepRejectsNonDivisors) {
  const auto c = small_config();
  EXPECT_THROW(user_level_sweep(c, {3}), ConfigError);
  const auto result = user_level_sweep(c, {1, 2, 8});
  EXPECT_EQ(result.points.size(), 3u);
  EXPECT_GT(result.points[0].sigma, result.points[2].sigma);
}

TEST(Harness, SweepGridAndFits) {
  auto c = small_config();
  c.sweep = {{"m", {8, 16}}, {"epsilon", {0.5, 1.0, 2.0}}};
  c.experiment.repetitions = 2;
  const auto result = scaling_sweep(c);
  EXPECT_EQ(result.points.size(), 6u);
  EXPECT_EQ(result.rows.size(), 12u);
  EXPECT_EQ(result.fits.size(), 2u);
  EXPECT_EQ(result.points[1].coordinates[1].second, 1.0);
  c.sweep = {{"m", {8}}};
  EXPECT_THROW(scaling_sweep(c), ConfigError);
}

TEST(Harness, StabilityWithSelfNeighboursIsZero) {
  auto c = small_config();
  c.optimizer.paradigm = Paradigm::kCollabNoDp;
  const auto report = stability_experiment(c, {10, true});
  EXPECT_EQ(report.distances.size(), 10u);
  EXPECT_EQ(report.max_output_distance, 0.0);
  const auto real = stability_experiment(c, {10, false});
  EXPECT_LE(real.max_output_distance, real.bound);
}

TEST(Harness, ReplayReproducesRow) {
  const auto rows = compare_paradigms(small_config());
  for (const auto& row : rows) {
    const auto entry = log_entry(row, false);
    EXPECT_EQ(replay_log_entry(nlohmann::json::parse(entry.dump())), csv_row(row, false));
  }
  auto tampered = nlohmann::json::parse(log_entry(rows[0], false).dump());
  tampered["config"]["problem"]["m"] = 16;
  EXPECT_THROW(replay_log_entry(tampered), FormatError);
}

TEST(Harness, NoiseFreeTaskHasNoGeneralizationGap) {
  auto c = small_config();
  c.task.noise_scale = 0.0;
  c.optimizer.paradigm = Paradigm::kCollabNoDp;
  c.optimizer.privacy.level = PrivacyLevel::kNone;
  c.experiment.decompose = true;
  c.normalize_and_validate();
  const auto report = run_single(c, seeds_for(5, 0));
  ASSERT_TRUE(report.decomposition.has_value());
  EXPECT_NEAR(report.decomposition->phi_gen, 0.0, 1e-12);
  EXPECT_GE(report.decomposition->phi_opt, -1e-9);
}

TEST(Harness, SingleOwnerPerSiloMatchesCollaboration) {
  auto c = small_config();
  c.problem.n = c.domain.n = 1;
  c.problem.m = 64;
  c.optimizer.privacy.level = PrivacyLevel::kNone;
  c.optimizer.paradigm = Paradigm::kCollabNoDp;
  c.normalize_and_validate();
  const auto silo = run_single(config_for_paradigm(c, Paradigm::kPerSilo), seeds_for(5, 0));
  const auto collab = run_single(c, seeds_for(5, 0));
  EXPECT_EQ(silo.T, collab.T);
  EXPECT_NEAR(silo.excess.value, collab.excess.value, 0.05);
}

TEST(Harness, BoundValues) {
  auto c = small_config();
  const double R = std::sqrt(3 * 4.0 + 4.0);
  const double L = std::sqrt(2.0);
  EXPECT_NEAR(bound_value(c, Paradigm::kCollabNoDp), R * L / std::sqrt(24.0), 1e-12);
  EXPECT_NEAR(bound_value(c, Paradigm::kPerSilo), L * 4.0 / std::sqrt(8.0), 1e-12);
  EXPECT_NEAR(bound_value(c, Paradigm::kJointDp),
              R * L * (1 / std::sqrt(24.0) + std::sqrt(3 * std::log(1e5)) / 24.0), 1e-12);
  EXPECT_GT(bound_value(c, Paradigm::kFullDp), bound_value(c, Paradigm::kJointDp));
}

TEST(Harness, ParallelForRethrows) {
  EXPECT_THROW(parallel_for(8, 3, [](std::size_t i) { if (i == 5) throw std::runtime_error("x"); }),
               std::runtime_error);
  std::vector<int> hit(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hit[i] = 1; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 50);
}

}  // namespace
}  // namespace jdp
