#include <gtest/gtest.h>

#include <sstream>

#include "jdp/errors.hpp"
#include "jdp/kernels/kernels.hpp"
#include "test_util.hpp"

namespace jdp {
namespace {

TEST(DataModel, ProblemSpecRequiresRDividingM) {
  EXPECT_THROW((ProblemSpec{2, 10, 3, 1, 0}.validate()), ConfigError);
  EXPECT_THROW((ProblemSpec{2, 10, 0, 1, 0}.validate()), ConfigError);
  EXPECT_NO_THROW((ProblemSpec{2, 10, 5, 1, 0}.validate()));
}

TEST(DataModel, GenerateIsDeterministic) {
  const auto a = testing::small_problem(3, 8, 4, 2, 3, 17);
  const auto b = testing::small_problem(3, 8, 4, 2, 3, 17);
  EXPECT_EQ(a.fed, b.fed);
  const auto c = testing::small_problem(3, 8, 4, 2, 3, 18);
  EXPECT_FALSE(a.fed == c.fed);
}

TEST(DataModel, UsersHoldContiguousEqualShards) {
  const auto p = testing::small_problem(2, 12, 3, 1, 2, 5);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t w = 0; w < 3; ++w) {
      const auto idx = p.fed.user_records(j, w);
      ASSERT_EQ(idx.size(), 4u);
      for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(idx[s], w * 4 + s);
    }
  }
  EXPECT_NO_THROW(p.fed.validate());
}

TEST(DataModel, CentersLieInTheDomain) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = testing::small_problem(5, 4, 1, 3, 4, seed, 0.1, seed % 2 ? 1.0 : 0.3);
    EXPECT_TRUE(in_domain(p.task.center_params(), p.domain, 1e-12));
  }
}

TEST(DataModel, RecordsRespectTheNormBound) {
  const auto p = testing::small_problem(3, 50, 1, 2, 6, 9, 0.5);
  const double bound = p.task.record_norm_bound();
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < 50; ++i) EXPECT_LE(kernels::norm(p.fed.record(j, i)), bound + 1e-12);
  }
}

TEST(DataModel, NoiseFreeRecordsEqualTheCenters) {
  const auto p = testing::small_problem(2, 3, 1, 2, 2, 4, 0.0);
  for (std::size_t j = 0; j < 2; ++j) {
    const auto z = p.fed.record(j, 1);
    EXPECT_DOUBLE_EQ(z[0], p.task.personalized_centers[j][0]);
    EXPECT_DOUBLE_EQ(z[3], p.task.shared_center[1]);
  }
}

TEST(DataModel, LogisticRecordsHaveBoundedFeaturesAndSignLabels) {
  const auto p = testing::small_problem(2, 100, 1, 2, 3, 8, 0.0, 0.5, TaskKind::kLogistic);
  ASSERT_EQ(p.fed.record_dim(), 6u);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i < 100; ++i) {
      const auto z = p.fed.record(j, i);
      EXPECT_LE(kernels::norm(z.first(5)), p.task.feature_bound + 1e-12);
      EXPECT_TRUE(z[5] == 1.0 || z[5] == -1.0);
    }
  }
}

TEST(DataModel, ReplaceRecordChangesExactlyOnePosition) {
  const auto p = testing::small_problem(3, 6, 2, 2, 2, 2);
  std::vector<double> fresh(p.fed.record_dim(), 0.123);
  const auto nb = replace_record(p.fed, 1, 4, fresh);
  EXPECT_EQ(record_hamming_distance(p.fed, nb), 1u);
  EXPECT_EQ(record_hamming_distance(p.fed, replace_record(p.fed, 1, 4, p.fed.record(1, 4))), 0u);
  EXPECT_THROW(replace_record(p.fed, 3, 0, fresh), ConfigError);
}

TEST(DataModel, ReplaceUserChangesOneUsersShard) {
  const auto p = testing::small_problem(2, 8, 2, 1, 2, 3);
  std::vector<std::vector<double>> shard(4, std::vector<double>(p.fed.record_dim(), 0.5));
  const auto nb = replace_user(p.fed, 0, 1, shard);
  EXPECT_EQ(record_hamming_distance(p.fed, nb), 4u);
  for (std::size_t i : p.fed.user_records(0, 0)) {
    const auto a = p.fed.record(0, i);
    const auto b = nb.record(0, i);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  shard.pop_back();
  EXPECT_THROW(replace_user(p.fed, 0, 1, shard), ConfigError);
}

TEST(DataModel, FederationFileRoundTrip) {
  const auto p = testing::small_problem(3, 6, 3, 2, 3, 21);
  std::stringstream buffer;
  write_federation(buffer, p.fed);
  const Federation back = read_federation(buffer);
  EXPECT_EQ(back, p.fed);
}

TEST(DataModel, FederationFileRejectsMalformedInput) {
  const auto p = testing::small_problem(2, 2, 1, 1, 1, 1);
  std::stringstream good;
  write_federation(good, p.fed);
  const std::string text = good.str();

  std::stringstream bad_header("not a header\n");
  EXPECT_THROW(read_federation(bad_header), FormatError);

  std::stringstream truncated(text.substr(0, text.rfind('\n', text.size() - 2) + 1));
  EXPECT_THROW(read_federation(truncated), FormatError);

  std::stringstream wrong_fields("# jdp-federation v1 n=1 m=1 r=1 d=2\n0,0,1.0\n");
  EXPECT_THROW(read_federation(wrong_fields), FormatError);

  std::stringstream bad_value("# jdp-federation v1 n=1 m=1 r=1 d=1\n0,0,abc\n");
  EXPECT_THROW(read_federation(bad_value), FormatError);

  std::stringstream bad_owner("# jdp-federation v1 n=1 m=1 r=1 d=1\n5,0,1.0\n");
  EXPECT_THROW(read_federation(bad_owner), FormatError);

  std::stringstream unbalanced("# jdp-federation v1 n=1 m=2 r=2 d=1\n0,0,1.0\n0,0,2.0\n");
  EXPECT_THROW(read_federation(unbalanced), FormatError);
}

}  // namespace
}  // namespace jdp
