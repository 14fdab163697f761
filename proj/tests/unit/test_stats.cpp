#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "jdp/errors.hpp"
#include "jdp/stats.hpp"

namespace jdp::stats {
namespace {

TEST(Stats, MeanAndStdError) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto e = mean_and_stderr(v);
  EXPECT_DOUBLE_EQ(e.mean, 2.5);
  EXPECT_NEAR(e.std_error, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  EXPECT_EQ(e.count, 4u);
  const std::vector<double> one{7.0};
  EXPECT_EQ(mean_and_stderr(one).std_error, 0.0);
}

TEST(Stats, ExactPowerLawSlope) {
  const std::vector<double> x{1, 2, 4, 8, 16};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -0.5));
  const auto fit = log_log_slope(x, y);
  EXPECT_NEAR(fit.slope, -0.5, 1e-12);
  EXPECT_NEAR(std::exp(fit.intercept), 3.0, 1e-12);
  EXPECT_NEAR(fit.slope_std_error, 0.0, 1e-12);
  EXPECT_EQ(fit.points, 5u);
}

TEST(Stats, SlopeIntervalCoversNoisyFit) {
  const std::vector<double> x{1, 2, 4, 8};
  const std::vector<double> y{1.0, 0.75, 0.48, 0.36};
  const auto fit = log_log_slope(x, y);
  EXPECT_LT(fit.ci_low, fit.slope);
  EXPECT_GT(fit.ci_high, fit.slope);
  // t quantile with 2 degrees of freedom.
  EXPECT_NEAR((fit.ci_high - fit.slope) / fit.slope_std_error, 4.302652729911275, 1e-9);
}

TEST(Stats, SlopeErrors) {
  const std::vector<double> one{1.0};
  EXPECT_THROW(log_log_slope(one, one), ConfigError);
  const std::vector<double> x{1.0, 2.0}, y{1.0, 0.0};
  EXPECT_THROW(log_log_slope(x, y), ConfigError);
  const std::vector<double> same{2.0, 2.0};
  EXPECT_THROW(log_log_slope(same, x), ConfigError);
}

TEST(Stats, SignTest) {
  const std::vector<double> a{1, 1, 1, 1, 1, 5};
  const std::vector<double> b{2, 2, 2, 2, 2, 5};
  const auto t = sign_test_less(a, b);
  EXPECT_EQ(t.wins, 5u);
  EXPECT_EQ(t.losses, 0u);
  EXPECT_NEAR(t.p_value, 1.0 / 32.0, 1e-15);
  const auto r = sign_test_less(b, a);
  EXPECT_NEAR(r.p_value, 1.0, 1e-15);
}

}  // namespace
}  // namespace jdp::stats
