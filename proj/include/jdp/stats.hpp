#pragma once

#include <cstddef>
#include <span>

namespace jdp::stats {

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

MeanEstimate mean_and_stderr(std::span<const double> values);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  double ci_low = 0.0;   // 95% Student-t interval for the slope
  double ci_high = 0.0;
  std::size_t points = 0;
};

// Least-squares fit of log(y) = a + b log(x). Needs >= 2 points with x, y > 0.
SlopeFit log_log_slope(std::span<const double> x, std::span<const double> y);

struct SignTest {
  std::size_t wins = 0;    // pairs with a < b
  std::size_t losses = 0;  // pairs with a > b (ties dropped)
  double p_value = 1.0;    // one-sided P(X >= wins) under Binomial(wins + losses, 1/2)
};

// Paired one-sided sign test of "a tends to be smaller than b".
SignTest sign_test_less(std::span<const double> a, std::span<const double> b);

}  // namespace jdp::stats
