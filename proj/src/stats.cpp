#include "jdp/stats.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <vector>

#include "jdp/errors.hpp"

namespace jdp::stats {

MeanEstimate mean_and_stderr(std::span<const double> values) {
  MeanEstimate out;
  out.count = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  }
  return out;
}

SlopeFit log_log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("log_log_slope: x and y differ in length");
  if (x.size() < 2) throw ConfigError("log_log_slope: need at least two points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ConfigError("log_log_slope: values must be positive");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("log_log_slope: x values are all equal");
  SlopeFit fit;
  fit.points = lx.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (lx.size() > 2) {
    double sse = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
      sse += r * r;
    }
    fit.slope_std_error = std::sqrt(sse / (n - 2.0) / sxx);
    const boost::math::students_t dist(n - 2.0);
    const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
    fit.ci_low = fit.slope - q * fit.slope_std_error;
    fit.ci_high = fit.slope + q * fit.slope_std_error;
  } else {
    fit.ci_low = fit.ci_high = fit.slope;
  }
  return fit;
}

SignTest sign_test_less(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("sign test: samples differ in length");
  SignTest out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) ++out.wins;
    else if (a[i] > b[i]) ++out.losses;
  }
  const std::size_t trials = out.wins + out.losses;
  if (trials == 0) return out;
  const boost::math::binomial_distribution<double> dist(static_cast<double>(trials), 0.5);
  out.p_value = out.wins == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, static_cast<double>(out.wins - 1)));
  return out;
}

}  // namespace jdp::stats
