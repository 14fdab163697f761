#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "jdp/core_params.hpp"
#include "jdp/data_model.hpp"

namespace jdp::testing {

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

inline double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / denom;
}

// Small federation for fast tests.
struct SmallProblem {
  DomainSpec domain;
  SyntheticTask task;
  ProblemSpec problem;
  Federation fed;
};

inline SmallProblem small_problem(std::size_t n, std::size_t m, std::size_t r, std::size_t k, std::size_t ell,
                                  std::uint64_t seed, double noise = 0.2, double heterogeneity = 0.5,
                                  TaskKind kind = TaskKind::kSharedMean) {
  SmallProblem p;
  p.domain = DomainSpec{n, k, ell, 2.0, 2.0};
  TaskOptions options;
  options.kind = kind;
  options.noise_scale = noise;
  options.heterogeneity = heterogeneity;
  p.task = make_task(p.domain, options, seed);
  p.problem = ProblemSpec{n, m, r, p.task.record_dim(), seed + 1};
  p.fed = generate(p.task, p.problem);
  return p;
}

}  // namespace jdp::testing
