#pragma once

// Convex, Lipschitz per-record losses h(x_j, u, z) with analytic block
// gradients, and the empirical / population objectives built from them.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "jdp/core_params.hpp"
#include "jdp/data_model.hpp"

namespace jdp {

enum class LossKind { kSharedMeanNorm, kSharedMeanHuber, kLogistic };

const char* to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

struct LossModel {
  LossKind kind = LossKind::kSharedMeanNorm;
  double lipschitz = 0.0;
  std::optional<double> smoothness;  // H; set for Huber only
  double mu = 0.0;                   // Huber threshold

  // Norm loss ||x - z^x|| + ||u - z^u||. Each block is 1-Lipschitz, so L = sqrt(2).
  static LossModel shared_mean_norm();
  // Huber-smoothed norms with threshold mu: H = 1/mu, L = sqrt(2).
  static LossModel shared_mean_huber(double mu);
  // log(1 + exp(-y(<x,a> + <u,b>))) with ||(a,b)|| <= feature_bound: L = feature_bound.
  static LossModel logistic(double feature_bound = 1.0);
};

// Huber function of a norm: t^2/(2 mu) below mu, t - mu/2 above.
double huber(double t, double mu);

double loss(const LossModel& model, std::span<const double> x, std::span<const double> u,
            std::span<const double> z);

// Writes the gradient blocks; at a norm kink the block gradient is zero.
void grad_into(const LossModel& model, std::span<const double> x, std::span<const double> u,
               std::span<const double> z, std::span<double> grad_x, std::span<double> grad_u);

BlockGradient grad(const LossModel& model, std::size_t owner, std::span<const double> x,
                   std::span<const double> u, std::span<const double> z);

struct ObjectiveValue {
  enum class Context { kEmpirical, kPopulationEstimate };
  double value = 0.0;
  double std_error = 0.0;  // zero for empirical values
  Context context = Context::kEmpirical;
};

// Parameters as seen by one owner. Lets per-silo models, where every owner
// keeps a private copy of the shared block, share the evaluation code.
struct OwnerView {
  std::span<const double> x;
  std::span<const double> u;
};
using ParamsView = std::function<OwnerView(std::size_t owner)>;

ParamsView view_of(const PartitionedParams& params);

// (1/nm) sum_j sum_i h(x_j, u, z_ij).
ObjectiveValue empirical_loss(const LossModel& model, const PartitionedParams& params, const Federation& fed);
ObjectiveValue empirical_loss(const LossModel& model, const ParamsView& params, const Federation& fed);

// Monte-Carlo estimate of f(x, u) = E_j E_{z ~ P_j} h(x_j, u, z). Each of the
// n_samples draws evaluates every owner on a fresh record and averages over
// owners; the reported standard error is that of the mean of those draws.
ObjectiveValue population_loss_estimate(const LossModel& model, const PartitionedParams& params,
                                        const SyntheticTask& task, std::size_t n_samples,
                                        std::uint64_t eval_seed);
ObjectiveValue population_loss_estimate(const LossModel& model, const ParamsView& params,
                                        const SyntheticTask& task, std::size_t n_samples,
                                        std::uint64_t eval_seed);

// Same estimator applied to h(params) - h(reference) on common draws, which
// removes most of the sampling noise from an excess-loss estimate.
ObjectiveValue paired_population_gap(const LossModel& model, const PartitionedParams& params,
                                     const PartitionedParams& reference, const SyntheticTask& task,
                                     std::size_t n_samples, std::uint64_t eval_seed);
ObjectiveValue paired_population_gap(const LossModel& model, const ParamsView& params,
                                     const ParamsView& reference, const SyntheticTask& task,
                                     std::size_t n_samples, std::uint64_t eval_seed);

}  // namespace jdp
