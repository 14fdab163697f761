#include "jdp/losses.hpp"

#include <cmath>
#include <vector>

#include "jdp/errors.hpp"
#include "jdp/kernels/kernels.hpp"

namespace jdp {

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kSharedMeanNorm: return "shared_mean_norm";
    case LossKind::kSharedMeanHuber: return "shared_mean_huber";
    case LossKind::kLogistic: return "logistic";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "shared_mean_norm") return LossKind::kSharedMeanNorm;
  if (name == "shared_mean_huber") return LossKind::kSharedMeanHuber;
  if (name == "logistic") return LossKind::kLogistic;
  throw ConfigError("unknown loss kind '" + name + "'");
}

LossModel LossModel::shared_mean_norm() {
  return LossModel{LossKind::kSharedMeanNorm, std::sqrt(2.0), std::nullopt, 0.0};
}

LossModel LossModel::shared_mean_huber(double mu) {
  if (!(mu > 0.0)) throw ConfigError("huber threshold mu must be positive");
  return LossModel{LossKind::kSharedMeanHuber, std::sqrt(2.0), 1.0 / mu, mu};
}

LossModel LossModel::logistic(double feature_bound) {
  if (!(feature_bound > 0.0)) throw ConfigError("logistic feature bound must be positive");
  return LossModel{LossKind::kLogistic, feature_bound, std::nullopt, 0.0};
}

double huber(double t, double mu) { return t <= mu ? t * t / (2.0 * mu) : t - 0.5 * mu; }

namespace {

void check_record(std::span<const double> x, std::span<const double> u, std::span<const double> z,
                  std::size_t want) {
  if (z.size() != want) {
    throw ConfigError("record has dimension " + std::to_string(z.size()) + ", expected " +
                      std::to_string(want) + " for k=" + std::to_string(x.size()) +
                      ", ell=" + std::to_string(u.size()));
  }
}

// log(1 + e^t) without overflow.
double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// grad = (p - c) scaled by the derivative of the norm-profile at ||p - c||.
void norm_block_grad(std::span<const double> p, std::span<const double> c, std::span<double> g,
                     LossKind kind, double mu) {
  if (p.empty()) return;
  kernels::subtract(p, c, g);
  const double t = kernels::norm(g);
  if (t == 0.0) {
    kernels::scale(0.0, g);
    return;
  }
  const double factor = (kind == LossKind::kSharedMeanHuber && t <= mu) ? 1.0 / mu : 1.0 / t;
  kernels::scale(factor, g);
}

}  // namespace

double loss(const LossModel& model, std::span<const double> x, std::span<const double> u,
            std::span<const double> z) {
  const std::size_t k = x.size();
  const std::size_t ell = u.size();
  switch (model.kind) {
    case LossKind::kSharedMeanNorm: {
      check_record(x, u, z, k + ell);
      return kernels::distance(x, z.first(k)) + kernels::distance(u, z.subspan(k, ell));
    }
    case LossKind::kSharedMeanHuber: {
      check_record(x, u, z, k + ell);
      return huber(kernels::distance(x, z.first(k)), model.mu) +
             huber(kernels::distance(u, z.subspan(k, ell)), model.mu);
    }
    case LossKind::kLogistic: {
      check_record(x, u, z, k + ell + 1);
      const double margin = kernels::dot(x, z.first(k)) + kernels::dot(u, z.subspan(k, ell));
      return softplus(-z[k + ell] * margin);
    }
  }
  return 0.0;
}

void grad_into(const LossModel& model, std::span<const double> x, std::span<const double> u,
               std::span<const double> z, std::span<double> grad_x, std::span<double> grad_u) {
  const std::size_t k = x.size();
  const std::size_t ell = u.size();
  if (grad_x.size() != k || grad_u.size() != ell) throw ConfigError("gradient buffers have the wrong size");
  switch (model.kind) {
    case LossKind::kSharedMeanNorm:
    case LossKind::kSharedMeanHuber: {
      check_record(x, u, z, k + ell);
      norm_block_grad(x, z.first(k), grad_x, model.kind, model.mu);
      norm_block_grad(u, z.subspan(k, ell), grad_u, model.kind, model.mu);
      return;
    }
    case LossKind::kLogistic: {
      check_record(x, u, z, k + ell + 1);
      const double y = z[k + ell];
      const double margin = kernels::dot(x, z.first(k)) + kernels::dot(u, z.subspan(k, ell));
      const double w = -y * sigmoid(-y * margin);
      for (std::size_t i = 0; i < k; ++i) grad_x[i] = w * z[i];
      for (std::size_t i = 0; i < ell; ++i) grad_u[i] = w * z[k + i];
      return;
    }
  }
}

BlockGradient grad(const LossModel& model, std::size_t owner, std::span<const double> x,
                   std::span<const double> u, std::span<const double> z) {
  BlockGradient g = BlockGradient::for_owner(owner, x.size(), u.size());
  grad_into(model, x, u, z, g.grad_x, g.grad_u);
  return g;
}

ParamsView view_of(const PartitionedParams& params) {
  return [&params](std::size_t owner) { return OwnerView{params.x(owner), params.u()}; };
}

ObjectiveValue empirical_loss(const LossModel& model, const ParamsView& params, const Federation& fed) {
  double total = 0.0;
  for (std::size_t j = 0; j < fed.owners(); ++j) {
    const OwnerView view = params(j);
    double owner_sum = 0.0;
    for (std::size_t i = 0; i < fed.records_per_owner(); ++i) {
      owner_sum += loss(model, view.x, view.u, fed.record(j, i));
    }
    total += owner_sum;
  }
  const double count = static_cast<double>(fed.owners() * fed.records_per_owner());
  return ObjectiveValue{total / count, 0.0, ObjectiveValue::Context::kEmpirical};
}

ObjectiveValue empirical_loss(const LossModel& model, const PartitionedParams& params, const Federation& fed) {
  if (fed.owners() != params.owners()) throw ConfigError("empirical_loss: federation and parameters disagree on n");
  return empirical_loss(model, view_of(params), fed);
}

namespace {

template <class Eval>
ObjectiveValue monte_carlo(const SyntheticTask& task, std::size_t n_samples, std::uint64_t eval_seed, Eval eval) {
  if (n_samples < 1) throw ConfigError("population estimate needs n_samples >= 1");
  const std::size_t n = task.owners();
  std::vector<RandomStream> streams;
  streams.reserve(n);
  for (std::size_t j = 0; j < n; ++j) streams.emplace_back(derive_seed(eval_seed, "population-eval", j));
  std::vector<double> z(task.record_dim());
  // Welford accumulation of the per-draw owner average.
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    double draw = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      task.sample(j, streams[j], z);
      draw += eval(j, std::span<const double>(z));
    }
    draw /= static_cast<double>(n);
    const double delta = draw - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (draw - mean);
  }
  double se = 0.0;
  if (n_samples > 1) se = std::sqrt(m2 / static_cast<double>(n_samples - 1) / static_cast<double>(n_samples));
  return ObjectiveValue{mean, se, ObjectiveValue::Context::kPopulationEstimate};
}

}  // namespace

ObjectiveValue population_loss_estimate(const LossModel& model, const ParamsView& params,
                                        const SyntheticTask& task, std::size_t n_samples,
                                        std::uint64_t eval_seed) {
  std::vector<OwnerView> views;
  for (std::size_t j = 0; j < task.owners(); ++j) views.push_back(params(j));
  return monte_carlo(task, n_samples, eval_seed, [&](std::size_t j, std::span<const double> z) {
    return loss(model, views[j].x, views[j].u, z);
  });
}

ObjectiveValue population_loss_estimate(const LossModel& model, const PartitionedParams& params,
                                        const SyntheticTask& task, std::size_t n_samples,
                                        std::uint64_t eval_seed) {
  if (task.owners() != params.owners()) throw ConfigError("population estimate: task and parameters disagree on n");
  return population_loss_estimate(model, view_of(params), task, n_samples, eval_seed);
}

ObjectiveValue paired_population_gap(const LossModel& model, const ParamsView& params,
                                     const ParamsView& reference, const SyntheticTask& task,
                                     std::size_t n_samples, std::uint64_t eval_seed) {
  std::vector<OwnerView> views;
  std::vector<OwnerView> refs;
  for (std::size_t j = 0; j < task.owners(); ++j) {
    views.push_back(params(j));
    refs.push_back(reference(j));
  }
  return monte_carlo(task, n_samples, eval_seed, [&](std::size_t j, std::span<const double> z) {
    return loss(model, views[j].x, views[j].u, z) - loss(model, refs[j].x, refs[j].u, z);
  });
}

ObjectiveValue paired_population_gap(const LossModel& model, const PartitionedParams& params,
                                     const PartitionedParams& reference, const SyntheticTask& task,
                                     std::size_t n_samples, std::uint64_t eval_seed) {
  if (task.owners() != params.owners() || reference.owners() != params.owners()) {
    throw ConfigError("population gap: task and parameters disagree on n");
  }
  return paired_population_gap(model, view_of(params), view_of(reference), task, n_samples, eval_seed);
}

}  // namespace jdp
