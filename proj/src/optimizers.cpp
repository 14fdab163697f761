#include "jdp/optimizers.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "jdp/errors.hpp"
#include "jdp/kernels/kernels.hpp"

namespace jdp {

const char* to_string(Paradigm paradigm) {
  switch (paradigm) {
    case Paradigm::kPerSilo: return "per_silo";
    case Paradigm::kCollabNoDp: return "collab_no_dp";
    case Paradigm::kJointDp: return "joint_dp";
    case Paradigm::kFullDp: return "full_dp";
    case Paradigm::kSmoothJointDp: return "smooth_joint_dp";
  }
  return "?";
}

Paradigm paradigm_from_string(const std::string& name) {
  if (name == "per_silo") return Paradigm::kPerSilo;
  if (name == "collab_no_dp") return Paradigm::kCollabNoDp;
  if (name == "joint_dp") return Paradigm::kJointDp;
  if (name == "full_dp") return Paradigm::kFullDp;
  if (name == "smooth_joint_dp") return Paradigm::kSmoothJointDp;
  throw ConfigError("unknown paradigm '" + name + "'");
}

InitPolicy init_policy_from_string(const std::string& name) {
  if (name == "origin") return InitPolicy::kOrigin;
  if (name == "random_in_domain") return InitPolicy::kRandomInDomain;
  throw ConfigError("unknown init policy '" + name + "'");
}

namespace {

// Uniform point in the ball: uniform direction, radius R U^{1/dim}.
void uniform_in_ball(RandomStream& rng, std::span<double> v, double ball_radius) {
  if (v.empty()) return;
  double norm = 0.0;
  do {
    rng.fill_normal(v, 1.0);
    norm = kernels::norm(v);
  } while (norm == 0.0);
  const double radial = ball_radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(v.size()));
  kernels::scale(radial / norm, v);
  project_to_ball(v, ball_radius);
}

}  // namespace

PartitionedParams initial_params(const DomainSpec& spec, InitPolicy policy, std::uint64_t seed) {
  spec.validate();
  PartitionedParams params = PartitionedParams::zeros(spec);
  if (policy == InitPolicy::kOrigin) return params;
  RandomStream rng(derive_seed(seed, "initial-params"));
  for (std::size_t j = 0; j < spec.n; ++j) uniform_in_ball(rng, params.x(j), spec.radius_x());
  uniform_in_ball(rng, params.u(), spec.radius_u());
  return params;
}

void OptimizerConfig::validate() const {
  if (T < 1) throw ConfigError("optimizer: T must be >= 1");
  if (eta && (!(*eta >= 0.0) || !std::isfinite(*eta))) throw ConfigError("optimizer: eta must be finite and >= 0");
  if (sigma_override && !(*sigma_override >= 0.0)) throw ConfigError("optimizer: sigma override must be >= 0");
  const bool private_paradigm = paradigm == Paradigm::kJointDp || paradigm == Paradigm::kFullDp ||
                                paradigm == Paradigm::kSmoothJointDp;
  if (private_paradigm && privacy.level == PrivacyLevel::kNone) {
    throw ConfigError(std::string("optimizer: paradigm ") + to_string(paradigm) + " requires a privacy level");
  }
  if (private_paradigm) privacy.validate();
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("optimizer: gamma must lie in (0, 1)");
}

ParamsView TrainResult::view() const {
  if (silo_shared.empty()) return view_of(final_params);
  return [this](std::size_t owner) {
    return OwnerView{final_params.x(owner), std::span<const double>(silo_shared[owner])};
  };
}

double default_eta(double R, double lipschitz, std::uint64_t T, double noise_dim, double sigma) {
  const double ratio = noise_dim * sigma * sigma / (lipschitz * lipschitz);
  return R / (lipschitz * std::sqrt(static_cast<double>(T) * (1.0 + ratio)));
}

std::uint64_t default_T(Paradigm paradigm, const ProblemSpec& problem, const PrivacySpec& privacy) {
  if (paradigm == Paradigm::kSmoothJointDp) {
    const double n = static_cast<double>(problem.n);
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(n * n / std::log(1.0 / privacy.delta))));
  }
  const std::uint64_t mn = static_cast<std::uint64_t>(problem.m) * problem.n;
  return mn * mn;
}

namespace {

// Running sum of iterates. The shared block moves every step; a personalized
// block only when its owner is sampled, so it is accumulated lazily with the
// number of iterations it stayed constant.
class IterateAverager {
 public:
  explicit IterateAverager(const PartitionedParams& shape)
      : sum_(shape.owners(), shape.k(), shape.ell()), last_(shape.owners(), 0) {}

  // Counts iterate t; `owner`'s block is about to change.
  void count(std::uint64_t t, const PartitionedParams& params, std::size_t owner) {
    kernels::axpy(1.0, params.u(), sum_.u());
    flush(owner, t + 1, params);
  }

  PartitionedParams finish(std::uint64_t T, const PartitionedParams& params) {
    for (std::size_t j = 0; j < params.owners(); ++j) flush(j, T, params);
    kernels::scale(1.0 / static_cast<double>(T), sum_.values());
    return sum_;
  }

 private:
  void flush(std::size_t owner, std::uint64_t until, const PartitionedParams& params) {
    const double times = static_cast<double>(until - last_[owner]);
    if (times > 0.0) kernels::axpy(times, params.x(owner), sum_.x(owner));
    last_[owner] = until;
  }

  PartitionedParams sum_;
  std::vector<std::uint64_t> last_;
};

class Tracer {
 public:
  explicit Tracer(const OptimizerConfig& cfg) : every_(cfg.trace_every), out_(cfg.trace_out),
      start_(std::chrono::steady_clock::now()) {}

  bool due(std::uint64_t t) const { return every_ > 0 && t % every_ == 0; }

  void record(std::uint64_t t, double loss_sample, std::vector<TracePoint>& trace) {
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    trace.push_back({t, loss_sample, ms});
    if (out_ != nullptr) *out_ << t << ',' << loss_sample << ',' << ms << '\n';
  }

 private:
  std::uint64_t every_;
  std::ostream* out_;
  std::chrono::steady_clock::time_point start_;
};

#ifdef NDEBUG
constexpr std::uint64_t kDomainCheckEvery = 4096;
#else
constexpr std::uint64_t kDomainCheckEvery = 1;
#endif

void check_iterate(std::uint64_t t, const PartitionedParams& params, const DomainSpec& spec) {
  if (t % kDomainCheckEvery == 0 && !in_domain(params, spec, 1e-9)) {
    throw std::logic_error("iterate " + std::to_string(t) + " left the domain");
  }
}

void check_inputs(const Federation& fed, const LossModel& model, const DomainSpec& spec, const OptimizerConfig& cfg) {
  spec.validate();
  cfg.validate();
  if (fed.owners() != spec.n) throw ConfigError("federation has a different number of owners than the domain");
  const std::size_t want = model.kind == LossKind::kLogistic ? spec.k + spec.ell + 1 : spec.k + spec.ell;
  if (fed.record_dim() != want) throw ConfigError("record dimension does not match the loss and domain");
}

enum class NoiseMode { kNone, kShared, kTouched };

TrainResult sgd_loop(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                     const OptimizerConfig& cfg, NoiseMode mode, double sigma) {
  const std::size_t k = spec.k;
  const std::size_t ell = spec.ell;
  const double noise_dim = mode == NoiseMode::kNone ? 0.0 : static_cast<double>(mode == NoiseMode::kTouched ? k + ell : ell);

  TrainResult result;
  result.T = cfg.T;
  result.sigma = mode == NoiseMode::kNone ? 0.0 : sigma;
  result.eta = cfg.eta.value_or(default_eta(radius(spec), model.lipschitz, cfg.T, noise_dim, result.sigma));
  result.seeds_used = {cfg.seed_sampling, cfg.seed_noise, cfg.seed_init};

  PartitionedParams params = initial_params(spec, cfg.init, cfg.seed_init);
  IterateAverager averager(params);
  RandomStream sampling(cfg.seed_sampling);
  RandomStream noise(cfg.seed_noise);
  Tracer tracer(cfg);
  std::vector<double> gx(k), gu(ell), draw(k + ell);
  const std::span<const double> draw_x(draw.data(), k);
  const std::span<const double> draw_u(draw.data() + k, ell);

  for (std::uint64_t t = 0; t < cfg.T; ++t) {
    if (cfg.on_iterate) cfg.on_iterate(t, params);
    const std::size_t j = sampling.uniform_index(spec.n);
    const std::size_t i = sampling.uniform_index(fed.records_per_owner());
    const auto z = fed.record(j, i);
    averager.count(t, params, j);
    if (tracer.due(t)) tracer.record(t, loss(model, params.x(j), params.u(), z), result.trace);

    grad_into(model, params.x(j), params.u(), z, gx, gu);
    if (mode != NoiseMode::kNone) {
      // Fixed-length draw per iteration keeps paradigms seed-comparable.
      noise.fill_normal(draw, 1.0);
      kernels::axpy(result.sigma, draw_u, gu);
      if (mode == NoiseMode::kTouched) kernels::axpy(result.sigma, draw_x, gx);
    }
    kernels::axpy(-result.eta, gx, params.x(j));
    kernels::axpy(-result.eta, gu, params.u());
    project_touched(params, j, spec);
    check_iterate(t, params, spec);
  }
  result.final_params = averager.finish(cfg.T, params);
  return result;
}

ProblemSpec problem_of(const Federation& fed) {
  return ProblemSpec{fed.owners(), fed.records_per_owner(), fed.users_per_owner(), fed.record_dim(), 0};
}

}  // namespace

double resolve_sigma(const Federation& fed, const LossModel& model, const OptimizerConfig& cfg) {
  if (cfg.paradigm == Paradigm::kPerSilo || cfg.paradigm == Paradigm::kCollabNoDp) return 0.0;
  if (cfg.sigma_override) return *cfg.sigma_override;
  if (cfg.paradigm == Paradigm::kSmoothJointDp) return 0.0;
  return make_noise_plan(cfg.privacy, model.lipschitz, cfg.T, problem_of(fed)).sigma;
}

TrainResult run_rsgd(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                     const OptimizerConfig& cfg) {
  check_inputs(fed, model, spec, cfg);
  if (cfg.paradigm != Paradigm::kCollabNoDp) throw ConfigError("run_rsgd expects paradigm collab_no_dp");
  return sgd_loop(fed, model, spec, cfg, NoiseMode::kNone, 0.0);
}

TrainResult run_nsgd(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                     const OptimizerConfig& cfg) {
  check_inputs(fed, model, spec, cfg);
  if (cfg.paradigm != Paradigm::kJointDp) throw ConfigError("run_nsgd expects paradigm joint_dp");
  return sgd_loop(fed, model, spec, cfg, NoiseMode::kShared, resolve_sigma(fed, model, cfg));
}

TrainResult run_full_dp(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                        const OptimizerConfig& cfg) {
  check_inputs(fed, model, spec, cfg);
  if (cfg.paradigm != Paradigm::kFullDp) throw ConfigError("run_full_dp expects paradigm full_dp");
  return sgd_loop(fed, model, spec, cfg, NoiseMode::kTouched, resolve_sigma(fed, model, cfg));
}

TrainResult run_per_silo(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                         const OptimizerConfig& cfg) {
  check_inputs(fed, model, spec, cfg);
  if (cfg.paradigm != Paradigm::kPerSilo) throw ConfigError("run_per_silo expects paradigm per_silo");
  const std::size_t n = spec.n;
  const DomainSpec silo_spec{1, spec.k, spec.ell, spec.d_x, spec.d_u};
  const std::uint64_t silo_T = cfg.silo_T.value_or(std::max<std::uint64_t>(1, cfg.T / (n * n)));
  if (silo_T < 1) throw ConfigError("per_silo: silo_T must be >= 1");

  TrainResult result;
  result.T = silo_T;
  result.eta = cfg.eta.value_or(default_eta(radius(silo_spec), model.lipschitz, silo_T, 0.0, 0.0));
  result.seeds_used = {cfg.seed_sampling, cfg.seed_noise, cfg.seed_init};
  result.final_params = PartitionedParams::zeros(spec);
  result.silo_shared.assign(n, std::vector<double>(spec.ell, 0.0));

  const PartitionedParams start = initial_params(spec, cfg.init, cfg.seed_init);
  Tracer tracer(cfg);
  std::vector<double> gx(spec.k), gu(spec.ell);
  for (std::size_t j = 0; j < n; ++j) {
    PartitionedParams silo(1, spec.k, spec.ell);
    std::copy(start.x(j).begin(), start.x(j).end(), silo.x(0).begin());
    std::copy(start.u().begin(), start.u().end(), silo.u().begin());
    IterateAverager averager(silo);
    RandomStream sampling(derive_seed(cfg.seed_sampling, "silo", j));
    for (std::uint64_t t = 0; t < silo_T; ++t) {
      const std::size_t i = sampling.uniform_index(fed.records_per_owner());
      const auto z = fed.record(j, i);
      averager.count(t, silo, 0);
      if (j == 0 && tracer.due(t)) tracer.record(t, loss(model, silo.x(0), silo.u(), z), result.trace);
      grad_into(model, silo.x(0), silo.u(), z, gx, gu);
      kernels::axpy(-result.eta, gx, silo.x(0));
      kernels::axpy(-result.eta, gu, silo.u());
      project_touched(silo, 0, silo_spec);
      check_iterate(t, silo, silo_spec);
    }
    const PartitionedParams avg = averager.finish(silo_T, silo);
    std::copy(avg.x(0).begin(), avg.x(0).end(), result.final_params.x(j).begin());
    std::copy(avg.u().begin(), avg.u().end(), result.silo_shared[j].begin());
    // final_params.u holds the owners' mean shared block for reference only.
    kernels::axpy(1.0 / static_cast<double>(n), avg.u(), result.final_params.u());
  }
  return result;
}

TrainResult run_smooth_nsgd(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                            const OptimizerConfig& cfg) {
  check_inputs(fed, model, spec, cfg);
  if (cfg.paradigm != Paradigm::kSmoothJointDp) throw ConfigError("run_smooth_nsgd expects paradigm smooth_joint_dp");
  if (!model.smoothness) throw ConfigError("run_smooth_nsgd needs a smooth loss (finite H)");
  const std::size_t r = fed.users_per_owner();
  if (r < 2) throw ConfigError("run_smooth_nsgd needs at least two users per owner");
  const std::size_t k = spec.k;
  const std::size_t ell = spec.ell;
  const std::size_t m = fed.records_per_owner();
  const double R = radius(spec);
  const double L = model.lipschitz;
  const double eps = cfg.privacy.epsilon;
  const double delta = cfg.privacy.delta;

  TrainResult result;
  result.T = cfg.T;
  result.tau = concentration_radius(L, static_cast<double>(r), static_cast<double>(m), cfg.gamma,
                                    static_cast<double>(ell), R, *model.smoothness);
  const PrivateMeanNoise noise_sd = private_mean_noise(r, eps, delta, result.tau, L);
  result.sigma = noise_sd.phase2_sigma;
  const double private_dim = static_cast<double>(cfg.privatize_personalized ? k + ell : ell);
  const double variance = private_dim * noise_sd.phase2_sigma * noise_sd.phase2_sigma;
  result.eta = cfg.eta.value_or(R / std::sqrt(static_cast<double>(cfg.T) * (L * L + variance)));
  result.seeds_used = {cfg.seed_sampling, cfg.seed_noise, cfg.seed_init};

  std::vector<std::vector<std::vector<std::size_t>>> users(spec.n);
  for (std::size_t j = 0; j < spec.n; ++j) {
    for (std::size_t w = 0; w < r; ++w) users[j].push_back(fed.user_records(j, w));
  }

  PartitionedParams params = initial_params(spec, cfg.init, cfg.seed_init);
  IterateAverager averager(params);
  RandomStream sampling(cfg.seed_sampling);
  RandomStream noise(cfg.seed_noise);
  Tracer tracer(cfg);
  const PrivateMeanOptions pm_options{cfg.private_mean_noiseless};
  const double shard_weight = static_cast<double>(r) / static_cast<double>(m);

  std::vector<std::vector<double>> user_grads(r, std::vector<double>(k + ell));
  std::vector<std::vector<double>> user_shared(cfg.privatize_personalized ? 0 : r, std::vector<double>(ell));
  std::vector<double> gx(k), gu(ell), step(k + ell);

  for (std::uint64_t t = 0; t < cfg.T; ++t) {
    if (cfg.on_iterate) cfg.on_iterate(t, params);
    const std::size_t j = sampling.uniform_index(spec.n);
    averager.count(t, params, j);
    if (tracer.due(t)) tracer.record(t, loss(model, params.x(j), params.u(), fed.record(j, 0)), result.trace);

    for (std::size_t w = 0; w < r; ++w) {
      auto& acc = user_grads[w];
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i : users[j][w]) {
        grad_into(model, params.x(j), params.u(), fed.record(j, i), gx, gu);
        kernels::axpy(shard_weight, gx, std::span<double>(acc.data(), k));
        kernels::axpy(shard_weight, gu, std::span<double>(acc.data() + k, ell));
      }
    }
    if (cfg.privatize_personalized) {
      step = private_mean(user_grads, eps, delta, result.tau, L, noise, pm_options);
    } else {
      std::fill(step.begin(), step.end(), 0.0);
      for (std::size_t w = 0; w < r; ++w) {
        kernels::axpy(1.0 / static_cast<double>(r), std::span<const double>(user_grads[w].data(), k),
                      std::span<double>(step.data(), k));
        std::copy(user_grads[w].begin() + static_cast<std::ptrdiff_t>(k), user_grads[w].end(), user_shared[w].begin());
      }
      const auto shared = private_mean(user_shared, eps, delta, result.tau, L, noise, pm_options);
      std::copy(shared.begin(), shared.end(), step.begin() + static_cast<std::ptrdiff_t>(k));
    }
    kernels::axpy(-result.eta, std::span<const double>(step.data(), k), params.x(j));
    kernels::axpy(-result.eta, std::span<const double>(step.data() + k, ell), params.u());
    project_touched(params, j, spec);
    check_iterate(t, params, spec);
  }
  result.final_params = averager.finish(cfg.T, params);
  return result;
}

TrainResult train(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                  const OptimizerConfig& cfg) {
  switch (cfg.paradigm) {
    case Paradigm::kPerSilo: return run_per_silo(fed, model, spec, cfg);
    case Paradigm::kCollabNoDp: return run_rsgd(fed, model, spec, cfg);
    case Paradigm::kJointDp: return run_nsgd(fed, model, spec, cfg);
    case Paradigm::kFullDp: return run_full_dp(fed, model, spec, cfg);
    case Paradigm::kSmoothJointDp: return run_smooth_nsgd(fed, model, spec, cfg);
  }
  throw ConfigError("unknown paradigm");
}

}  // namespace jdp
