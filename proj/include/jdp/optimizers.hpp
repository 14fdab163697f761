#pragma once

// The training paradigms: non-private collaboration (rSGD), joint-DP noisy SGD
// (noise on the shared block only), full-DP noisy SGD, owners learning
// individually, and the smooth variant built on the private mean estimator.
// Every run is a deterministic function of (federation, config, seeds) and
// returns the average of the iterates x^0 .. x^{T-1}.

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jdp/core_params.hpp"
#include "jdp/data_model.hpp"
#include "jdp/losses.hpp"
#include "jdp/privacy.hpp"

namespace jdp {

enum class Paradigm { kPerSilo, kCollabNoDp, kJointDp, kFullDp, kSmoothJointDp };

const char* to_string(Paradigm paradigm);
Paradigm paradigm_from_string(const std::string& name);

enum class InitPolicy { kOrigin, kRandomInDomain };

InitPolicy init_policy_from_string(const std::string& name);

PartitionedParams initial_params(const DomainSpec& spec, InitPolicy policy, std::uint64_t seed);

struct TracePoint {
  std::uint64_t iteration = 0;
  double loss_sample = 0.0;  // h at the record sampled in this iteration
  double elapsed_ms = 0.0;
};

struct OptimizerConfig {
  std::uint64_t T = 1;
  std::optional<double> eta;  // default: see default_eta()
  Paradigm paradigm = Paradigm::kCollabNoDp;
  PrivacySpec privacy{1.0, 1e-5, PrivacyLevel::kNone};
  std::uint64_t seed_sampling = 1;
  std::uint64_t seed_noise = 2;
  InitPolicy init = InitPolicy::kOrigin;
  std::uint64_t seed_init = 3;

  // Replaces the calibrated sigma (noise-off reductions, ablations).
  std::optional<double> sigma_override;
  // Per-owner step count for per_silo; default T / n^2.
  std::optional<std::uint64_t> silo_T;

  // Smooth variant.
  double gamma = 1e-3;                   // concentration failure probability
  bool privatize_personalized = true;    // false: only the shared block goes through private_mean
  bool private_mean_noiseless = false;   // draws noise but scales it by zero

  // Trace: one point every trace_every iterations (0 disables). Points are
  // kept in TrainResult and, when trace_out is set, streamed as CSV lines.
  std::uint64_t trace_every = 0;
  std::ostream* trace_out = nullptr;

  // Called with every iterate x^t, t = 0..T-1, before the update that
  // produces x^{t+1}. Not used by per_silo.
  std::function<void(std::uint64_t, const PartitionedParams&)> on_iterate;

  void validate() const;
};

struct SeedsUsed {
  std::uint64_t sampling = 0;
  std::uint64_t noise = 0;
  std::uint64_t init = 0;
};

struct TrainResult {
  PartitionedParams final_params;  // averaged iterate
  // per_silo only: owner j's private copy of the shared block.
  std::vector<std::vector<double>> silo_shared;
  std::vector<TracePoint> trace;
  SeedsUsed seeds_used;
  std::uint64_t T = 0;  // iterations actually run (per owner for per_silo)
  double eta = 0.0;
  double sigma = 0.0;   // per-coordinate gradient noise (phase-2 sigma for the smooth variant)
  double tau = 0.0;     // smooth variant only

  ParamsView view() const;
};

// Step size balancing R^2/(2 eta T) against (eta/2)(L^2 + noise_dim sigma^2):
// R / (L sqrt(T (1 + noise_dim sigma^2 / L^2))).
double default_eta(double R, double lipschitz, std::uint64_t T, double noise_dim, double sigma);

// m^2 n^2 for the SGD paradigms (per_silo included, its owners then run
// T / n^2 = m^2 steps each), n^2 / ln(1/delta) for the smooth variant.
std::uint64_t default_T(Paradigm paradigm, const ProblemSpec& problem, const PrivacySpec& privacy);

TrainResult run_rsgd(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                     const OptimizerConfig& cfg);
TrainResult run_nsgd(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                     const OptimizerConfig& cfg);
TrainResult run_full_dp(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                        const OptimizerConfig& cfg);
TrainResult run_per_silo(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                         const OptimizerConfig& cfg);
TrainResult run_smooth_nsgd(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                            const OptimizerConfig& cfg);

// Dispatches on cfg.paradigm.
TrainResult train(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                  const OptimizerConfig& cfg);

// Noise scale the paradigm would use for this run (0 for non-private ones).
double resolve_sigma(const Federation& fed, const LossModel& model, const OptimizerConfig& cfg);

}  // namespace jdp
