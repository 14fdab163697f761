#pragma once

// Noise calibration, group-privacy arithmetic, the user-to-record reduction,
// a two-phase private mean estimator, and budget reporting.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jdp/data_model.hpp"
#include "jdp/rng.hpp"

namespace jdp {

enum class PrivacyLevel { kRecord, kUser, kNone, kFullDpRecord, kFullDpUser };

const char* to_string(PrivacyLevel level);
PrivacyLevel privacy_level_from_string(const std::string& name);

struct PrivacySpec {
  double epsilon = 1.0;
  double delta = 1e-5;
  PrivacyLevel level = PrivacyLevel::kRecord;

  bool is_user_level() const { return level == PrivacyLevel::kUser || level == PrivacyLevel::kFullDpUser; }
  // 0 < epsilon <= 10 and 0 < delta < 1 unless level is none.
  void validate() const;
};

enum class NoisedBlocks { kSharedOnly, kAllBlocks };
const char* to_string(NoisedBlocks blocks);

struct NoisePlan {
  double sigma = 0.0;
  NoisedBlocks noised_blocks = NoisedBlocks::kSharedOnly;
  std::uint64_t T = 0;
  // Record-level budget the noise was calibrated for.
  double epsilon_record = 0.0;
  double delta_record = 0.0;
};

// sigma = L sqrt(T ln(1/delta)) / (epsilon m n).
double calibrate_sigma(double lipschitz, double T, double epsilon, double delta, double m, double n);

struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;
};

// (k eps, k e^{k eps} delta) for groups of k > 1 records; k = 1 is the identity.
PrivacyBudget group_privacy_lift(double epsilon, double delta, std::uint64_t group_size);

// Record-level budget that lifts back to the user-level one over groups of
// m/r records: epsilon r/m, and delta r/(m e^epsilon) rounded down until the
// lifted delta does not exceed the target. r = m is the identity.
PrivacyBudget user_level_reduction(double epsilon, double delta, std::uint64_t m, std::uint64_t r);

// Concentration radius of per-user average gradients,
// (L sqrt(r/m)) (sqrt(ln(1/gamma)) + sqrt(ell ln(max(R H m / (ell L), e)))).
double concentration_radius(double lipschitz, double r_shard, double m, double gamma, double ell,
                            double R, double H);

struct PrivateMeanOptions {
  // Draw the noise but scale it by zero (stream-aligned noiseless run).
  bool noiseless = false;
};

// Per-phase Gaussian standard deviations of private_mean.
struct PrivateMeanNoise {
  double phase1_sigma = 0.0;
  double phase2_sigma = 0.0;
};
PrivateMeanNoise private_mean_noise(std::size_t count, double epsilon, double delta, double tau,
                                    double norm_bound);

// Two-phase clip-and-noise mean: a coarse centre from the norm-clipped average,
// then the average of samples clipped to the 2 tau ball around that centre.
// Each phase spends (epsilon/2, delta/2) through the Gaussian mechanism
// sigma = sensitivity sqrt(2 ln(2.5/delta_phase)) / epsilon_phase.
std::vector<double> private_mean(std::span<const std::vector<double>> samples, double epsilon, double delta,
                                 double tau, double norm_bound, RandomStream& noise,
                                 const PrivateMeanOptions& options = {});

NoisePlan make_noise_plan(const PrivacySpec& spec, double lipschitz, std::uint64_t T, const ProblemSpec& problem);

struct BudgetReport {
  PrivacyLevel level = PrivacyLevel::kNone;
  double epsilon = 0.0;
  double delta = 0.0;
  double epsilon_record = 0.0;
  double delta_record = 0.0;
  double sigma = 0.0;
  std::uint64_t T = 0;
  NoisedBlocks noised_blocks = NoisedBlocks::kSharedOnly;

  std::string to_text() const;
  // Flat "key=value" lines with keys level, epsilon, delta, epsilon_record,
  // delta_record, sigma, T, noised_blocks.
  std::string to_key_value() const;
  static BudgetReport from_key_value(const std::string& text);

  friend bool operator==(const BudgetReport&, const BudgetReport&) = default;
};

BudgetReport budget_report(const PrivacySpec& spec, const NoisePlan& plan, const ProblemSpec& problem);

}  // namespace jdp
