#pragma once

// Experiment configuration: the structured text file (YAML) and its canonical
// JSON form, which is what the run log stores and what config hashes cover.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jdp/core_params.hpp"
#include "jdp/data_model.hpp"
#include "jdp/losses.hpp"
#include "jdp/optimizers.hpp"
#include "jdp/privacy.hpp"

namespace jdp {

enum class TPolicy {
  kMnSquared,  // T = (mn)^2, capped at T_cap
  kMn,         // T = mn: one pass worth of samples
  kFixed,      // T taken from optimizer.T
};

const char* to_string(TPolicy policy);

struct LossSettings {
  LossKind kind = LossKind::kSharedMeanNorm;
  double mu = 0.1;
  double feature_bound = 1.0;

  LossModel model() const;
};

struct OptimizerSettings {
  Paradigm paradigm = Paradigm::kJointDp;
  TPolicy t_policy = TPolicy::kMnSquared;
  std::optional<std::uint64_t> T;
  std::uint64_t T_cap = 1'000'000;
  std::optional<double> eta;
  PrivacySpec privacy{1.0, 1e-5, PrivacyLevel::kRecord};
  InitPolicy init = InitPolicy::kOrigin;
  std::optional<double> sigma_override;
  std::optional<std::uint64_t> silo_T;
  double gamma = 1e-3;
  bool privatize_personalized = true;
  bool private_mean_noiseless = false;
};

struct SweepAxis {
  std::string name;  // one of n, m, r, ell, epsilon, eta, T
  std::vector<double> values;
};

struct ExperimentSettings {
  std::size_t repetitions = 20;
  std::size_t eval_samples = 2000;
  std::uint64_t seed = 1;        // base of every per-repetition seed
  bool decompose = false;        // risk decomposition (needs an empirical-minimizer oracle run)
  std::uint64_t oracle_steps_cap = 2'000'000;
  std::size_t jobs = 1;
};

struct OutputSettings {
  std::string dir = ".";
  std::string csv = "results.csv";
  std::string log = "runs.jsonl";
  bool timing = false;  // fill the wall_ms CSV column
};

struct ExperimentConfig {
  TaskOptions task;
  ProblemSpec problem;  // record_dim is derived from the task and domain
  DomainSpec domain;
  LossSettings loss;
  OptimizerSettings optimizer;
  std::vector<SweepAxis> sweep;
  ExperimentSettings experiment;
  OutputSettings output;

  // Keeps n and record_dim consistent across sections, then checks every
  // invariant. Throws ConfigError with the offending field.
  void normalize_and_validate();

  // Iterations for this configuration under the T policy and cap; sets
  // `capped` when the (mn)^2 default was cut.
  std::uint64_t resolve_T(Paradigm paradigm, bool* capped = nullptr) const;

  // Copy with one sweep axis set to `value` (n, m, r, ell, epsilon, eta, T).
  ExperimentConfig with_axis(const std::string& axis, double value) const;
  // Sets several axes, validating once at the end.
  ExperimentConfig with_axes(const std::vector<std::pair<std::string, double>>& coordinates) const;
};

// Canonical JSON (fixed key order). `include_sweep` and `include_output` are
// off for the form that gets hashed and logged per row.
nlohmann::ordered_json to_json(const ExperimentConfig& config, bool include_sweep = true,
                               bool include_output = true);
ExperimentConfig config_from_json(const nlohmann::ordered_json& j);
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& yaml_text);

// 16 hex digits of FNV-1a over the canonical JSON without sweep and output.
std::string config_hash(const ExperimentConfig& config);

// Documented configuration schema, printed by `jdpsim --help-config`.
std::string config_schema_text();

}  // namespace jdp
