#pragma once

// Experiment orchestration: single runs with paired seeds, paradigm
// comparisons, scaling sweeps with log-log fits, user-level sweeps, stability
// experiments, risk decomposition, and CSV / JSON-lines persistence.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jdp/config.hpp"
#include "jdp/stats.hpp"

namespace jdp {

// Every stream a run consumes. All but `repetition` derive from the
// experiment seed and the repetition index, so runs of different paradigms or
// grid points with the same repetition see the same data and sampling.
struct RunSeeds {
  std::uint64_t repetition = 0;
  std::uint64_t data = 0;
  std::uint64_t sampling = 0;
  std::uint64_t noise = 0;
  std::uint64_t init = 0;
  std::uint64_t eval = 0;

  // "rep/data/sampling/noise/init/eval" in decimal.
  std::string to_string() const;
  static RunSeeds parse(const std::string& text);
  friend bool operator==(const RunSeeds&, const RunSeeds&) = default;
};

RunSeeds seeds_for(std::uint64_t experiment_seed, std::uint64_t repetition);

// Seed of the synthetic centers; fixed by the data seed.
std::uint64_t task_seed(const RunSeeds& seeds);

struct DecompositionReport {
  double oracle_empirical_loss = 0.0;  // approximate min of f_S, from above
  double phi_opt = 0.0;                // f_S(output) - oracle minimum
  double phi_gen = 0.0;                // population estimate - f_S(output)
  double phi_gen_std_error = 0.0;
  double population_loss = 0.0;
  // Excess loss minus the two proxies: the implied empirical-vs-population
  // minimizer gap (not measured directly).
  double phi_approx_residual = 0.0;
};

struct RunReport {
  std::string config_hash;
  nlohmann::ordered_json config;  // canonical point config (without sweep and output)
  Paradigm paradigm = Paradigm::kCollabNoDp;
  RunSeeds seeds;
  std::size_t grid_index = 0;

  std::size_t n = 0, m = 0, r = 0, k = 0, ell = 0;
  double epsilon = 0.0;  // +inf for non-private paradigms
  double delta = 0.0;    // 0 for non-private paradigms

  ObjectiveValue excess;          // population excess loss, paired Monte Carlo
  std::string reference;          // "analytic" or "oracle"
  double empirical_loss = 0.0;
  std::optional<DecompositionReport> decomposition;
  double bound_value = 0.0;
  double wall_ms = 0.0;

  std::uint64_t T = 0;
  bool T_capped = false;
  double eta = 0.0;
  double sigma = 0.0;
  double tau = 0.0;
};

// Bound for the paradigm with every constant set to 1:
//   per_silo:        L (D_X + D_U) / sqrt(m)
//   collab_no_dp:    R L / sqrt(mn)
//   joint_dp/smooth: R L (1/sqrt(mn) + sqrt(ell ln(1/delta)) / (eps m n))
//   full_dp:         R L (1/sqrt(mn) + sqrt((nk + ell) ln(1/delta)) / (eps m n))
// At user level the privacy term reads sqrt(dim ln(m/(r delta))) / (eps n r).
double bound_value(const ExperimentConfig& point, Paradigm paradigm);

// Point config for one paradigm: the paradigm is set and the privacy level
// is mapped onto it (record <-> full_dp_record, user <-> full_dp_user, none
// for the non-private paradigms).
ExperimentConfig config_for_paradigm(const ExperimentConfig& point, Paradigm paradigm);

// OptimizerConfig a point config resolves to under the given seeds.
OptimizerConfig optimizer_config(const ExperimentConfig& point, const RunSeeds& seeds, bool* T_capped = nullptr);

// Long projected SGD with steps R/(L sqrt(t+1)) and suffix averaging over the
// second half; approximates argmin f_S.
PartitionedParams empirical_minimizer_oracle(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                                             std::uint64_t steps, std::uint64_t seed);

// Same scheme on fresh population draws; approximates argmin f for tasks
// without an analytic minimizer.
PartitionedParams population_minimizer_oracle(const SyntheticTask& task, const LossModel& model,
                                              const DomainSpec& spec, std::uint64_t steps, std::uint64_t seed);

// Runs the point config's paradigm under the given seeds.
RunReport run_single(const ExperimentConfig& point, const RunSeeds& seeds, std::size_t grid_index = 0);

DecompositionReport risk_decomposition(const ExperimentConfig& point, const Federation& fed, const SyntheticTask& task,
                                       const TrainResult& result, const ObjectiveValue& excess,
                                       std::uint64_t eval_seed);

// Runs `count` independent jobs on up to `jobs` threads; results land by index.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body);

// Per repetition, per_silo, collab_no_dp, joint_dp and full_dp on the same
// federation with the same seeds. Rows are ordered (repetition, paradigm).
std::vector<RunReport> compare_paradigms(const ExperimentConfig& config);

struct GridPoint {
  std::size_t index = 0;
  std::vector<std::pair<std::string, double>> coordinates;
  stats::MeanEstimate excess;  // over repetitions
  double bound_value = 0.0;
  double sigma = 0.0;
  std::uint64_t T = 0;
};

struct AxisFit {
  std::string axis;
  stats::SlopeFit fit;
};

struct SweepResult {
  std::vector<RunReport> rows;  // ordered by (grid index, repetition)
  std::vector<GridPoint> points;
  std::vector<AxisFit> fits;    // one per axis, other axes at their first value
  std::vector<std::string> notes;  // fits skipped or under-resolved, capped T
};

// Cartesian grid over config.sweep with config.experiment.repetitions seeds
// per point. Throws ConfigError when an axis has fewer than two values.
SweepResult scaling_sweep(const ExperimentConfig& config);

// joint_dp at user level for every r in `r_grid` (fixed n, m, epsilon).
SweepResult user_level_sweep(const ExperimentConfig& config, const std::vector<std::size_t>& r_grid);

struct StabilityReport {
  std::size_t pairs = 0;
  double mean_output_distance = 0.0;
  double max_output_distance = 0.0;
  double bound = 0.0;  // min(R, 4 L eta (sqrt(T) + T/(mn)))
  double R = 0.0;
  double eta = 0.0;
  std::uint64_t T = 0;
  std::vector<double> distances;
};

struct StabilityOptions {
  std::size_t pairs = 200;
  // Replace the record with itself; every distance must then be 0.
  bool self_neighbors = false;
};

// Record-level neighbours through replace_record with a fresh draw from the
// same owner distribution; both sides run rSGD with identical streams.
StabilityReport stability_experiment(const ExperimentConfig& config, const StabilityOptions& options);

// Fixed CSV layout.
const std::vector<std::string>& csv_columns();
std::string csv_header();
std::string csv_row(const RunReport& report, bool timing);
void write_csv(std::ostream& out, const std::vector<RunReport>& rows, bool timing);

// One JSON object per run: the point config, paradigm, seeds, every reported
// number and the CSV row it produced.
nlohmann::ordered_json log_entry(const RunReport& report, bool timing);
void write_log(std::ostream& out, const std::vector<RunReport>& rows, bool timing);

// Re-executes the run described by a log entry and returns its CSV row.
// Throws FormatError when the stored hash does not match the stored config.
std::string replay_log_entry(const nlohmann::json& entry, bool timing = false);

}  // namespace jdp
