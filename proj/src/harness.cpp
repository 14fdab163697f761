#include "jdp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "jdp/errors.hpp"
#include "jdp/kernels/kernels.hpp"
#include "jdp/rng.hpp"

namespace jdp {

using nlohmann::json;
using nlohmann::ordered_json;

std::string RunSeeds::to_string() const {
  std::ostringstream out;
  out << repetition << '/' << data << '/' << sampling << '/' << noise << '/' << init << '/' << eval;
  return out.str();
}

RunSeeds RunSeeds::parse(const std::string& text) {
  std::uint64_t values[6];
  std::size_t pos = 0;
  for (int f = 0; f < 6; ++f) {
    const std::size_t end = f < 5 ? text.find('/', pos) : text.size();
    if (end == std::string::npos) throw FormatError("seed tuple needs six '/'-separated fields: " + text);
    const char* first = text.data() + pos;
    const char* last = text.data() + end;
    const auto [ptr, ec] = std::from_chars(first, last, values[f]);
    if (ec != std::errc() || ptr != last) throw FormatError("malformed seed tuple: " + text);
    pos = end + 1;
  }
  return {values[0], values[1], values[2], values[3], values[4], values[5]};
}

RunSeeds seeds_for(std::uint64_t experiment_seed, std::uint64_t repetition) {
  return {repetition,
          derive_seed(experiment_seed, "data", repetition),
          derive_seed(experiment_seed, "sampling", repetition),
          derive_seed(experiment_seed, "noise", repetition),
          derive_seed(experiment_seed, "init", repetition),
          derive_seed(experiment_seed, "eval", repetition)};
}

std::uint64_t task_seed(const RunSeeds& seeds) { return derive_seed(seeds.data, "task"); }

namespace {

bool is_private(Paradigm paradigm) {
  return paradigm == Paradigm::kJointDp || paradigm == Paradigm::kFullDp || paradigm == Paradigm::kSmoothJointDp;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

// Projected SGD with steps R/(L sqrt(t+1)), averaging the second half.
template <class Draw>
PartitionedParams long_sgd(const LossModel& model, const DomainSpec& spec, std::uint64_t steps, std::uint64_t seed,
                           Draw draw) {
  const double R = radius(spec);
  PartitionedParams params = PartitionedParams::zeros(spec);
  PartitionedParams sum = PartitionedParams::zeros(spec);
  RandomStream rng(seed);
  std::vector<double> gx(spec.k), gu(spec.ell);
  const std::uint64_t burn = steps / 2;
  for (std::uint64_t t = 0; t < steps; ++t) {
    const auto [j, z] = draw(rng);
    grad_into(model, params.x(j), params.u(), z, gx, gu);
    const double eta = R / (model.lipschitz * std::sqrt(static_cast<double>(t + 1)));
    kernels::axpy(-eta, gx, params.x(j));
    kernels::axpy(-eta, gu, params.u());
    project_touched(params, j, spec);
    if (t >= burn) kernels::axpy(1.0, params.values(), sum.values());
  }
  kernels::scale(1.0 / static_cast<double>(steps - burn), sum.values());
  return sum;
}

}  // namespace

double bound_value(const ExperimentConfig& point, Paradigm paradigm) {
  const double n = static_cast<double>(point.problem.n);
  const double m = static_cast<double>(point.problem.m);
  const double r = static_cast<double>(point.problem.r);
  const double L = point.loss.model().lipschitz;
  const double R = radius(point.domain);
  if (paradigm == Paradigm::kPerSilo) return L * (point.domain.d_x + point.domain.d_u) / std::sqrt(m);
  const double statistical = 1.0 / std::sqrt(m * n);
  if (paradigm == Paradigm::kCollabNoDp) return R * L * statistical;
  const auto& privacy = point.optimizer.privacy;
  const double ell = static_cast<double>(point.domain.ell);
  const double dim = paradigm == Paradigm::kFullDp ? n * static_cast<double>(point.domain.k) + ell : ell;
  double privacy_term;
  if (privacy.is_user_level()) {
    privacy_term = std::sqrt(dim * std::log(m / (r * privacy.delta))) / (privacy.epsilon * n * r);
  } else {
    privacy_term = std::sqrt(dim * std::log(1.0 / privacy.delta)) / (privacy.epsilon * m * n);
  }
  return R * L * (statistical + privacy_term);
}

ExperimentConfig config_for_paradigm(const ExperimentConfig& point, Paradigm paradigm) {
  ExperimentConfig out = point;
  out.optimizer.paradigm = paradigm;
  auto& level = out.optimizer.privacy.level;
  const bool user = level == PrivacyLevel::kUser || level == PrivacyLevel::kFullDpUser;
  if (!is_private(paradigm)) {
    level = PrivacyLevel::kNone;
  } else if (level == PrivacyLevel::kNone) {
    throw ConfigError(std::string("paradigm ") + to_string(paradigm) + " needs a privacy level other than none");
  } else if (paradigm == Paradigm::kFullDp) {
    level = user ? PrivacyLevel::kFullDpUser : PrivacyLevel::kFullDpRecord;
  } else {
    level = user ? PrivacyLevel::kUser : PrivacyLevel::kRecord;
  }
  out.normalize_and_validate();
  return out;
}

OptimizerConfig optimizer_config(const ExperimentConfig& point, const RunSeeds& seeds, bool* T_capped) {
  const auto& o = point.optimizer;
  OptimizerConfig cfg;
  cfg.paradigm = o.paradigm;
  cfg.T = point.resolve_T(o.paradigm, T_capped);
  cfg.eta = o.eta;
  cfg.privacy = o.privacy;
  cfg.seed_sampling = seeds.sampling;
  cfg.seed_noise = seeds.noise;
  cfg.seed_init = seeds.init;
  cfg.init = o.init;
  cfg.sigma_override = o.sigma_override;
  cfg.silo_T = o.silo_T;
  cfg.gamma = o.gamma;
  cfg.privatize_personalized = o.privatize_personalized;
  cfg.private_mean_noiseless = o.private_mean_noiseless;
  return cfg;
}

PartitionedParams empirical_minimizer_oracle(const Federation& fed, const LossModel& model, const DomainSpec& spec,
                                             std::uint64_t steps, std::uint64_t seed) {
  if (steps < 2) throw ConfigError("empirical_minimizer_oracle: need at least two steps");
  return long_sgd(model, spec, steps, seed, [&](RandomStream& rng) {
    const std::size_t j = rng.uniform_index(fed.owners());
    const std::size_t i = rng.uniform_index(fed.records_per_owner());
    return std::pair{j, fed.record(j, i)};
  });
}

PartitionedParams population_minimizer_oracle(const SyntheticTask& task, const LossModel& model,
                                              const DomainSpec& spec, std::uint64_t steps, std::uint64_t seed) {
  if (steps < 2) throw ConfigError("population_minimizer_oracle: need at least two steps");
  std::vector<double> record(task.record_dim());
  return long_sgd(model, spec, steps, seed, [&](RandomStream& rng) {
    const std::size_t j = rng.uniform_index(task.owners());
    task.sample(j, rng, record);
    return std::pair{j, std::span<const double>(record)};
  });
}

DecompositionReport risk_decomposition(const ExperimentConfig& point, const Federation& fed, const SyntheticTask& task,
                                       const TrainResult& result, const ObjectiveValue& excess,
                                       std::uint64_t eval_seed) {
  const LossModel model = point.loss.model();
  const std::uint64_t T = point.resolve_T(point.optimizer.paradigm);
  const std::uint64_t steps = std::max<std::uint64_t>(2, std::min(10 * T, point.experiment.oracle_steps_cap));
  const PartitionedParams oracle =
      empirical_minimizer_oracle(fed, model, point.domain, steps, derive_seed(eval_seed, "erm-oracle"));
  const ParamsView view = result.view();
  DecompositionReport out;
  out.oracle_empirical_loss = empirical_loss(model, oracle, fed).value;
  const double fs = empirical_loss(model, view, fed).value;
  const ObjectiveValue population =
      population_loss_estimate(model, view, task, point.experiment.eval_samples, eval_seed);
  out.population_loss = population.value;
  out.phi_opt = fs - out.oracle_empirical_loss;
  out.phi_gen = population.value - fs;
  out.phi_gen_std_error = population.std_error;
  out.phi_approx_residual = excess.value - out.phi_opt - out.phi_gen;
  return out;
}

RunReport run_single(const ExperimentConfig& point, const RunSeeds& seeds, std::size_t grid_index) {
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.config_hash = config_hash(point);
  report.config = to_json(point, false, false);
  report.paradigm = point.optimizer.paradigm;
  report.seeds = seeds;
  report.grid_index = grid_index;
  report.n = point.problem.n;
  report.m = point.problem.m;
  report.r = point.problem.r;
  report.k = point.domain.k;
  report.ell = point.domain.ell;
  if (is_private(report.paradigm)) {
    report.epsilon = point.optimizer.privacy.epsilon;
    report.delta = point.optimizer.privacy.delta;
  } else {
    report.epsilon = std::numeric_limits<double>::infinity();
    report.delta = 0.0;
  }

  const SyntheticTask task = make_task(point.domain, point.task, task_seed(seeds));
  ProblemSpec problem = point.problem;
  problem.seed = seeds.data;
  const Federation fed = generate(task, problem);
  const LossModel model = point.loss.model();
  const OptimizerConfig cfg = optimizer_config(point, seeds, &report.T_capped);
  const TrainResult result = train(fed, model, point.domain, cfg);
  report.T = result.T;
  report.eta = result.eta;
  report.sigma = result.sigma;
  report.tau = result.tau;

  PartitionedParams reference;
  if (task.kind == TaskKind::kSharedMean) {
    reference = task.center_params();
    report.reference = "analytic";
  } else {
    reference = population_minimizer_oracle(task, model, point.domain, point.experiment.oracle_steps_cap,
                                            derive_seed(task_seed(seeds), "population-oracle"));
    report.reference = "oracle";
  }
  const ParamsView view = result.view();
  report.excess = paired_population_gap(model, view, view_of(reference), task, point.experiment.eval_samples,
                                        seeds.eval);
  report.empirical_loss = empirical_loss(model, view, fed).value;
  if (point.experiment.decompose) {
    report.decomposition = risk_decomposition(point, fed, task, result, report.excess, seeds.eval);
  }
  report.bound_value = bound_value(point, report.paradigm);
  report.wall_ms = elapsed_ms(start);
  return report;
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& worker : workers) worker.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<RunReport> compare_paradigms(const ExperimentConfig& config) {
  static constexpr Paradigm kParadigms[] = {Paradigm::kPerSilo, Paradigm::kCollabNoDp, Paradigm::kJointDp,
                                            Paradigm::kFullDp};
  std::vector<ExperimentConfig> points;
  for (Paradigm p : kParadigms) points.push_back(config_for_paradigm(config, p));
  const std::size_t reps = config.experiment.repetitions;
  std::vector<RunReport> rows(reps * points.size());
  parallel_for(rows.size(), config.experiment.jobs, [&](std::size_t idx) {
    const std::size_t rep = idx / points.size();
    rows[idx] = run_single(points[idx % points.size()], seeds_for(config.experiment.seed, rep), 0);
  });
  return rows;
}

SweepResult scaling_sweep(const ExperimentConfig& config) {
  if (config.sweep.empty()) throw ConfigError("sweep: the config has no sweep section");
  for (const auto& axis : config.sweep) {
    if (axis.values.size() < 2) throw ConfigError("sweep: axis '" + axis.name + "' needs at least two values");
  }
  SweepResult out;
  for (const auto& axis : config.sweep) {
    if (axis.values.size() < 4) {
      out.notes.push_back("axis " + axis.name + " has fewer than 4 points; its slope is weakly determined");
    }
  }

  // Mixed-radix enumeration, last axis fastest.
  std::size_t grid_size = 1;
  for (const auto& axis : config.sweep) grid_size *= axis.values.size();
  std::vector<ExperimentConfig> points;
  std::vector<std::vector<std::size_t>> digits;
  for (std::size_t g = 0; g < grid_size; ++g) {
    std::vector<std::size_t> d(config.sweep.size());
    std::size_t rest = g;
    for (std::size_t a = config.sweep.size(); a-- > 0;) {
      d[a] = rest % config.sweep[a].values.size();
      rest /= config.sweep[a].values.size();
    }
    std::vector<std::pair<std::string, double>> coords;
    for (std::size_t a = 0; a < d.size(); ++a) coords.emplace_back(config.sweep[a].name, config.sweep[a].values[d[a]]);
    ExperimentConfig point = config.with_axes(coords);
    point.sweep.clear();
    points.push_back(config_for_paradigm(point, point.optimizer.paradigm));
    digits.push_back(d);
    GridPoint gp;
    gp.index = g;
    gp.coordinates = coords;
    gp.bound_value = bound_value(points.back(), points.back().optimizer.paradigm);
    out.points.push_back(gp);
  }

  const std::size_t reps = config.experiment.repetitions;
  out.rows.resize(grid_size * reps);
  parallel_for(out.rows.size(), config.experiment.jobs, [&](std::size_t idx) {
    const std::size_t g = idx / reps;
    out.rows[idx] = run_single(points[g], seeds_for(config.experiment.seed, idx % reps), g);
  });

  bool capped = false;
  for (std::size_t g = 0; g < grid_size; ++g) {
    std::vector<double> values;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const RunReport& row = out.rows[g * reps + rep];
      values.push_back(row.excess.value);
      capped = capped || row.T_capped;
    }
    out.points[g].excess = stats::mean_and_stderr(values);
    out.points[g].sigma = out.rows[g * reps].sigma;
    out.points[g].T = out.rows[g * reps].T;
  }
  if (capped) out.notes.push_back("the (mn)^2 iteration default exceeded T_cap at some grid points; T was capped");

  for (std::size_t a = 0; a < config.sweep.size(); ++a) {
    std::vector<double> xs, ys;
    for (std::size_t g = 0; g < grid_size; ++g) {
      bool others_first = true;
      for (std::size_t b = 0; b < digits[g].size(); ++b) others_first = others_first && (b == a || digits[g][b] == 0);
      if (!others_first) continue;
      xs.push_back(config.sweep[a].values[digits[g][a]]);
      ys.push_back(out.points[g].excess.mean);
    }
    const bool positive = std::all_of(xs.begin(), xs.end(), [](double v) { return v > 0.0; }) &&
                          std::all_of(ys.begin(), ys.end(), [](double v) { return v > 0.0; });
    if (!positive) {
      out.notes.push_back("axis " + config.sweep[a].name + ": non-positive values, no log-log fit");
      continue;
    }
    out.fits.push_back({config.sweep[a].name, stats::log_log_slope(xs, ys)});
  }
  return out;
}

SweepResult user_level_sweep(const ExperimentConfig& config, const std::vector<std::size_t>& r_grid) {
  if (r_grid.empty()) throw ConfigError("user-level sweep: empty r grid");
  ExperimentConfig base = config;
  base.optimizer.paradigm = Paradigm::kJointDp;
  base.optimizer.privacy.level = PrivacyLevel::kUser;
  SweepAxis axis{"r", {}};
  for (std::size_t r : r_grid) {
    if (r < 1 || base.problem.m % r != 0) {
      throw ConfigError("user-level sweep: r = " + std::to_string(r) + " does not divide m = " +
                        std::to_string(base.problem.m));
    }
    axis.values.push_back(static_cast<double>(r));
  }
  base.sweep = {axis};
  if (axis.values.size() < 2) {
    // A single r is still a valid table; run it without a fit.
    base.sweep.clear();
    ExperimentConfig point = config_for_paradigm(base.with_axis("r", axis.values[0]), Paradigm::kJointDp);
    SweepResult out;
    const std::size_t reps = config.experiment.repetitions;
    out.rows.resize(reps);
    parallel_for(reps, config.experiment.jobs,
                 [&](std::size_t rep) { out.rows[rep] = run_single(point, seeds_for(config.experiment.seed, rep), 0); });
    std::vector<double> values;
    for (const auto& row : out.rows) values.push_back(row.excess.value);
    GridPoint gp;
    gp.coordinates = {{"r", axis.values[0]}};
    gp.excess = stats::mean_and_stderr(values);
    gp.bound_value = bound_value(point, Paradigm::kJointDp);
    gp.sigma = out.rows[0].sigma;
    gp.T = out.rows[0].T;
    out.points.push_back(gp);
    return out;
  }
  return scaling_sweep(base);
}

StabilityReport stability_experiment(const ExperimentConfig& config, const StabilityOptions& options) {
  if (options.pairs < 1) throw ConfigError("stability: need at least one pair");
  ExperimentConfig point = config;
  point.sweep.clear();
  point = config_for_paradigm(point, Paradigm::kCollabNoDp);
  const LossModel model = point.loss.model();
  StabilityReport report;
  report.pairs = options.pairs;
  report.R = radius(point.domain);
  report.T = point.resolve_T(Paradigm::kCollabNoDp);
  report.eta = point.optimizer.eta.value_or(default_eta(report.R, model.lipschitz, report.T, 0.0, 0.0));
  const double mn = static_cast<double>(point.problem.m * point.problem.n);
  const double T = static_cast<double>(report.T);
  report.bound = std::min(report.R, 4.0 * model.lipschitz * report.eta * (std::sqrt(T) + T / mn));

  report.distances.assign(options.pairs, 0.0);
  parallel_for(options.pairs, config.experiment.jobs, [&](std::size_t p) {
    const RunSeeds seeds = seeds_for(config.experiment.seed, p);
    const SyntheticTask task = make_task(point.domain, point.task, task_seed(seeds));
    ProblemSpec problem = point.problem;
    problem.seed = seeds.data;
    const Federation fed = generate(task, problem);
    RandomStream pick(derive_seed(seeds.data, "neighbor"));
    const std::size_t j = pick.uniform_index(fed.owners());
    const std::size_t i = pick.uniform_index(fed.records_per_owner());
    std::vector<double> fresh(fed.record(j, i).begin(), fed.record(j, i).end());
    if (!options.self_neighbors) task.sample(j, pick, fresh);
    const Federation neighbor = replace_record(fed, j, i, fresh);
    OptimizerConfig cfg = optimizer_config(point, seeds);
    cfg.T = report.T;
    cfg.eta = report.eta;
    const TrainResult a = run_rsgd(fed, model, point.domain, cfg);
    const TrainResult b = run_rsgd(neighbor, model, point.domain, cfg);
    report.distances[p] = kernels::distance(a.final_params.values(), b.final_params.values());
  });
  double sum = 0.0;
  for (double d : report.distances) {
    sum += d;
    report.max_output_distance = std::max(report.max_output_distance, d);
  }
  report.mean_output_distance = sum / static_cast<double>(options.pairs);
  return report;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> columns{
      "config_hash", "n",           "m",       "r",       "k",    "ell", "epsilon",   "delta",
      "paradigm",    "seed",        "excess_loss", "stderr", "phi_opt", "phi_gen", "bound_value", "wall_ms",
      "T",           "eta",         "sigma",   "reference", "grid_index"};
  return columns;
}

std::string csv_header() {
  std::string out;
  for (const auto& c : csv_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

std::string csv_row(const RunReport& r, bool timing) {
  std::ostringstream out;
  out << r.config_hash << ',' << r.n << ',' << r.m << ',' << r.r << ',' << r.k << ',' << r.ell << ','
      << format_double(r.epsilon) << ',' << format_double(r.delta) << ',' << to_string(r.paradigm) << ','
      << r.seeds.to_string() << ',' << format_double(r.excess.value) << ',' << format_double(r.excess.std_error) << ','
      << (r.decomposition ? format_double(r.decomposition->phi_opt) : "-") << ','
      << (r.decomposition ? format_double(r.decomposition->phi_gen) : "-") << ',' << format_double(r.bound_value)
      << ',' << (timing ? format_double(std::round(r.wall_ms * 1000.0) / 1000.0) : "-") << ',' << r.T << ','
      << format_double(r.eta) << ',' << format_double(r.sigma) << ',' << r.reference << ',' << r.grid_index;
  return out.str();
}

void write_csv(std::ostream& out, const std::vector<RunReport>& rows, bool timing) {
  out << csv_header() << '\n';
  for (const auto& row : rows) out << csv_row(row, timing) << '\n';
}

ordered_json log_entry(const RunReport& r, bool timing) {
  ordered_json j;
  j["config_hash"] = r.config_hash;
  j["grid_index"] = r.grid_index;
  j["paradigm"] = to_string(r.paradigm);
  j["seed"] = r.seeds.to_string();
  j["seeds"] = {{"repetition", r.seeds.repetition}, {"data", r.seeds.data},   {"sampling", r.seeds.sampling},
                {"noise", r.seeds.noise},           {"init", r.seeds.init},   {"eval", r.seeds.eval}};
  j["config"] = r.config;
  j["T"] = r.T;
  j["T_capped"] = r.T_capped;
  j["eta"] = r.eta;
  j["sigma"] = r.sigma;
  j["tau"] = r.tau;
  j["excess_loss"] = r.excess.value;
  j["stderr"] = r.excess.std_error;
  j["reference"] = r.reference;
  j["empirical_loss"] = r.empirical_loss;
  if (r.decomposition) {
    const auto& d = *r.decomposition;
    j["decomposition"] = {{"oracle_empirical_loss", d.oracle_empirical_loss},
                          {"phi_opt", d.phi_opt},
                          {"phi_gen", d.phi_gen},
                          {"phi_gen_stderr", d.phi_gen_std_error},
                          {"population_loss", d.population_loss},
                          {"phi_approx_residual", d.phi_approx_residual},
                          {"note", "oracle minimum is approximate from above; phi_approx is not measured"}};
  } else {
    j["decomposition"] = nullptr;
  }
  j["bound_value"] = r.bound_value;
  j["excess_within_mc_error"] = r.excess.value >= -3.0 * r.excess.std_error;
  if (timing) j["wall_ms"] = r.wall_ms;
  j["csv_row"] = csv_row(r, timing);
  return j;
}

void write_log(std::ostream& out, const std::vector<RunReport>& rows, bool timing) {
  for (const auto& row : rows) out << log_entry(row, timing).dump() << '\n';
}

std::string replay_log_entry(const json& entry, bool timing) {
  if (!entry.contains("config") || !entry.contains("seed") || !entry.contains("config_hash")) {
    throw FormatError("log entry lacks config, seed or config_hash");
  }
  const ExperimentConfig point = config_from_json(entry.at("config"));
  if (config_hash(point) != entry.at("config_hash").get<std::string>()) {
    throw FormatError("log entry: config hash does not match the stored config");
  }
  const RunSeeds seeds = RunSeeds::parse(entry.at("seed").get<std::string>());
  const std::size_t grid_index = entry.value("grid_index", std::size_t{0});
  return csv_row(run_single(point, seeds, grid_index), timing);
}

}  // namespace jdp
