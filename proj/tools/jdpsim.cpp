// jdpsim: command-line driver for the experiments.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "jdp/config.hpp"
#include "jdp/errors.hpp"
#include "jdp/harness.hpp"
#include "jdp/kernels/kernels.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kOutputDirEnv = "JDP_OUTPUT_DIR";

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> repetitions;
  std::optional<std::size_t> eval_samples;
  std::optional<std::size_t> jobs;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_config = true) {
  auto* cfg = cmd->add_option("config", o.config_path, "YAML experiment config");
  if (needs_config) cfg->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "experiment base seed (overrides experiment.seed)");
  cmd->add_option("--out", o.out, "output directory (overrides output.dir and $" + std::string(kOutputDirEnv) + ")");
  cmd->add_option("--repetitions", o.repetitions, "seeds per grid point (overrides experiment.repetitions)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--eval-samples", o.eval_samples, "Monte-Carlo draws per population estimate")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--jobs", o.jobs, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  cmd->add_flag("--timing", o.timing, "fill the wall_ms CSV column (rows are then not reproducible)");
}

jdp::ExperimentConfig load(const CommonOptions& o) {
  jdp::ExperimentConfig config = jdp::load_config_file(o.config_path);
  if (o.seed) config.experiment.seed = *o.seed;
  if (o.repetitions) config.experiment.repetitions = *o.repetitions;
  if (o.eval_samples) config.experiment.eval_samples = *o.eval_samples;
  if (o.jobs) config.experiment.jobs = *o.jobs;
  if (o.timing) config.output.timing = true;
  if (o.out) {
    config.output.dir = *o.out;
  } else if (config.output.dir == ".") {
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') config.output.dir = env;
  }
  config.normalize_and_validate();
  return config;
}

fs::path output_path(const jdp::ExperimentConfig& config, const std::string& file) {
  fs::path dir(config.output.dir);
  fs::create_directories(dir);
  return dir / file;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void persist(const jdp::ExperimentConfig& config, const std::vector<jdp::RunReport>& rows) {
  const fs::path csv = output_path(config, config.output.csv);
  const fs::path log = output_path(config, config.output.log);
  auto csv_out = open_out(csv);
  jdp::write_csv(csv_out, rows, config.output.timing);
  auto log_out = open_out(log);
  jdp::write_log(log_out, rows, config.output.timing);
  std::cerr << "wrote " << rows.size() << " rows to " << csv.string() << " and " << log.string() << '\n';
}

void warn_capped(const std::vector<jdp::RunReport>& rows) {
  for (const auto& row : rows) {
    if (row.T_capped) {
      std::cerr << "warning: the (mn)^2 iteration default exceeds T_cap; T was capped at " << row.T << '\n';
      return;
    }
  }
}

void print_sweep(const jdp::SweepResult& result) {
  std::cout << std::setprecision(6);
  std::cout << "grid_index,coordinates,mean_excess_loss,stderr,bound_value,sigma,T\n";
  for (const auto& p : result.points) {
    std::cout << p.index << ',';
    for (std::size_t a = 0; a < p.coordinates.size(); ++a) {
      std::cout << (a ? ";" : "") << p.coordinates[a].first << '=' << p.coordinates[a].second;
    }
    std::cout << ',' << p.excess.mean << ',' << p.excess.std_error << ',' << p.bound_value << ',' << p.sigma << ','
              << p.T << '\n';
  }
  for (const auto& f : result.fits) {
    std::cout << "slope vs " << f.axis << ": " << f.fit.slope << " (95% CI " << f.fit.ci_low << " .. "
              << f.fit.ci_high << ", " << f.fit.points << " points)\n";
  }
  for (const auto& note : result.notes) std::cerr << "note: " << note << '\n';
}

void write_sweep_summary(const jdp::ExperimentConfig& config, const jdp::SweepResult& result) {
  nlohmann::ordered_json j;
  j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : result.points) {
    nlohmann::ordered_json coords;
    for (const auto& [axis, value] : p.coordinates) coords[axis] = value;
    j["points"].push_back({{"grid_index", p.index},
                           {"coordinates", coords},
                           {"mean_excess_loss", p.excess.mean},
                           {"stderr", p.excess.std_error},
                           {"repetitions", p.excess.count},
                           {"bound_value", p.bound_value},
                           {"sigma", p.sigma},
                           {"T", p.T}});
  }
  j["fits"] = nlohmann::ordered_json::array();
  for (const auto& f : result.fits) {
    j["fits"].push_back({{"axis", f.axis},
                         {"slope", f.fit.slope},
                         {"intercept", f.fit.intercept},
                         {"slope_stderr", f.fit.slope_std_error},
                         {"ci_low", f.fit.ci_low},
                         {"ci_high", f.fit.ci_high},
                         {"points", f.fit.points}});
  }
  j["notes"] = result.notes;
  auto out = open_out(output_path(config, "sweep_summary.json"));
  out << j.dump(2) << '\n';
}

std::vector<std::size_t> parse_r_grid(const std::vector<std::size_t>& flag, const jdp::ExperimentConfig& config) {
  if (!flag.empty()) return flag;
  for (const auto& axis : config.sweep) {
    if (axis.name == "r") {
      std::vector<std::size_t> out;
      for (double v : axis.values) out.push_back(static_cast<std::size_t>(v));
      return out;
    }
  }
  throw jdp::ConfigError("user-sweep needs --r-grid or a sweep.r list in the config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jdpsim: personalized collaborative learning under joint differential privacy.\n"
               "Runs paradigm comparisons, scaling sweeps, user-level sweeps and stability experiments\n"
               "on synthetic convex tasks; writes a CSV table and a JSON-lines run log.\n"
               "Default output directory: $" + std::string(kOutputDirEnv) + " when output.dir is unset."};
  app.require_subcommand(1);
  std::string kernel_choice = "auto";
  app.add_option("--kernels", kernel_choice, "vector kernels: auto, scalar or avx2 (also $JDP_KERNELS)")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));
  bool help_config = false;
  app.add_flag("--help-config", help_config, "print the config file schema and exit");

  CommonOptions common;

  auto* compare = app.add_subcommand("compare", "run per_silo, collab_no_dp, joint_dp and full_dp on paired seeds");
  add_common(compare, common);

  auto* sweep = app.add_subcommand("sweep", "scaling sweep over the config's sweep grid with log-log fits");
  add_common(sweep, common);

  std::vector<std::size_t> r_grid;
  auto* user_sweep = app.add_subcommand("user-sweep", "joint_dp at user level over a grid of users per owner");
  add_common(user_sweep, common);
  user_sweep->add_option("--r-grid", r_grid, "users per owner, each dividing m (default: sweep.r)")->delimiter(',');

  jdp::StabilityOptions stability_options;
  auto* stability = app.add_subcommand("stability", "output distance of rSGD on record-level neighbours");
  add_common(stability, common);
  stability->add_option("--pairs", stability_options.pairs, "neighbour pairs")->check(CLI::PositiveNumber);
  stability->add_flag("--self", stability_options.self_neighbors, "replace each record with itself");

  std::optional<double> lipschitz_override;
  bool key_value_only = false;
  auto* calibrate = app.add_subcommand("calibrate", "print the privacy budget report for the config");
  add_common(calibrate, common);
  calibrate->add_option("--lipschitz", lipschitz_override, "override the loss Lipschitz constant")
      ->check(CLI::PositiveNumber);
  calibrate->add_flag("--key-value", key_value_only, "print only the key=value form");

  std::string federation_path;
  std::uint64_t gen_repetition = 0;
  auto* gen = app.add_subcommand("gen", "write the federation of one repetition to a text file");
  add_common(gen, common);
  gen->add_option("--file", federation_path, "federation file name (default federation.txt in the output dir)");
  gen->add_option("--repetition", gen_repetition, "repetition whose data seed is used");

  std::string log_path;
  std::optional<std::size_t> replay_row;
  bool replay_check = false;
  auto* replay = app.add_subcommand("replay", "re-execute runs from a JSON-lines log and print their CSV rows");
  replay->add_option("log", log_path, "run log written by another subcommand")->required()->check(CLI::ExistingFile);
  replay->add_option("--row", replay_row, "0-based log line to replay (default: all)");
  replay->add_flag("--check", replay_check, "exit nonzero unless every replayed row equals the stored one");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (help_config) {
      std::cout << jdp::config_schema_text();
      return 0;
    }
    return app.exit(e);
  }
  if (help_config) {
    std::cout << jdp::config_schema_text();
    return 0;
  }

  try {
    if (kernel_choice != "auto") jdp::kernels::select(kernel_choice);

    if (*compare) {
      const auto config = load(common);
      const auto rows = jdp::compare_paradigms(config);
      warn_capped(rows);
      persist(config, rows);
      std::cout << std::setprecision(6) << "paradigm,mean_excess_loss,stderr,bound_value\n";
      for (jdp::Paradigm p : {jdp::Paradigm::kPerSilo, jdp::Paradigm::kCollabNoDp, jdp::Paradigm::kJointDp,
                              jdp::Paradigm::kFullDp}) {
        std::vector<double> values;
        double bound = 0.0;
        for (const auto& row : rows) {
          if (row.paradigm != p) continue;
          values.push_back(row.excess.value);
          bound = row.bound_value;
        }
        const auto est = jdp::stats::mean_and_stderr(values);
        std::cout << jdp::to_string(p) << ',' << est.mean << ',' << est.std_error << ',' << bound << '\n';
      }
    } else if (*sweep) {
      const auto config = load(common);
      const auto result = jdp::scaling_sweep(config);
      persist(config, result.rows);
      write_sweep_summary(config, result);
      print_sweep(result);
    } else if (*user_sweep) {
      const auto config = load(common);
      const auto result = jdp::user_level_sweep(config, parse_r_grid(r_grid, config));
      warn_capped(result.rows);
      persist(config, result.rows);
      write_sweep_summary(config, result);
      print_sweep(result);
    } else if (*stability) {
      const auto config = load(common);
      const auto report = jdp::stability_experiment(config, stability_options);
      std::cout << std::setprecision(8) << "pairs=" << report.pairs << '\n'
                << "mean_output_distance=" << report.mean_output_distance << '\n'
                << "max_output_distance=" << report.max_output_distance << '\n'
                << "bound=" << report.bound << '\n'
                << "R=" << report.R << '\n'
                << "eta=" << report.eta << '\n'
                << "T=" << report.T << '\n';
      auto out = open_out(output_path(config, "stability.csv"));
      out << "pair,output_distance\n" << std::setprecision(17);
      for (std::size_t p = 0; p < report.distances.size(); ++p) out << p << ',' << report.distances[p] << '\n';
    } else if (*calibrate) {
      const auto config = load(common);
      const double L = lipschitz_override.value_or(config.loss.model().lipschitz);
      const jdp::Paradigm paradigm = config.optimizer.paradigm;
      const std::uint64_t T = config.resolve_T(paradigm);
      jdp::ProblemSpec problem = config.problem;
      const auto plan = jdp::make_noise_plan(config.optimizer.privacy, L, T, problem);
      const auto report = jdp::budget_report(config.optimizer.privacy, plan, problem);
      if (!key_value_only) std::cout << report.to_text();
      std::cout << report.to_key_value();
    } else if (*gen) {
      const auto config = load(common);
      const auto seeds = jdp::seeds_for(config.experiment.seed, gen_repetition);
      const auto task = jdp::make_task(config.domain, config.task, jdp::task_seed(seeds));
      jdp::ProblemSpec problem = config.problem;
      problem.seed = seeds.data;
      const auto fed = jdp::generate(task, problem);
      const fs::path path = federation_path.empty() ? output_path(config, "federation.txt")
                                                    : fs::path(federation_path);
      jdp::save_federation(path.string(), fed);
      std::cerr << "wrote federation (n=" << fed.owners() << ", m=" << fed.records_per_owner()
                << ", r=" << fed.users_per_owner() << ", d=" << fed.record_dim() << ") to " << path.string() << '\n';
    } else if (*replay) {
      std::ifstream in(log_path);
      std::string line;
      std::size_t index = 0;
      bool all_match = true;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (!replay_row || *replay_row == index) {
          const auto entry = nlohmann::json::parse(line);
          const std::string row = jdp::replay_log_entry(entry, false);
          std::cout << row << '\n';
          if (entry.contains("csv_row") && entry.at("csv_row").get<std::string>() != row) {
            all_match = false;
            std::cerr << "row " << index << " differs from the stored row\n";
          }
        }
        ++index;
      }
      if (replay_row && *replay_row >= index) throw jdp::ConfigError("replay: log has only " + std::to_string(index) + " rows");
      if (replay_check && !all_match) return 3;
    }
  } catch (const jdp::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const jdp::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
