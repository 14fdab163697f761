#include "jdp/privacy.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "jdp/errors.hpp"
#include "jdp/kernels/kernels.hpp"

namespace jdp {

const char* to_string(PrivacyLevel level) {
  switch (level) {
    case PrivacyLevel::kRecord: return "record";
    case PrivacyLevel::kUser: return "user";
    case PrivacyLevel::kNone: return "none";
    case PrivacyLevel::kFullDpRecord: return "full_dp_record";
    case PrivacyLevel::kFullDpUser: return "full_dp_user";
  }
  return "?";
}

PrivacyLevel privacy_level_from_string(const std::string& name) {
  if (name == "record") return PrivacyLevel::kRecord;
  if (name == "user") return PrivacyLevel::kUser;
  if (name == "none") return PrivacyLevel::kNone;
  if (name == "full_dp_record") return PrivacyLevel::kFullDpRecord;
  if (name == "full_dp_user") return PrivacyLevel::kFullDpUser;
  throw ConfigError("unknown privacy level '" + name + "'");
}

const char* to_string(NoisedBlocks blocks) {
  return blocks == NoisedBlocks::kSharedOnly ? "shared_only" : "all_blocks";
}

void PrivacySpec::validate() const {
  if (level == PrivacyLevel::kNone) return;
  if (!(epsilon > 0.0 && epsilon <= 10.0)) throw ConfigError("privacy: epsilon must lie in (0, 10]");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("privacy: delta must lie in (0, 1)");
}

double calibrate_sigma(double lipschitz, double T, double epsilon, double delta, double m, double n) {
  if (!(lipschitz > 0.0) || !(T > 0.0) || !(epsilon > 0.0) || !(m > 0.0) || !(n > 0.0)) {
    throw ConfigError("calibrate_sigma: L, T, epsilon, m, n must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("calibrate_sigma: delta must lie in (0, 1)");
  if (epsilon > 10.0) throw ConfigError("calibrate_sigma: epsilon must be <= 10");
  return lipschitz * std::sqrt(T * std::log(1.0 / delta)) / (epsilon * m * n);
}

PrivacyBudget group_privacy_lift(double epsilon, double delta, std::uint64_t group_size) {
  if (group_size < 1) throw ConfigError("group_privacy_lift: group size must be >= 1");
  if (group_size == 1) return {epsilon, delta};
  const double k = static_cast<double>(group_size);
  return {k * epsilon, k * std::exp(k * epsilon) * delta};
}

PrivacyBudget user_level_reduction(double epsilon, double delta, std::uint64_t m, std::uint64_t r) {
  if (r < 1 || m < 1 || m % r != 0) throw ConfigError("user_level_reduction: r must divide m");
  if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0)) {
    throw ConfigError("user_level_reduction: epsilon must be positive and delta in (0, 1)");
  }
  const std::uint64_t group = m / r;
  if (group == 1) return {epsilon, delta};
  const double k = static_cast<double>(group);

  // epsilon / k need not lift back to epsilon exactly; walk a few ulps to a
  // value that does, else settle on the nearest one that lifts to <= epsilon.
  double eps_record = epsilon / k;
  for (int step = 0; step < 16 && k * eps_record != epsilon; ++step) {
    eps_record = std::nextafter(eps_record, k * eps_record > epsilon ? 0.0 : epsilon);
  }
  while (k * eps_record > epsilon) eps_record = std::nextafter(eps_record, 0.0);

  double delta_record = delta / (k * std::exp(epsilon));
  while (group_privacy_lift(eps_record, delta_record, group).delta > delta) {
    delta_record = std::nextafter(delta_record, 0.0);
  }
  return {eps_record, delta_record};
}

double concentration_radius(double lipschitz, double r_shard, double m, double gamma, double ell,
                            double R, double H) {
  if (!(lipschitz > 0.0) || !(r_shard > 0.0) || !(m > 0.0) || !(ell > 0.0) || !(R > 0.0) || !(H > 0.0)) {
    throw ConfigError("concentration_radius: arguments must be positive");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("concentration_radius: gamma must lie in (0, 1)");
  const double log_arg = std::max(R * H * m / (ell * lipschitz), std::exp(1.0));
  return lipschitz * std::sqrt(r_shard / m) *
         (std::sqrt(std::log(1.0 / gamma)) + std::sqrt(ell * std::log(log_arg)));
}

PrivateMeanNoise private_mean_noise(std::size_t count, double epsilon, double delta, double tau,
                                    double norm_bound) {
  if (count < 2) throw ConfigError("private_mean needs at least two samples");
  if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) || !(tau > 0.0) || !(norm_bound > 0.0)) {
    throw ConfigError("private_mean: epsilon, tau, norm bound must be positive and delta in (0, 1)");
  }
  const double eps_phase = 0.5 * epsilon;
  const double delta_phase = 0.5 * delta;
  const double gauss = std::sqrt(2.0 * std::log(2.5 / delta_phase)) / eps_phase;
  const double c = static_cast<double>(count);
  return {2.0 * norm_bound / c * gauss, 4.0 * tau / c * gauss};
}

std::vector<double> private_mean(std::span<const std::vector<double>> samples, double epsilon, double delta,
                                 double tau, double norm_bound, RandomStream& noise,
                                 const PrivateMeanOptions& options) {
  if (samples.empty()) throw ConfigError("private_mean: empty input");
  const PrivateMeanNoise sigmas = private_mean_noise(samples.size(), epsilon, delta, tau, norm_bound);
  const std::size_t dim = samples.front().size();
  const double inv_count = 1.0 / static_cast<double>(samples.size());
  const double tol = 1e-9 * std::max(1.0, norm_bound);
  for (const auto& s : samples) {
    if (s.size() != dim) throw ConfigError("private_mean: samples have different dimensions");
    if (kernels::norm(s) > norm_bound + tol) throw ConfigError("private_mean: sample norm exceeds the declared bound");
  }
  const double noise_gain = options.noiseless ? 0.0 : 1.0;

  std::vector<double> clipped(dim);
  std::vector<double> draw(dim);
  std::vector<double> center(dim, 0.0);
  for (const auto& s : samples) {
    std::copy(s.begin(), s.end(), clipped.begin());
    project_to_ball(clipped, norm_bound);
    kernels::axpy(inv_count, clipped, center);
  }
  noise.fill_normal(draw, sigmas.phase1_sigma);
  kernels::axpy(noise_gain, draw, center);

  std::vector<double> estimate(dim, 0.0);
  for (const auto& s : samples) {
    kernels::subtract(s, center, clipped);
    project_to_ball(clipped, 2.0 * tau);
    kernels::axpy(1.0, center, clipped);
    kernels::axpy(inv_count, clipped, estimate);
  }
  noise.fill_normal(draw, sigmas.phase2_sigma);
  kernels::axpy(noise_gain, draw, estimate);
  return estimate;
}

NoisePlan make_noise_plan(const PrivacySpec& spec, double lipschitz, std::uint64_t T, const ProblemSpec& problem) {
  spec.validate();
  NoisePlan plan;
  plan.T = T;
  plan.noised_blocks = (spec.level == PrivacyLevel::kFullDpRecord || spec.level == PrivacyLevel::kFullDpUser)
                           ? NoisedBlocks::kAllBlocks
                           : NoisedBlocks::kSharedOnly;
  if (spec.level == PrivacyLevel::kNone) return plan;
  PrivacyBudget record{spec.epsilon, spec.delta};
  if (spec.is_user_level()) record = user_level_reduction(spec.epsilon, spec.delta, problem.m, problem.r);
  plan.epsilon_record = record.epsilon;
  plan.delta_record = record.delta;
  plan.sigma = calibrate_sigma(lipschitz, static_cast<double>(T), record.epsilon, record.delta,
                               static_cast<double>(problem.m), static_cast<double>(problem.n));
  return plan;
}

BudgetReport budget_report(const PrivacySpec& spec, const NoisePlan& plan, const ProblemSpec& problem) {
  BudgetReport report;
  report.level = spec.level;
  report.T = plan.T;
  report.noised_blocks = plan.noised_blocks;
  if (spec.level == PrivacyLevel::kNone) {
    report.epsilon = std::numeric_limits<double>::infinity();
    report.delta = 1.0;
    report.epsilon_record = report.epsilon;
    report.delta_record = report.delta;
    report.sigma = 0.0;
    return report;
  }
  report.epsilon = spec.epsilon;
  report.delta = spec.delta;
  PrivacyBudget record{spec.epsilon, spec.delta};
  if (spec.is_user_level()) record = user_level_reduction(spec.epsilon, spec.delta, problem.m, problem.r);
  report.epsilon_record = record.epsilon;
  report.delta_record = record.delta;
  report.sigma = plan.sigma;
  return report;
}

std::string BudgetReport::to_text() const {
  std::ostringstream out;
  out << "privacy level      : " << to_string(level) << '\n';
  if (level == PrivacyLevel::kNone) {
    out << "budget             : none (non-private)\n";
  } else {
    out << "budget             : (epsilon=" << epsilon << ", delta=" << delta << ")\n";
    out << "record-level budget: (epsilon=" << epsilon_record << ", delta=" << delta_record << ")\n";
  }
  out << "sigma              : " << sigma << '\n';
  out << "noised blocks      : " << to_string(noised_blocks) << '\n';
  out << "iterations T       : " << T << '\n';
  return out.str();
}

std::string BudgetReport::to_key_value() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "level=" << to_string(level) << '\n';
  out << "epsilon=" << epsilon << '\n';
  out << "delta=" << delta << '\n';
  out << "epsilon_record=" << epsilon_record << '\n';
  out << "delta_record=" << delta_record << '\n';
  out << "sigma=" << sigma << '\n';
  out << "T=" << T << '\n';
  out << "noised_blocks=" << to_string(noised_blocks) << '\n';
  return out.str();
}

BudgetReport BudgetReport::from_key_value(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("budget report: line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("budget report: missing key '") + key + "'");
    return it->second;
  };
  BudgetReport report;
  try {
    report.level = privacy_level_from_string(get("level"));
    report.epsilon = std::stod(get("epsilon"));
    report.delta = std::stod(get("delta"));
    report.epsilon_record = std::stod(get("epsilon_record"));
    report.delta_record = std::stod(get("delta_record"));
    report.sigma = std::stod(get("sigma"));
    report.T = std::stoull(get("T"));
  } catch (const std::invalid_argument&) {
    throw FormatError("budget report: malformed value");
  } catch (const std::out_of_range&) {
    throw FormatError("budget report: value out of range");
  }
  const std::string& blocks = get("noised_blocks");
  if (blocks == "shared_only") {
    report.noised_blocks = NoisedBlocks::kSharedOnly;
  } else if (blocks == "all_blocks") {
    report.noised_blocks = NoisedBlocks::kAllBlocks;
  } else {
    throw FormatError("budget report: unknown noised_blocks '" + blocks + "'");
  }
  return report;
}

}  // namespace jdp
