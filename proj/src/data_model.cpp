#include "jdp/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "jdp/errors.hpp"
#include "jdp/kernels/kernels.hpp"

namespace jdp {

void ProblemSpec::validate() const {
  if (n < 1 || m < 1) throw ConfigError("problem: n and m must be >= 1");
  if (r < 1 || r > m || m % r != 0) {
    throw ConfigError("problem: r=" + std::to_string(r) + " must divide m=" + std::to_string(m));
  }
  if (record_dim < 1) throw ConfigError("problem: record_dim must be >= 1");
}

const char* to_string(TaskKind kind) {
  return kind == TaskKind::kSharedMean ? "shared_mean" : "logistic";
}

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "shared_mean") return TaskKind::kSharedMean;
  if (name == "logistic") return TaskKind::kLogistic;
  throw ConfigError("unknown task kind '" + name + "'");
}

double SyntheticTask::truncation_radius(std::size_t dim) const {
  return 4.0 * noise_scale * std::sqrt(static_cast<double>(dim));
}

double SyntheticTask::record_norm_bound() const {
  if (kind == TaskKind::kLogistic) return std::sqrt(feature_bound * feature_bound + 1.0);
  double px = 0.0;
  for (const auto& p : personalized_centers) px = std::max(px, kernels::norm(p));
  const double bx = px + truncation_radius(k);
  const double bu = kernels::norm(shared_center) + truncation_radius(ell);
  return std::sqrt(bx * bx + bu * bu);
}

namespace {

void truncated_noise(RandomStream& rng, std::span<double> out, double stddev, double bound) {
  rng.fill_normal(out, stddev);
  project_to_ball(out, bound);
}

void random_unit(RandomStream& rng, std::span<double> out) {
  if (out.empty()) return;
  double norm = 0.0;
  do {
    rng.fill_normal(out, 1.0);
    norm = kernels::norm(out);
  } while (norm == 0.0);
  kernels::scale(1.0 / norm, out);
}

}  // namespace

void SyntheticTask::sample(std::size_t owner, RandomStream& rng, std::span<double> out) const {
  const auto& p = personalized_centers[owner];
  if (kind == TaskKind::kSharedMean) {
    auto zx = out.first(k);
    auto zu = out.subspan(k, ell);
    truncated_noise(rng, zx, noise_scale, truncation_radius(k));
    truncated_noise(rng, zu, noise_scale, truncation_radius(ell));
    kernels::axpy(1.0, p, zx);
    kernels::axpy(1.0, shared_center, zu);
    return;
  }
  auto features = out.first(k + ell);
  rng.fill_normal(features, feature_bound / std::sqrt(static_cast<double>(k + ell)));
  project_to_ball(features, feature_bound);
  const double margin = kernels::dot(p, features.first(k)) + kernels::dot(shared_center, features.subspan(k, ell));
  const double prob_positive = 1.0 / (1.0 + std::exp(-margin));
  out[k + ell] = rng.uniform01() < prob_positive ? 1.0 : -1.0;
}

PartitionedParams SyntheticTask::center_params() const {
  PartitionedParams params(owners(), k, ell);
  for (std::size_t j = 0; j < owners(); ++j) {
    std::copy(personalized_centers[j].begin(), personalized_centers[j].end(), params.x(j).begin());
  }
  std::copy(shared_center.begin(), shared_center.end(), params.u().begin());
  return params;
}

SyntheticTask make_task(const DomainSpec& domain, const TaskOptions& options, std::uint64_t seed) {
  domain.validate();
  if (options.heterogeneity < 0.0 || options.heterogeneity > 1.0) {
    throw ConfigError("task: heterogeneity must lie in [0, 1]");
  }
  if (options.noise_scale < 0.0) throw ConfigError("task: noise_scale must be >= 0");
  if (options.center_fraction < 0.0 || options.center_fraction > 1.0) {
    throw ConfigError("task: center_fraction must lie in [0, 1]");
  }
  SyntheticTask task;
  task.kind = options.kind;
  task.k = domain.k;
  task.ell = domain.ell;
  task.noise_scale = options.noise_scale;
  task.heterogeneity = options.heterogeneity;
  task.feature_bound = options.feature_bound;

  RandomStream rng(derive_seed(seed, "task-centers"));
  const double rx = domain.radius_x();
  std::vector<double> common(domain.k);
  random_unit(rng, common);
  kernels::scale(options.center_fraction * (1.0 - options.heterogeneity) * rx, common);

  task.personalized_centers.assign(domain.n, std::vector<double>(domain.k, 0.0));
  std::vector<double> direction(domain.k);
  for (auto& p : task.personalized_centers) {
    random_unit(rng, direction);
    p = common;
    kernels::axpy(options.heterogeneity * rx, direction, p);
    project_to_ball(p, rx);
  }
  task.shared_center.assign(domain.ell, 0.0);
  random_unit(rng, task.shared_center);
  kernels::scale(options.center_fraction * domain.radius_u(), task.shared_center);
  return task;
}

Federation::Federation(std::size_t n, std::size_t m, std::size_t r, std::size_t dim)
    : n_(n), m_(m), r_(r), dim_(dim), shards_(n, std::vector<double>(m * dim, 0.0)),
      user_of_(n, std::vector<std::size_t>(m, 0)) {
  const std::size_t per_user = r > 0 ? m / r : m;
  for (auto& users : user_of_) {
    for (std::size_t i = 0; i < m; ++i) users[i] = per_user > 0 ? i / per_user : 0;
  }
}

std::vector<std::size_t> Federation::user_records(std::size_t owner, std::size_t user) const {
  std::vector<std::size_t> out;
  out.reserve(m_ / r_);
  for (std::size_t i = 0; i < m_; ++i) {
    if (user_of_[owner][i] == user) out.push_back(i);
  }
  return out;
}

void Federation::validate() const {
  if (n_ < 1 || m_ < 1 || r_ < 1 || m_ % r_ != 0) throw FormatError("federation: inconsistent n/m/r");
  for (std::size_t j = 0; j < n_; ++j) {
    if (shards_[j].size() != m_ * dim_) throw FormatError("federation: owner shard has the wrong size");
    std::vector<std::size_t> counts(r_, 0);
    for (std::size_t u : user_of_[j]) {
      if (u >= r_) throw FormatError("federation: user index out of range");
      ++counts[u];
    }
    for (std::size_t c : counts) {
      if (c != m_ / r_) throw FormatError("federation: users do not hold m/r records each");
    }
  }
}

Federation generate(const SyntheticTask& task, const ProblemSpec& spec) {
  spec.validate();
  if (spec.n != task.owners()) throw ConfigError("generate: task and problem disagree on n");
  if (spec.record_dim != task.record_dim()) throw ConfigError("generate: record_dim does not match task");
  Federation fed(spec.n, spec.m, spec.r, spec.record_dim);
  for (std::size_t j = 0; j < spec.n; ++j) {
    RandomStream rng(derive_seed(spec.seed, "records", j));
    for (std::size_t i = 0; i < spec.m; ++i) task.sample(j, rng, fed.record(j, i));
  }
  return fed;
}

Federation replace_record(Federation fed, std::size_t owner, std::size_t index,
                          std::span<const double> fresh) {
  if (owner >= fed.owners() || index >= fed.records_per_owner()) {
    throw ConfigError("replace_record: index out of range");
  }
  if (fresh.size() != fed.record_dim()) throw ConfigError("replace_record: record dimension mismatch");
  std::copy(fresh.begin(), fresh.end(), fed.record(owner, index).begin());
  return fed;
}

Federation replace_user(Federation fed, std::size_t owner, std::size_t user,
                        std::span<const std::vector<double>> fresh_shard) {
  if (owner >= fed.owners() || user >= fed.users_per_owner()) {
    throw ConfigError("replace_user: index out of range");
  }
  const auto indices = fed.user_records(owner, user);
  if (fresh_shard.size() != indices.size()) {
    throw ConfigError("replace_user: shard must hold m/r = " + std::to_string(indices.size()) + " records");
  }
  for (std::size_t s = 0; s < indices.size(); ++s) {
    if (fresh_shard[s].size() != fed.record_dim()) throw ConfigError("replace_user: record dimension mismatch");
    std::copy(fresh_shard[s].begin(), fresh_shard[s].end(), fed.record(owner, indices[s]).begin());
  }
  return fed;
}

std::size_t record_hamming_distance(const Federation& a, const Federation& b) {
  if (a.owners() != b.owners() || a.records_per_owner() != b.records_per_owner() ||
      a.record_dim() != b.record_dim()) {
    throw ConfigError("hamming distance: federations have different shapes");
  }
  std::size_t count = 0;
  for (std::size_t j = 0; j < a.owners(); ++j) {
    for (std::size_t i = 0; i < a.records_per_owner(); ++i) {
      const auto ra = a.record(j, i);
      const auto rb = b.record(j, i);
      if (!std::equal(ra.begin(), ra.end(), rb.begin()) || a.user_of(j, i) != b.user_of(j, i)) ++count;
    }
  }
  return count;
}

void write_federation(std::ostream& out, const Federation& fed) {
  out << "# jdp-federation v1 n=" << fed.owners() << " m=" << fed.records_per_owner()
      << " r=" << fed.users_per_owner() << " d=" << fed.record_dim() << '\n';
  out << std::setprecision(17);
  for (std::size_t j = 0; j < fed.owners(); ++j) {
    for (std::size_t i = 0; i < fed.records_per_owner(); ++i) {
      out << j << ',' << fed.user_of(j, i);
      for (double v : fed.record(j, i)) out << ',' << v;
      out << '\n';
    }
  }
}

namespace {

std::size_t header_field(const std::string& header, const std::string& key) {
  const auto pos = header.find(" " + key + "=");
  if (pos == std::string::npos) throw FormatError("federation header is missing '" + key + "='");
  try {
    return std::stoul(header.substr(pos + key.size() + 2));
  } catch (const std::exception&) {
    throw FormatError("federation header has a malformed '" + key + "=' field");
  }
}

}  // namespace

Federation read_federation(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("# jdp-federation v1", 0) != 0) {
    throw FormatError("not a jdp federation file (bad header)");
  }
  const std::size_t n = header_field(header, "n");
  const std::size_t m = header_field(header, "m");
  const std::size_t r = header_field(header, "r");
  const std::size_t d = header_field(header, "d");
  if (n < 1 || m < 1 || r < 1 || d < 1 || m % r != 0) throw FormatError("federation header is inconsistent");
  Federation fed(n, m, r, d);
  std::vector<std::size_t> next(n, 0);
  std::string line;
  std::size_t line_no = 1;
  std::size_t total = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != d + 2) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(d + 2) + " fields");
    }
    std::size_t owner = 0, user = 0;
    try {
      owner = std::stoul(cells[0]);
      user = std::stoul(cells[1]);
    } catch (const std::exception&) {
      throw FormatError("line " + std::to_string(line_no) + ": malformed owner/user id");
    }
    if (owner >= n || next[owner] >= m) {
      throw FormatError("line " + std::to_string(line_no) + ": owner id out of range or too many records");
    }
    auto rec = fed.record(owner, next[owner]);
    for (std::size_t c = 0; c < d; ++c) {
      try {
        rec[c] = std::stod(cells[c + 2]);
      } catch (const std::exception&) {
        throw FormatError("line " + std::to_string(line_no) + ": malformed value");
      }
    }
    fed.set_user(owner, next[owner], user);
    ++next[owner];
    ++total;
  }
  if (total != n * m) throw FormatError("federation file holds " + std::to_string(total) + " records, expected n*m");
  fed.validate();
  return fed;
}

void save_federation(const std::string& path, const Federation& fed) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write_federation(out, fed);
}

Federation load_federation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return read_federation(in);
}

}  // namespace jdp
