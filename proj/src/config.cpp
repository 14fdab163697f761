#include "jdp/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

#include "jdp/errors.hpp"
#include "jdp/rng.hpp"

namespace jdp {

using nlohmann::ordered_json;
// Parsing keeps key order so sweep axes enumerate in file order.
using json = nlohmann::ordered_json;

const char* to_string(TPolicy policy) {
  switch (policy) {
    case TPolicy::kMnSquared: return "mn_squared";
    case TPolicy::kMn: return "mn";
    case TPolicy::kFixed: return "fixed";
  }
  return "?";
}

namespace {

TPolicy t_policy_from_string(const std::string& name) {
  if (name == "mn_squared") return TPolicy::kMnSquared;
  if (name == "mn") return TPolicy::kMn;
  if (name == "fixed") return TPolicy::kFixed;
  throw ConfigError("unknown T_policy '" + name + "'");
}

const char* to_string_init(InitPolicy policy) {
  return policy == InitPolicy::kOrigin ? "origin" : "random_in_domain";
}

std::size_t as_count(double v, const std::string& what) {
  if (!(v >= 0.0) || std::floor(v) != v || v > 1e15) throw ConfigError(what + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

// Reads a section, rejecting keys it does not know.
class Section {
 public:
  Section(const json& root, const char* name) : name_(name) {
    if (root.contains(name)) {
      node_ = root.at(name);
      if (!node_.is_object()) throw ConfigError(std::string("config section '") + name + "' must be a mapping");
    } else {
      node_ = json::object();
    }
  }

  template <class T>
  void read(const char* key, T& out) {
    used_.insert(key);
    if (!node_.contains(key) || node_.at(key).is_null()) return;
    try {
      out = node_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config ") + name_ + "." + key + " has the wrong type");
    }
  }

  template <class T>
  void read_optional(const char* key, std::optional<T>& out) {
    used_.insert(key);
    if (!node_.contains(key) || node_.at(key).is_null()) return;
    T value{};
    read(key, value);
    out = value;
  }

  template <class Int>
  void read_count(const char* key, Int& out) {
    double v = static_cast<double>(out);
    read(key, v);
    out = as_count(v, std::string(name_) + "." + key);
  }

  void read_optional_count(const char* key, std::optional<std::uint64_t>& out) {
    used_.insert(key);
    if (!node_.contains(key) || node_.at(key).is_null()) return;
    std::uint64_t v = 0;
    read_count(key, v);
    out = v;
  }

  const json& node() const { return node_; }

  void finish() const {
    for (const auto& item : node_.items()) {
      if (!used_.count(item.key())) {
        throw ConfigError(std::string("unknown config key ") + name_ + "." + item.key());
      }
    }
  }

 private:
  const char* name_;
  json node_;
  std::set<std::string> used_;
};

json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (const auto& item : node) arr.push_back(yaml_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& item : node) obj[item.first.as<std::string>()] = yaml_to_json(item.second);
      return obj;
    }
    case YAML::NodeType::Scalar: {
      const std::string s = node.Scalar();
      if (node.Tag() == "!") return s;  // quoted
      if (s == "true" || s == "True") return true;
      if (s == "false" || s == "False") return false;
      if (s == "null" || s == "~") return nullptr;
      static const std::regex integer(R"([-+]?[0-9]+)");
      static const std::regex real(R"([-+]?([0-9]+\.?[0-9]*|\.[0-9]+)([eE][-+]?[0-9]+)?)");
      if (std::regex_match(s, integer)) return std::stoll(s);
      if (std::regex_match(s, real)) return std::stod(s);
      return s;
    }
  }
  return nullptr;
}

}  // namespace

LossModel LossSettings::model() const {
  switch (kind) {
    case LossKind::kSharedMeanNorm: return LossModel::shared_mean_norm();
    case LossKind::kSharedMeanHuber: return LossModel::shared_mean_huber(mu);
    case LossKind::kLogistic: return LossModel::logistic(feature_bound);
  }
  throw ConfigError("unknown loss kind");
}

void ExperimentConfig::normalize_and_validate() {
  if (problem.n != domain.n) throw ConfigError("problem.n and domain.n disagree");
  if (loss.kind == LossKind::kLogistic && task.kind != TaskKind::kLogistic) {
    throw ConfigError("loss logistic needs task kind logistic");
  }
  if (loss.kind != LossKind::kLogistic && task.kind != TaskKind::kSharedMean) {
    throw ConfigError("shared-mean losses need task kind shared_mean");
  }
  if (task.kind == TaskKind::kLogistic) task.feature_bound = loss.feature_bound;
  problem.record_dim = task.kind == TaskKind::kSharedMean ? domain.k + domain.ell : domain.k + domain.ell + 1;
  domain.validate();
  problem.validate();
  (void)loss.model();
  const Paradigm p = optimizer.paradigm;
  const bool private_paradigm = p == Paradigm::kJointDp || p == Paradigm::kFullDp || p == Paradigm::kSmoothJointDp;
  if (private_paradigm && optimizer.privacy.level == PrivacyLevel::kNone) {
    throw ConfigError("optimizer.level must not be none for paradigm " + std::string(to_string(p)));
  }
  if (optimizer.privacy.level != PrivacyLevel::kNone) optimizer.privacy.validate();
  if (optimizer.t_policy == TPolicy::kFixed && !optimizer.T) throw ConfigError("T_policy fixed needs optimizer.T");
  if (optimizer.T && *optimizer.T < 1) throw ConfigError("optimizer.T must be >= 1");
  if (optimizer.T_cap < 1) throw ConfigError("optimizer.T_cap must be >= 1");
  if (optimizer.eta && !(*optimizer.eta >= 0.0)) throw ConfigError("optimizer.eta must be >= 0");
  if (!(optimizer.gamma > 0.0 && optimizer.gamma < 1.0)) throw ConfigError("optimizer.gamma must lie in (0, 1)");
  if (experiment.repetitions < 1) throw ConfigError("experiment.repetitions must be >= 1");
  if (experiment.eval_samples < 1) throw ConfigError("experiment.eval_samples must be >= 1");
  if (experiment.jobs < 1) throw ConfigError("experiment.jobs must be >= 1");
  static const std::set<std::string> axes{"n", "m", "r", "ell", "epsilon", "eta", "T"};
  for (const auto& axis : sweep) {
    if (!axes.count(axis.name)) throw ConfigError("unknown sweep axis '" + axis.name + "'");
    if (axis.values.empty()) throw ConfigError("sweep axis '" + axis.name + "' is empty");
  }
}

std::uint64_t ExperimentConfig::resolve_T(Paradigm paradigm, bool* capped) const {
  if (capped != nullptr) *capped = false;
  if (optimizer.T) return *optimizer.T;
  if (paradigm == Paradigm::kSmoothJointDp) return default_T(paradigm, problem, optimizer.privacy);
  const std::uint64_t mn = static_cast<std::uint64_t>(problem.m) * problem.n;
  if (optimizer.t_policy == TPolicy::kMn) return mn;
  const std::uint64_t full = default_T(paradigm, problem, optimizer.privacy);
  if (full > optimizer.T_cap) {
    if (capped != nullptr) *capped = true;
    return optimizer.T_cap;
  }
  return full;
}

namespace {

void set_axis(ExperimentConfig& out, const std::string& axis, double value) {
  if (axis == "n") {
    out.problem.n = out.domain.n = as_count(value, "sweep n");
  } else if (axis == "m") {
    out.problem.m = as_count(value, "sweep m");
  } else if (axis == "r") {
    out.problem.r = as_count(value, "sweep r");
  } else if (axis == "ell") {
    out.domain.ell = as_count(value, "sweep ell");
  } else if (axis == "epsilon") {
    out.optimizer.privacy.epsilon = value;
  } else if (axis == "eta") {
    out.optimizer.eta = value;
  } else if (axis == "T") {
    out.optimizer.T = as_count(value, "sweep T");
    out.optimizer.t_policy = TPolicy::kFixed;
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "'");
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::with_axis(const std::string& axis, double value) const {
  return with_axes({{axis, value}});
}

ExperimentConfig ExperimentConfig::with_axes(const std::vector<std::pair<std::string, double>>& coordinates) const {
  ExperimentConfig out = *this;
  for (const auto& [axis, value] : coordinates) set_axis(out, axis, value);
  out.normalize_and_validate();
  return out;
}

ordered_json to_json(const ExperimentConfig& c, bool include_sweep, bool include_output) {
  ordered_json j;
  j["task"] = {{"kind", to_string(c.task.kind)},
               {"heterogeneity", c.task.heterogeneity},
               {"noise_scale", c.task.noise_scale},
               {"center_fraction", c.task.center_fraction},
               {"feature_bound", c.task.feature_bound}};
  j["problem"] = {{"n", c.problem.n}, {"m", c.problem.m}, {"r", c.problem.r}, {"seed", c.problem.seed}};
  j["domain"] = {{"k", c.domain.k}, {"ell", c.domain.ell}, {"d_x", c.domain.d_x}, {"d_u", c.domain.d_u}};
  j["loss"] = {{"kind", to_string(c.loss.kind)}, {"mu", c.loss.mu}, {"feature_bound", c.loss.feature_bound}};
  const auto& o = c.optimizer;
  ordered_json opt;
  opt["paradigm"] = to_string(o.paradigm);
  opt["T_policy"] = to_string(o.t_policy);
  opt["T"] = o.T ? ordered_json(*o.T) : ordered_json(nullptr);
  opt["T_cap"] = o.T_cap;
  opt["eta"] = o.eta ? ordered_json(*o.eta) : ordered_json(nullptr);
  opt["epsilon"] = o.privacy.epsilon;
  opt["delta"] = o.privacy.delta;
  opt["level"] = to_string(o.privacy.level);
  opt["init"] = to_string_init(o.init);
  opt["sigma_override"] = o.sigma_override ? ordered_json(*o.sigma_override) : ordered_json(nullptr);
  opt["silo_T"] = o.silo_T ? ordered_json(*o.silo_T) : ordered_json(nullptr);
  opt["gamma"] = o.gamma;
  opt["privatize_personalized"] = o.privatize_personalized;
  opt["private_mean_noiseless"] = o.private_mean_noiseless;
  j["optimizer"] = opt;
  if (include_sweep) {
    ordered_json sweep = ordered_json::object();
    for (const auto& axis : c.sweep) sweep[axis.name] = axis.values;
    j["sweep"] = sweep;
  }
  j["experiment"] = {{"repetitions", c.experiment.repetitions},
                     {"eval_samples", c.experiment.eval_samples},
                     {"seed", c.experiment.seed},
                     {"decompose", c.experiment.decompose},
                     {"oracle_steps_cap", c.experiment.oracle_steps_cap}};
  if (include_output) {
    j["experiment"]["jobs"] = c.experiment.jobs;
    j["output"] = {{"dir", c.output.dir}, {"csv", c.output.csv}, {"log", c.output.log}, {"timing", c.output.timing}};
  }
  return j;
}

ExperimentConfig config_from_json(const json& root) {
  if (!root.is_object()) throw ConfigError("config must be a mapping of sections");
  static const std::set<std::string> sections{"task", "problem", "domain", "loss", "optimizer", "sweep", "experiment", "output"};
  for (const auto& item : root.items()) {
    if (!sections.count(item.key())) throw ConfigError("unknown config section '" + item.key() + "'");
  }
  ExperimentConfig c;
  {
    Section s(root, "task");
    std::string kind = to_string(c.task.kind);
    s.read("kind", kind);
    c.task.kind = task_kind_from_string(kind);
    s.read("heterogeneity", c.task.heterogeneity);
    s.read("noise_scale", c.task.noise_scale);
    s.read("center_fraction", c.task.center_fraction);
    s.read("feature_bound", c.task.feature_bound);
    s.finish();
  }
  {
    Section s(root, "problem");
    s.read_count("n", c.problem.n);
    s.read_count("m", c.problem.m);
    s.read_count("r", c.problem.r);
    s.read_count("seed", c.problem.seed);
    s.finish();
  }
  {
    Section s(root, "domain");
    c.domain.n = c.problem.n;
    s.read_count("k", c.domain.k);
    s.read_count("ell", c.domain.ell);
    s.read("d_x", c.domain.d_x);
    s.read("d_u", c.domain.d_u);
    s.finish();
  }
  {
    Section s(root, "loss");
    std::string kind = to_string(c.loss.kind);
    s.read("kind", kind);
    c.loss.kind = loss_kind_from_string(kind);
    s.read("mu", c.loss.mu);
    s.read("feature_bound", c.loss.feature_bound);
    s.finish();
  }
  {
    Section s(root, "optimizer");
    auto& o = c.optimizer;
    std::string paradigm = to_string(o.paradigm), policy = to_string(o.t_policy), level = to_string(o.privacy.level),
                init = to_string_init(o.init);
    s.read("paradigm", paradigm);
    s.read("T_policy", policy);
    s.read("level", level);
    s.read("init", init);
    o.paradigm = paradigm_from_string(paradigm);
    o.t_policy = t_policy_from_string(policy);
    o.privacy.level = privacy_level_from_string(level);
    o.init = init_policy_from_string(init);
    s.read_optional_count("T", o.T);
    s.read_count("T_cap", o.T_cap);
    s.read_optional("eta", o.eta);
    s.read("epsilon", o.privacy.epsilon);
    s.read("delta", o.privacy.delta);
    s.read_optional("sigma_override", o.sigma_override);
    s.read_optional_count("silo_T", o.silo_T);
    s.read("gamma", o.gamma);
    s.read("privatize_personalized", o.privatize_personalized);
    s.read("private_mean_noiseless", o.private_mean_noiseless);
    s.finish();
  }
  if (root.contains("sweep") && !root.at("sweep").is_null()) {
    const json& sweep = root.at("sweep");
    if (!sweep.is_object()) throw ConfigError("config section 'sweep' must map axis names to value lists");
    for (const auto& item : sweep.items()) {
      SweepAxis axis;
      axis.name = item.key();
      if (!item.value().is_array()) throw ConfigError("sweep." + axis.name + " must be a list");
      for (const auto& v : item.value()) {
        if (!v.is_number()) throw ConfigError("sweep." + axis.name + " must hold numbers");
        axis.values.push_back(v.get<double>());
      }
      c.sweep.push_back(axis);
    }
  }
  {
    Section s(root, "experiment");
    s.read_count("repetitions", c.experiment.repetitions);
    s.read_count("eval_samples", c.experiment.eval_samples);
    s.read_count("seed", c.experiment.seed);
    s.read("decompose", c.experiment.decompose);
    s.read_count("oracle_steps_cap", c.experiment.oracle_steps_cap);
    s.read_count("jobs", c.experiment.jobs);
    s.finish();
  }
  {
    Section s(root, "output");
    s.read("dir", c.output.dir);
    s.read("csv", c.output.csv);
    s.read("log", c.output.log);
    s.read("timing", c.output.timing);
    s.finish();
  }
  c.normalize_and_validate();
  return c;
}

ExperimentConfig config_from_json(const nlohmann::json& root) {
  return config_from_json(ordered_json::parse(root.dump()));
}

ExperimentConfig parse_config_text(const std::string& yaml_text) {
  YAML::Node node;
  try {
    node = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (node.IsNull()) return config_from_json(json::object());
  return config_from_json(yaml_to_json(node));
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string canonical = to_json(config, false, false).dump();
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical);
  return out.str();
}

std::string config_schema_text() {
  return R"(Config file (YAML). Every key is optional; defaults in brackets.

task:
  kind: shared_mean | logistic                  [shared_mean]
  heterogeneity: spread of personalized centers, 0..1        [0]
  noise_scale: per-coordinate data noise std                  [0]
  center_fraction: norm of the centers as a fraction of the ball radius [0.8]
  feature_bound: logistic feature norm bound                  [1]
problem:
  n: owners [1]   m: records per owner [1]   r: users per owner (divides m) [1]
  seed: task/data base seed [0]
domain:
  k: personalized dim [0]   ell: shared dim [1]   d_x: diameter of X [0]   d_u: diameter of U [1]
loss:
  kind: shared_mean_norm | shared_mean_huber | logistic  [shared_mean_norm]
  mu: Huber threshold [0.1]   feature_bound: logistic L [1]
optimizer:
  paradigm: per_silo | collab_no_dp | joint_dp | full_dp | smooth_joint_dp  [joint_dp]
  T_policy: mn_squared | mn | fixed   [mn_squared]
  T: iterations (forces the value)    T_cap: cap on the (mn)^2 default [1000000]
  eta: step size (default balances optimization and noise terms)
  epsilon [1]  delta [1e-5]  level: record | user | none | full_dp_record | full_dp_user [record]
  init: origin | random_in_domain [origin]
  sigma_override: force the gradient-noise sigma
  silo_T: per-owner steps for per_silo [T / n^2]
  gamma [1e-3]  privatize_personalized [true]  private_mean_noiseless [false]   (smooth variant)
sweep:
  <axis>: [values...]   axes: n, m, r, ell, epsilon, eta, T
experiment:
  repetitions [20]  eval_samples [2000]  seed [1]  decompose [false]
  oracle_steps_cap [2000000]  jobs [1]
output:
  dir [. or $JDP_OUTPUT_DIR]  csv [results.csv]  log [runs.jsonl]  timing [false]
)";
}

}  // namespace jdp
