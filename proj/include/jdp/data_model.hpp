#pragma once

// Owners, users and records: synthetic federations with known population
// minimizers, neighbour construction, and the line-oriented federation file.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "jdp/core_params.hpp"
#include "jdp/rng.hpp"

namespace jdp {

struct ProblemSpec {
  std::size_t n = 1;           // owners
  std::size_t m = 1;           // records per owner
  std::size_t r = 1;           // users per owner
  std::size_t record_dim = 1;  // d
  std::uint64_t seed = 0;

  std::size_t records_per_user() const { return m / r; }
  void validate() const;
};

enum class TaskKind { kSharedMean, kLogistic };

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

// Data-generating distributions P_j. For shared_mean, a record is
// (z^x, z^u) = (p_j + e_x, q + e_u) with isotropic Gaussian noise radially
// truncated per block. For logistic, a record is (a, b, y) with y drawn from a
// logistic teacher at (p_j, q) and ||(a, b)|| <= feature_bound.
struct SyntheticTask {
  TaskKind kind = TaskKind::kSharedMean;
  std::size_t k = 0;
  std::size_t ell = 1;
  std::vector<std::vector<double>> personalized_centers;  // p_j, length k each
  std::vector<double> shared_center;                      // q, length ell
  double noise_scale = 0.0;
  double heterogeneity = 0.0;
  double feature_bound = 1.0;  // logistic only

  std::size_t owners() const { return personalized_centers.size(); }
  std::size_t record_dim() const { return kind == TaskKind::kSharedMean ? k + ell : k + ell + 1; }

  // Radial truncation bound for a noise block of the given dimension.
  double truncation_radius(std::size_t dim) const;
  // Upper bound on the norm of any generated record.
  double record_norm_bound() const;

  // Draws one record of owner j into `out` (length record_dim()).
  void sample(std::size_t owner, RandomStream& rng, std::span<double> out) const;

  // Analytic population minimizer (p_j, q) of the shared-mean norm and Huber
  // losses; meaningless for logistic tasks.
  PartitionedParams center_params() const;
};

struct TaskOptions {
  TaskKind kind = TaskKind::kSharedMean;
  double heterogeneity = 0.0;
  double noise_scale = 0.0;
  // Norm of the shared center q and of the common personalized draw, as a
  // fraction of the available room in the ball.
  double center_fraction = 0.8;
  double feature_bound = 1.0;
};

// Draws the centers p_j, q for a domain. Deterministic in `seed`.
SyntheticTask make_task(const DomainSpec& domain, const TaskOptions& options, std::uint64_t seed);

class Federation {
 public:
  Federation() = default;
  Federation(std::size_t n, std::size_t m, std::size_t r, std::size_t dim);

  std::size_t owners() const { return n_; }
  std::size_t records_per_owner() const { return m_; }
  std::size_t users_per_owner() const { return r_; }
  std::size_t record_dim() const { return dim_; }

  std::span<const double> record(std::size_t owner, std::size_t index) const {
    return {shards_[owner].data() + index * dim_, dim_};
  }
  std::span<double> record(std::size_t owner, std::size_t index) {
    return {shards_[owner].data() + index * dim_, dim_};
  }
  std::size_t user_of(std::size_t owner, std::size_t index) const { return user_of_[owner][index]; }
  void set_user(std::size_t owner, std::size_t index, std::size_t user) { user_of_[owner][index] = user; }

  // Record indices owned by `user` of `owner`, in storage order.
  std::vector<std::size_t> user_records(std::size_t owner, std::size_t user) const;

  // Throws FormatError when a shard has the wrong size or users are unbalanced.
  void validate() const;

  friend bool operator==(const Federation&, const Federation&) = default;

 private:
  std::size_t n_ = 0, m_ = 0, r_ = 0, dim_ = 0;
  std::vector<std::vector<double>> shards_;
  std::vector<std::vector<std::size_t>> user_of_;
};

// i.i.d. records per owner; user w of every owner holds the contiguous index
// range [w m/r, (w+1) m/r).
Federation generate(const SyntheticTask& task, const ProblemSpec& spec);

Federation replace_record(Federation fed, std::size_t owner, std::size_t index,
                          std::span<const double> fresh);
Federation replace_user(Federation fed, std::size_t owner, std::size_t user,
                        std::span<const std::vector<double>> fresh_shard);

// Number of (owner, index) positions whose records differ.
std::size_t record_hamming_distance(const Federation& a, const Federation& b);

// Line format: a header "# jdp-federation v1 n=.. m=.. r=.. d=..", then one
// record per line "owner_id,user_id,v_1,...,v_d" in owner-major order.
void write_federation(std::ostream& out, const Federation& fed);
Federation read_federation(std::istream& in);
void save_federation(const std::string& path, const Federation& fed);
Federation load_federation(const std::string& path);

}  // namespace jdp
