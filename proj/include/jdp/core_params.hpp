#pragma once

// Partitioned parameter space X^n x U: one personalized block per owner and a
// shared block. Both domains are origin-centred Euclidean balls.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace jdp {

struct DomainSpec {
  std::size_t n = 1;    // owners
  std::size_t k = 0;    // personalized block dimension
  std::size_t ell = 1;  // shared block dimension
  double d_x = 0.0;     // diameter of X
  double d_u = 1.0;     // diameter of U

  double radius_x() const { return 0.5 * d_x; }
  double radius_u() const { return 0.5 * d_u; }
  std::size_t total_dim() const { return n * k + ell; }

  // Throws ConfigError when an invariant is violated.
  void validate() const;
};

// Diameter of the product domain, sqrt(n d_x^2 + d_u^2).
double radius(const DomainSpec& spec);

// Flat storage [x_1 .. x_n, u].
class PartitionedParams {
 public:
  PartitionedParams() = default;
  PartitionedParams(std::size_t n, std::size_t k, std::size_t ell);
  static PartitionedParams zeros(const DomainSpec& spec);

  std::size_t owners() const { return n_; }
  std::size_t k() const { return k_; }
  std::size_t ell() const { return ell_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> x(std::size_t owner) { return {values_.data() + owner * k_, k_}; }
  std::span<const double> x(std::size_t owner) const { return {values_.data() + owner * k_, k_}; }
  std::span<double> u() { return {values_.data() + n_ * k_, ell_}; }
  std::span<const double> u() const { return {values_.data() + n_ * k_, ell_}; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool matches(const DomainSpec& spec) const {
    return n_ == spec.n && k_ == spec.k && ell_ == spec.ell;
  }

  friend bool operator==(const PartitionedParams&, const PartitionedParams&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::size_t ell_ = 0;
  std::vector<double> values_;
};

// Gradient touching one owner's personalized block (owner set) or all of them
// (owner empty, grad_x of length n*k) plus the shared block.
struct BlockGradient {
  std::optional<std::size_t> owner;
  std::vector<double> grad_x;
  std::vector<double> grad_u;

  static BlockGradient for_owner(std::size_t owner, std::size_t k, std::size_t ell);
  static BlockGradient for_all(std::size_t n, std::size_t k, std::size_t ell);

  // Full-space vector of length n*k + ell with zeros on untouched blocks.
  std::vector<double> embed(const DomainSpec& spec) const;
};

// Radial projection of v onto the origin-centred ball of the given radius.
void project_to_ball(std::span<double> v, double ball_radius);

PartitionedParams project(PartitionedParams params, const DomainSpec& spec);

// Projects only the personalized block of `owner` and the shared block.
void project_touched(PartitionedParams& params, std::size_t owner, const DomainSpec& spec);

// project(params - eta * grad) restricted to the blocks the gradient touches.
PartitionedParams apply_step(PartitionedParams params, const BlockGradient& grad, double eta,
                             const DomainSpec& spec);

// In-place variant used by the optimizer loops.
void apply_step_inplace(PartitionedParams& params, const BlockGradient& grad, double eta,
                        const DomainSpec& spec);

bool in_domain(const PartitionedParams& params, const DomainSpec& spec, double tol = 1e-12);

}  // namespace jdp
