#include "jdp/core_params.hpp"

#include <cmath>
#include <string>

#include "jdp/errors.hpp"
#include "jdp/kernels/kernels.hpp"

namespace jdp {

void DomainSpec::validate() const {
  if (n < 1) throw ConfigError("domain: n must be >= 1");
  if (ell < 1) throw ConfigError("domain: ell must be >= 1");
  if (!(d_x >= 0.0) || !std::isfinite(d_x)) throw ConfigError("domain: d_x must be finite and >= 0");
  if (!(d_u > 0.0) || !std::isfinite(d_u)) throw ConfigError("domain: d_u must be finite and > 0");
  const double r = radius(*this);
  if (!std::isfinite(r) || r <= 0.0) throw ConfigError("domain: radius is not finite and positive");
}

double radius(const DomainSpec& spec) {
  return std::sqrt(static_cast<double>(spec.n) * spec.d_x * spec.d_x + spec.d_u * spec.d_u);
}

PartitionedParams::PartitionedParams(std::size_t n, std::size_t k, std::size_t ell)
    : n_(n), k_(k), ell_(ell), values_(n * k + ell, 0.0) {}

PartitionedParams PartitionedParams::zeros(const DomainSpec& spec) {
  return PartitionedParams(spec.n, spec.k, spec.ell);
}

BlockGradient BlockGradient::for_owner(std::size_t owner, std::size_t k, std::size_t ell) {
  return BlockGradient{owner, std::vector<double>(k, 0.0), std::vector<double>(ell, 0.0)};
}

BlockGradient BlockGradient::for_all(std::size_t n, std::size_t k, std::size_t ell) {
  return BlockGradient{std::nullopt, std::vector<double>(n * k, 0.0), std::vector<double>(ell, 0.0)};
}

std::vector<double> BlockGradient::embed(const DomainSpec& spec) const {
  std::vector<double> full(spec.total_dim(), 0.0);
  if (owner) {
    std::copy(grad_x.begin(), grad_x.end(), full.begin() + static_cast<std::ptrdiff_t>(*owner * spec.k));
  } else {
    std::copy(grad_x.begin(), grad_x.end(), full.begin());
  }
  std::copy(grad_u.begin(), grad_u.end(), full.begin() + static_cast<std::ptrdiff_t>(spec.n * spec.k));
  return full;
}

void project_to_ball(std::span<double> v, double ball_radius) {
  if (v.empty()) return;
  const double norm = kernels::norm(v);
  if (!(norm > ball_radius)) return;
  kernels::scale(ball_radius / norm, v);
  // Rounding can leave the norm a few ulps above the radius.
  while (kernels::norm(v) > ball_radius) kernels::scale(1.0 - 0x1p-52, v);
}

namespace {

void check_dims(const PartitionedParams& params, const DomainSpec& spec) {
  if (!params.matches(spec)) {
    throw ConfigError("parameter dimensions (n=" + std::to_string(params.owners()) +
                      ", k=" + std::to_string(params.k()) + ", ell=" + std::to_string(params.ell()) +
                      ") do not match the domain");
  }
}

void check_grad(const PartitionedParams& params, const BlockGradient& grad) {
  const std::size_t want_x = grad.owner ? params.k() : params.owners() * params.k();
  if (grad.grad_x.size() != want_x || grad.grad_u.size() != params.ell()) {
    throw ConfigError("gradient dimensions do not match the parameters");
  }
  if (grad.owner && *grad.owner >= params.owners()) throw ConfigError("gradient owner index out of range");
}

}  // namespace

PartitionedParams project(PartitionedParams params, const DomainSpec& spec) {
  check_dims(params, spec);
  for (std::size_t j = 0; j < spec.n; ++j) project_to_ball(params.x(j), spec.radius_x());
  project_to_ball(params.u(), spec.radius_u());
  return params;
}

void project_touched(PartitionedParams& params, std::size_t owner, const DomainSpec& spec) {
  project_to_ball(params.x(owner), spec.radius_x());
  project_to_ball(params.u(), spec.radius_u());
}

void apply_step_inplace(PartitionedParams& params, const BlockGradient& grad, double eta,
                        const DomainSpec& spec) {
  check_dims(params, spec);
  check_grad(params, grad);
  if (grad.owner) {
    kernels::axpy(-eta, grad.grad_x, params.x(*grad.owner));
    kernels::axpy(-eta, grad.grad_u, params.u());
    project_touched(params, *grad.owner, spec);
  } else {
    std::span<double> all_x = params.values().first(spec.n * spec.k);
    kernels::axpy(-eta, grad.grad_x, all_x);
    kernels::axpy(-eta, grad.grad_u, params.u());
    for (std::size_t j = 0; j < spec.n; ++j) project_to_ball(params.x(j), spec.radius_x());
    project_to_ball(params.u(), spec.radius_u());
  }
}

PartitionedParams apply_step(PartitionedParams params, const BlockGradient& grad, double eta,
                             const DomainSpec& spec) {
  if (!(eta > 0.0)) throw ConfigError("step size must be positive");
  apply_step_inplace(params, grad, eta, spec);
  return params;
}

bool in_domain(const PartitionedParams& params, const DomainSpec& spec, double tol) {
  if (!params.matches(spec)) return false;
  for (std::size_t j = 0; j < spec.n; ++j) {
    if (kernels::norm(params.x(j)) > spec.radius_x() + tol) return false;
  }
  return kernels::norm(params.u()) <= spec.radius_u() + tol;
}

}  // namespace jdp
