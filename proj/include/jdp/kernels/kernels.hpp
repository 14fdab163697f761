#pragma once

// Dense vector kernels used by the optimizer inner loops.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2/FMA
// variant. The active table is chosen once per process: JDP_KERNELS=scalar|avx2
// in the environment wins, otherwise the widest variant the CPU supports.
// Variants agree to rounding (the reductions sum in a different order), so a
// single run must not switch tables midway; select() is meant for start-up and
// for tests.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace jdp::kernels {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  Backend backend;
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_norm)(const double* a, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // out = a - b
  void (*subtract)(const double* a, const double* b, double* out, std::size_t n);
};

const KernelTable& scalar_table();
// Null when the AVX2 variant was not compiled in.
const KernelTable* avx2_table();

bool cpu_has_avx2();

// Tables usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

const KernelTable& active();
void select(Backend backend);
// Accepts "scalar", "avx2" or "auto". Throws std::invalid_argument otherwise,
// or when the requested variant is unavailable.
void select(std::string_view name);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double squared_norm(std::span<const double> a) {
  return active().squared_norm(a.data(), a.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(double alpha, std::span<double> x) {
  active().scale(alpha, x.data(), x.size());
}
inline void subtract(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  active().subtract(a.data(), b.data(), out.data(), a.size());
}

double norm(std::span<const double> a);
double distance(std::span<const double> a, std::span<const double> b);

}  // namespace jdp::kernels
