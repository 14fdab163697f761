#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "jdp/kernels/kernels.hpp"

namespace jdp::kernels {

#ifndef JDP_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> tables{&scalar_table()};
  if (avx2_table() != nullptr && cpu_has_avx2()) tables.push_back(avx2_table());
  return tables;
}

namespace {

const KernelTable* best_table() {
  const auto tables = available_tables();
  return tables.back();
}

const KernelTable* resolve(std::string_view name) {
  if (name == "auto") return best_table();
  if (name == "scalar") return &scalar_table();
  if (name == "avx2") {
    if (avx2_table() == nullptr || !cpu_has_avx2()) {
      throw std::invalid_argument("avx2 kernels are not available on this build/CPU");
    }
    return avx2_table();
  }
  throw std::invalid_argument("unknown kernel backend '" + std::string(name) + "'");
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("JDP_KERNELS"); env != nullptr && *env != '\0') {
    return resolve(env);
  }
  return best_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Backend backend) {
  select(backend == Backend::kScalar ? std::string_view("scalar") : std::string_view("avx2"));
}

void select(std::string_view name) { current().store(resolve(name), std::memory_order_relaxed); }

double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

}  // namespace jdp::kernels
