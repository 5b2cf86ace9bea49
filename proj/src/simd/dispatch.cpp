#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "randinf/simd/kernels.hpp"

namespace randinf::simd {

#if defined(RANDINF_HAVE_AVX2)
const KernelTable* avx2_table_impl();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(RANDINF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const char* env = std::getenv("RANDINF_SIMD");
  if (env != nullptr && std::string(env) == "scalar") return &scalar_kernels();
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("simd: span size mismatch");
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(RANDINF_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Backend backend) {
  if (backend == Backend::scalar) {
    current().store(&scalar_kernels());
    return;
  }
  const KernelTable* t = avx2_kernels();
  if (t == nullptr) throw std::invalid_argument("simd: AVX2 backend not available on this machine");
  current().store(t);
}

Backend best_available() { return avx2_kernels() != nullptr ? Backend::avx2 : Backend::scalar; }

std::string_view name(Backend backend) { return backend == Backend::avx2 ? "avx2" : "scalar"; }

double dot(std::span<const double> x, std::span<const double> y) {
  require_same_size(x.size(), y.size());
  return active().dot(x.data(), y.data(), x.size());
}

double cross_dev(std::span<const double> x, double mx, std::span<const double> y, double my) {
  require_same_size(x.size(), y.size());
  return active().cross_dev(x.data(), mx, y.data(), my, x.size());
}

double sum_pow(std::span<const double> x, int r) {
  if (r < 1 || r > 16) throw std::invalid_argument("simd::sum_pow: exponent must lie in [1, 16]");
  return active().sum_pow(x.data(), x.size(), r);
}

void center(std::span<const double> x, std::span<const double> row_shift, double shift, std::span<double> out) {
  require_same_size(x.size(), row_shift.size());
  require_same_size(x.size(), out.size());
  active().center(x.data(), row_shift.data(), shift, out.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  require_same_size(x.size(), y.size());
  active().axpy(a, x.data(), y.data(), x.size());
}

void add_squares(std::span<const double> x, std::span<double> acc) {
  require_same_size(x.size(), acc.size());
  active().add_squares(x.data(), acc.data(), x.size());
}

}  // namespace randinf::simd
