#include "cutrom/kernels/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace cutrom::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(CUTROM_HAVE_AVX2_TU) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  if (const char* env = std::getenv("CUTROM_SIMD")) {
    if (std::string(env) == "scalar") return Isa::Scalar;
  }
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

const detail::KernelTable& table() {
  return current().load(std::memory_order_relaxed) == Isa::Avx2 ? detail::avx2_table()
                                                                 : detail::scalar_table();
}

}  // namespace

bool isa_supported(Isa isa) { return isa == Isa::Scalar || cpu_has_avx2(); }

Isa active_isa() { return current().load(); }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("kernel ISA not supported on this CPU: " +
                                std::string(isa_name(isa)));
  }
  current().store(isa);
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return table().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  table().axpy(alpha, x.data(), y.data(), x.size());
}

void csc_times_dense(const CscView& a, std::span<const double> x, std::span<double> y,
                     std::size_t k) {
  if (x.size() != a.cols * k || y.size() != a.rows * k) {
    throw std::invalid_argument("csc_times_dense: shape mismatch");
  }
  table().csc_times_dense(a, x.data(), y.data(), k);
}

void gram(std::span<const double> a, std::size_t m, std::span<const double> b, std::size_t n,
          std::size_t len, std::span<double> c) {
  if (a.size() != m * len || b.size() != n * len || c.size() != m * n) {
    throw std::invalid_argument("gram: shape mismatch");
  }
  // Row chunks and column tiles keep the working set in cache; the
  // summation order depends only on the shapes.
  constexpr std::size_t kRows = 512;
  constexpr std::size_t kTile = 32;
  const auto& t = table();
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t r0 = 0; r0 < len; r0 += kRows) {
    const std::size_t rn = std::min(kRows, len - r0);
    for (std::size_t i0 = 0; i0 < m; i0 += kTile) {
      const std::size_t i1 = std::min(m, i0 + kTile);
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b.data() + j * len + r0;
        for (std::size_t i = i0; i < i1; ++i) c[i + j * m] += t.dot(a.data() + i * len + r0, bj, rn);
      }
    }
  }
}

}  // namespace cutrom::kernels
