#pragma once

// Dense and sparse inner-loop kernels used by the reduced-order pipeline
// (POD correlation matrices, Gram-Schmidt, Galerkin projection).
//
// Every kernel has a scalar reference implementation and an AVX2/FMA variant.
// The variant is picked once at startup from the CPU feature flags; setting
// CUTROM_SIMD=scalar in the environment forces the reference path. Both paths
// are deterministic for a fixed ISA, so results never depend on thread count.

#include <cstddef>
#include <span>
#include <string_view>

namespace cutrom::kernels {

enum class Isa { Scalar, Avx2 };

/// Compressed-sparse-column view (Eigen's default compressed layout).
struct CscView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  const int* outer = nullptr;   // cols + 1 entries
  const int* inner = nullptr;   // row index per nonzero
  const double* values = nullptr;
};

bool isa_supported(Isa isa);
Isa active_isa();
/// Switches the dispatch table. Throws std::invalid_argument if unsupported.
void set_isa(Isa isa);
std::string_view isa_name(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// y (rows x k, row-major) += A * x (cols x k, row-major).
void csc_times_dense(const CscView& a, std::span<const double> x, std::span<double> y,
                     std::size_t k);

/// c (m x n, column-major) = a^T b, where a is len x m and b is len x n,
/// both column-major with leading dimension len.
void gram(std::span<const double> a, std::size_t m, std::span<const double> b, std::size_t n,
          std::size_t len, std::span<double> c);

namespace detail {

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*csc_times_dense)(const CscView& a, const double* x, double* y, std::size_t k);
};

const KernelTable& scalar_table();
const KernelTable& avx2_table();

}  // namespace detail

}  // namespace cutrom::kernels
