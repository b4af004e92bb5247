#include "cutrom/kernels/kernels.hpp"

namespace cutrom::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void csc_times_dense_scalar(const CscView& a, const double* x, double* y, std::size_t k) {
  for (std::size_t j = 0; j < a.cols; ++j) {
    const double* xj = x + j * k;
    for (int p = a.outer[j]; p < a.outer[j + 1]; ++p) {
      double* yi = y + static_cast<std::size_t>(a.inner[p]) * k;
      const double v = a.values[p];
      for (std::size_t c = 0; c < k; ++c) yi[c] += v * xj[c];
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{dot_scalar, axpy_scalar, csc_times_dense_scalar};
  return table;
}

}  // namespace cutrom::kernels::detail
