// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.

#include "cutrom/kernels/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace cutrom::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline void axpy_inline(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  axpy_inline(alpha, x, y, n);
}

void csc_times_dense_avx2(const CscView& a, const double* x, double* y, std::size_t k) {
  if (k < 4) {
    // too narrow to vectorize across columns
    scalar_table().csc_times_dense(a, x, y, k);
    return;
  }
  for (std::size_t j = 0; j < a.cols; ++j) {
    const double* xj = x + j * k;
    for (int p = a.outer[j]; p < a.outer[j + 1]; ++p) {
      axpy_inline(a.values[p], xj, y + static_cast<std::size_t>(a.inner[p]) * k, k);
    }
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{dot_avx2, axpy_avx2, csc_times_dense_avx2};
  return table;
}

}  // namespace cutrom::kernels::detail

#else

namespace cutrom::kernels::detail {
const KernelTable& avx2_table() { return scalar_table(); }
}  // namespace cutrom::kernels::detail

#endif
