#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "cutrom/kernels/kernels.hpp"
#include "cutrom/linalg.hpp"

using namespace cutrom;
namespace k = cutrom::kernels;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// Restores the startup ISA when a test switches it.
struct IsaGuard {
  k::Isa saved = k::active_isa();
  ~IsaGuard() { k::set_isa(saved); }
};

}  // namespace

TEST_CASE("scalar kernels against plain loops") {
  IsaGuard guard;
  k::set_isa(k::Isa::Scalar);
  const auto a = randn(37, 1), b = randn(37, 2);
  double ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ref += a[i] * b[i];
  CHECK(k::dot(a, b) == doctest::Approx(ref).epsilon(1e-14));
  CHECK(k::dot(std::span<const double>(), std::span<const double>()) == 0.0);
  std::vector<double> y = b;
  k::axpy(0.5, a, y);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == b[i] + 0.5 * a[i]);
  CHECK_THROWS_AS(k::dot(a, std::span<const double>(b).first(3)), std::invalid_argument);
  CHECK_THROWS_AS(k::axpy(1.0, a, std::span<double>(y).first(3)), std::invalid_argument);
}

TEST_CASE("AVX2 and scalar kernels agree") {
  if (!k::isa_supported(k::Isa::Avx2)) {
    MESSAGE("AVX2 not available, skipping");
    CHECK_THROWS_AS(k::set_isa(k::Isa::Avx2), std::invalid_argument);
    return;
  }
  IsaGuard guard;
  // lengths cover the vector body and every remainder
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 1001u}) {
    const auto a = randn(n, 10 + n), b = randn(n, 20 + n);
    k::set_isa(k::Isa::Scalar);
    const double ds = k::dot(a, b);
    std::vector<double> ys = b;
    k::axpy(-1.25, a, ys);
    k::set_isa(k::Isa::Avx2);
    const double dv = k::dot(a, b);
    std::vector<double> yv = b;
    k::axpy(-1.25, a, yv);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]);
    CHECK(std::abs(ds - dv) <= 1e-14 * std::max(scale, 1.0));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ys[i] - yv[i]) <= 1e-15 * (std::abs(ys[i]) + 1.0));
  }

  // sparse times dense, block widths with and without remainders
  SparseMatrix s(40, 30);
  std::vector<Eigen::Triplet<double>> trip;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> ri(0, 39), ci(0, 29);
  for (int i = 0; i < 200; ++i) trip.emplace_back(ri(rng), ci(rng), 0.01 * i - 1.0);
  s.setFromTriplets(trip.begin(), trip.end());
  s.makeCompressed();
  const k::CscView view{40, 30, s.outerIndexPtr(), s.innerIndexPtr(), s.valuePtr()};
  for (std::size_t width : {1u, 3u, 4u, 6u, 9u}) {
    const auto x = randn(30 * width, width);
    std::vector<double> ys(40 * width, 0.5), yv(40 * width, 0.5);
    k::set_isa(k::Isa::Scalar);
    k::csc_times_dense(view, x, ys, width);
    k::set_isa(k::Isa::Avx2);
    k::csc_times_dense(view, x, yv, width);
    // oracle from Eigen, row-major blocks
    Matrix xm(30, width);
    for (std::size_t r = 0; r < 30; ++r) {
      for (std::size_t c = 0; c < width; ++c) xm(r, c) = x[r * width + c];
    }
    const Matrix ym = s * xm;
    for (std::size_t r = 0; r < 40; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        CHECK(ys[r * width + c] == doctest::Approx(0.5 + ym(r, c)).epsilon(1e-13));
        CHECK(std::abs(ys[r * width + c] - yv[r * width + c]) <= 1e-13);
      }
    }
  }
}

TEST_CASE("gram matches a dense product under both ISAs") {
  IsaGuard guard;
  const std::size_t len = 23, m = 4, n = 3;
  const auto a = randn(m * len, 7), b = randn(n * len, 8);
  const Eigen::Map<const Matrix> am(a.data(), len, m), bm(b.data(), len, n);
  const Matrix ref = am.transpose() * bm;
  for (k::Isa isa : {k::Isa::Scalar, k::Isa::Avx2}) {
    if (!k::isa_supported(isa)) continue;
    k::set_isa(isa);
    std::vector<double> c(m * n);
    k::gram(a, m, b, n, len, c);
    const Eigen::Map<const Matrix> cm(c.data(), m, n);
    CHECK((cm - ref).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK_THROWS_AS(k::gram(a, m + 1, b, n, len, c), std::invalid_argument);
  }
  CHECK(k::isa_name(k::Isa::Scalar) == "scalar");
  CHECK(k::isa_name(k::Isa::Avx2) == "avx2");
}
