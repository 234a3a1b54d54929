#include "xfer/simd/kernels.hpp"

namespace xfer::simd {
namespace {

double squared_l2_scalar(const float* a, const float* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

constexpr KernelTable kScalar{Isa::Scalar, squared_l2_scalar, dot_scalar,
                              axpy_scalar};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace xfer::simd
