#pragma once

// Data-parallel inner loops used by the distance and toy-model code.
//
// Every kernel has a scalar reference implementation; vector variants (AVX2+FMA
// on x86-64, NEON on aarch64) are compiled in separate translation units and
// selected at runtime. The XFER_SIMD environment variable (scalar|avx2|neon|auto)
// overrides the automatic choice.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

namespace xfer::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);
std::optional<Isa> parse_isa(std::string_view s);

struct KernelTable {
  Isa isa;
  /// sum_i (a_i - b_i)^2, accumulated in double.
  double (*squared_l2_f32)(const float* a, const float* b, std::size_t n);
  /// sum_i a_i * b_i
  double (*dot_f64)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy_f64)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when the variant is not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();
const KernelTable* kernels_for(Isa isa);

/// The table in use for this process.
const KernelTable& active();
/// Switch the active table; returns false (and changes nothing) when the
/// requested variant is unavailable.
bool select(Isa isa);

inline double squared_l2(std::span<const float> a, std::span<const float> b) {
  return active().squared_l2_f32(a.data(), b.data(), a.size());
}
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot_f64(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy_f64(alpha, x.data(), y.data(), x.size());
}

namespace detail {
// Defined in the per-ISA translation units.
const KernelTable* avx2_table();
const KernelTable* neon_table();
}  // namespace detail

}  // namespace xfer::simd
