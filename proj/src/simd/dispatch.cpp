#include <atomic>
#include <cstdlib>
#include <string>

#include "xfer/simd/kernels.hpp"

namespace xfer::simd {

#if !defined(XFER_HAVE_AVX2_TU)
namespace detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace detail
#endif
#if !defined(XFER_HAVE_NEON_TU)
namespace detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace detail
#endif

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

std::optional<Isa> parse_isa(std::string_view s) {
  if (s == "scalar") return Isa::Scalar;
  if (s == "avx2") return Isa::Avx2;
  if (s == "neon") return Isa::Neon;
  return std::nullopt;
}

const KernelTable* avx2_kernels() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
  // NEON is architecturally mandatory on aarch64.
  return detail::neon_table();
}

const KernelTable* kernels_for(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return &scalar_kernels();
    case Isa::Avx2: return avx2_kernels();
    case Isa::Neon: return neon_kernels();
  }
  return nullptr;
}

namespace {

const KernelTable* best_available() {
  if (const auto* t = avx2_kernels()) return t;
  if (const auto* t = neon_kernels()) return t;
  return &scalar_kernels();
}

const KernelTable* initial_choice() {
  if (const char* env = std::getenv("XFER_SIMD")) {
    const std::string want(env);
    if (want != "auto" && !want.empty()) {
      if (auto isa = parse_isa(want)) {
        if (const auto* t = kernels_for(*isa)) return t;
      }
    }
  }
  return best_available();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{initial_choice()};
  return current;
}

}  // namespace

const KernelTable& active() {
  return *slot().load(std::memory_order_acquire);
}

bool select(Isa isa) {
  const KernelTable* t = kernels_for(isa);
  if (t == nullptr) return false;
  slot().store(t, std::memory_order_release);
  return true;
}

}  // namespace xfer::simd
