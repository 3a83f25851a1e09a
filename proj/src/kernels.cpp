#include "mixcpd/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "mixcpd/errors.hpp"

namespace mixcpd::simd {

std::string_view to_string(Isa isa) {
  switch (isa) {
  case Isa::scalar:
    return "scalar";
  case Isa::avx2:
    return "avx2";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar")
    return Isa::scalar;
  if (name == "avx2")
    return Isa::avx2;
  throw ParameterError("unknown instruction set '" + std::string(name) + "'");
}

TermParams TermParams::make(Transform transform, double p0) {
  if (!(p0 > 0.0 && p0 <= 1.0))
    throw ParameterError("p0 must lie in (0, 1]");
  return {transform, p0, std::log(p0)};
}

namespace {

constexpr KernelSet kScalar{Isa::scalar, &scalar::reduce_window, &scalar::exp_block, &scalar::log_block};
#if defined(MIXCPD_HAVE_AVX2)
constexpr KernelSet kAvx2{Isa::avx2, &avx2::reduce_window, &avx2::exp_block, &avx2::log_block};
#endif

bool cpu_has_avx2() noexcept {
#if defined(MIXCPD_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelSet *initial_kernels() {
  Isa isa = detected_isa();
  if (const char *env = std::getenv("MIXCPD_ISA"); env != nullptr && *env != '\0') {
    const std::string_view name(env);
    if (name == "scalar" || (name == "avx2" && isa_supported(Isa::avx2)))
      isa = parse_isa(name);
    else
      std::fprintf(stderr, "mixcpd: ignoring MIXCPD_ISA=%s (unknown or unsupported)\n", env);
  }
  return &kernels_for(isa);
}

std::atomic<const KernelSet *> &active_slot() {
  static std::atomic<const KernelSet *> slot{initial_kernels()};
  return slot;
}

} // namespace

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
  case Isa::scalar:
    return true;
  case Isa::avx2:
    return cpu_has_avx2();
  }
  return false;
}

Isa detected_isa() noexcept { return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

const KernelSet &kernels_for(Isa isa) {
  if (!isa_supported(isa))
    throw ParameterError("instruction set " + std::string(to_string(isa)) + " is not available");
#if defined(MIXCPD_HAVE_AVX2)
  if (isa == Isa::avx2)
    return kAvx2;
#endif
  return kScalar;
}

const KernelSet &kernels() noexcept { return *active_slot().load(std::memory_order_relaxed); }

Isa active_isa() noexcept { return kernels().isa; }

void set_active_isa(Isa isa) { active_slot().store(&kernels_for(isa), std::memory_order_relaxed); }

} // namespace mixcpd::simd
