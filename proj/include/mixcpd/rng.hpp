#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace mixcpd {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key) noexcept;

/// Independent stream for one (seed, stream) pair: key = seed, counter = (block, stream).
/// Gaussians use the Marsaglia polar method on 53-bit uniforms, so draws are bit-reproducible
/// wherever double arithmetic and std::log/std::sqrt are IEEE-correct.
class TrialRng {
public:
  TrialRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint32_t next_u32() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double gaussian() noexcept;
  void fill_gaussian(std::span<double> out) noexcept;

private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  unsigned used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace mixcpd
