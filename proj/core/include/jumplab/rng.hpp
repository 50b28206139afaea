#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace jumplab {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Stateless: the output is a pure function of (counter, key).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Random stream for one Monte Carlo path, keyed by (experiment seed, path
/// index). Streams for different paths never overlap, so results do not
/// depend on how paths are distributed across workers.
class PathStream {
 public:
  PathStream(std::uint64_t seed, std::uint64_t path) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_(path) {}

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept {
    if (used_ >= 2) refill();
    const std::uint32_t a = buffer_[2 * used_];
    const std::uint32_t b = buffer_[2 * used_ + 1];
    ++used_;
    const double hi = static_cast<double>(a >> 5);   // 27 bits
    const double lo = static_cast<double>(b >> 6);   // 26 bits
    return (hi * 67108864.0 + lo + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

  std::uint64_t draws() const noexcept { return 2 * block_ - (2 - used_); }

 private:
  void refill() noexcept {
    Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                            static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32)};
    buffer_ = Philox4x32::block(ctr, key_);
    ++block_;
    used_ = 0;
  }

  Philox4x32::Key key_;
  std::uint64_t path_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 2;
};

}  // namespace jumplab
