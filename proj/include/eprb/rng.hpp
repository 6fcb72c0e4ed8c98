#pragma once

#include <array>
#include <cstdint>

namespace eprb {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The output
/// block is a pure function of (key, counter), so event n can draw its
/// random numbers without touching any shared state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Independent random substreams of the simulation. Every (stream, event)
/// combination maps to its own Philox block.
enum class Stream : std::uint32_t {
  source_angle = 0,
  arrival = 1,
  setting1 = 2,
  setting2 = 3,
  splitter1 = 4,
  splitter2 = 5,
  delay1 = 6,
  delay2 = 7,
  malus_probe = 8,
};

/// Uniform draws for one (seed, stream, event index) triple.
class EventDraws {
 public:
  EventDraws(std::uint64_t seed, Stream stream, std::uint64_t index, std::uint32_t salt = 0) noexcept
      : bits_(Philox4x32::block({static_cast<std::uint32_t>(index),
                                 static_cast<std::uint32_t>(index >> 32),
                                 static_cast<std::uint32_t>(stream), salt},
                                {static_cast<std::uint32_t>(seed),
                                 static_cast<std::uint32_t>(seed >> 32)})) {}

  /// 53-bit uniform on the open interval (0, 1).
  [[nodiscard]] double open01(int k = 0) const noexcept {
    return (static_cast<double>(bits53(k)) + 0.5) * 0x1p-53;
  }
  /// 53-bit uniform on [0, 1).
  [[nodiscard]] double closed_open01(int k = 0) const noexcept {
    return static_cast<double>(bits53(k)) * 0x1p-53;
  }
  [[nodiscard]] std::uint32_t word(int i) const noexcept { return bits_[i]; }

 private:
  // k selects the first (0) or second (1) pair of 32-bit words.
  [[nodiscard]] std::uint64_t bits53(int k) const noexcept {
    const std::uint64_t hi = bits_[2 * k];
    const std::uint64_t lo = bits_[2 * k + 1];
    return ((hi << 32) | lo) >> 11;
  }

  Philox4x32::Counter bits_;
};

/// SplitMix64 finalizer; derives child seeds from a parent seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace eprb
