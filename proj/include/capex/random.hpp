#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace capex {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Every (key, counter) pair maps to an independent block of four words, so a
/// stream can be addressed directly by (seed, path index) with no shared state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }
};

/// SplitMix64 finalizer, used to derive stream keys from structured ids.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(seed ^ mix64(a)) ^ mix64(b + 0x632BE59BD9B4E019ull));
}

/// Standard normal draws from one Philox stream. Box-Muller on two 53-bit
/// uniforms per block, both outputs used.
class NormalStream {
 public:
  NormalStream(std::uint64_t stream, std::uint64_t substream = 0)
      : key_{static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
        hi_(substream) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const auto out = Philox4x32::block({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                                        static_cast<std::uint32_t>(hi_), static_cast<std::uint32_t>(hi_ >> 32)},
                                       key_);
    ++counter_;
    const double u1 = to_open_unit((std::uint64_t{out[0]} << 32) | out[1]);
    const double u2 = to_open_unit((std::uint64_t{out[2]} << 32) | out[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  // (0, 1]: never zero so the logarithm stays finite.
  static double to_open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 1.0) * (1.0 / 9007199254740992.0);
  }

  Philox4x32::Key key_;
  std::uint64_t hi_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace capex
