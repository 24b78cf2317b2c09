#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace qarspec {

/// SplitMix64 finalizer. Used for seeding and for deriving child streams.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// FNV-1a over the bytes of a label; stable across platforms.
constexpr std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : label) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/**
 * xoshiro256** generator seeded through SplitMix64.
 *
 * All variates are produced from the raw 64-bit output with integer
 * arithmetic (uniforms) or with the library's own inverse normal CDF
 * (normals), so a stream is reproducible bit-for-bit on any platform with
 * IEEE doubles. Standard-library distributions are deliberately not used:
 * their algorithms are implementation-defined.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept;

  /// Uniform on the open interval (0, 1).
  double uniform_open() noexcept;

  /// Uniform integer on [0, n); unbiased (Lemire's multiply-and-reject).
  std::size_t uniform_index(std::size_t n) noexcept;

  /// Standard normal via inverse-CDF transform of uniform_open().
  double normal() noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
};

/**
 * Splittable seed. A run has one root key (the user's --seed); every
 * consumer derives its own labelled child so that streams never overlap and
 * do not depend on scheduling order.
 */
class StreamKey {
 public:
  explicit constexpr StreamKey(std::uint64_t seed) noexcept : value_(seed) {}

  [[nodiscard]] constexpr StreamKey child(std::string_view label,
                                          std::uint64_t index = 0) const noexcept {
    return StreamKey(mix64(value_ ^ mix64(hash_label(label) + mix64(index))));
  }

  [[nodiscard]] Rng rng() const noexcept { return Rng(value_); }
  [[nodiscard]] constexpr std::uint64_t value() const noexcept { return value_; }

 private:
  std::uint64_t value_;
};

}  // namespace qarspec
