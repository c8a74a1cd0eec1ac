#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace fedsim {

// Deterministic hierarchical random streams.
//
// A stream is identified by (root_seed, path). The path is a list of
// non-negative integers; child(i) extends it by one element. Draws are
// counter-based: draw n is a pure function of (key, n), where the key is a
// hash chain over the seed and the path elements. Identical (seed, path)
// therefore replays the identical sequence, and streams for different
// clients/rounds/steps can be consumed in any order or from any thread.
class RngStream {
 public:
  explicit RngStream(std::uint64_t root_seed)
      : root_seed_(root_seed), key_(mix(root_seed + kChainSalt)) {}

  RngStream child(std::uint64_t index) const {
    RngStream s(*this);
    s.path_.push_back(index);
    s.key_ = chain(key_, index);
    s.counter_ = 0;
    return s;
  }

  std::uint64_t root_seed() const { return root_seed_; }
  const std::vector<std::uint64_t>& path() const { return path_; }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on the open interval (0, 1); safe under log() and tan().
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
  }

  // Uniform integer in [0, n). Multiply-shift; bias is O(n / 2^64).
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller (consumes two uniforms).
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  friend bool operator==(const RngStream& a, const RngStream& b) {
    return a.root_seed_ == b.root_seed_ && a.path_ == b.path_;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kChainSalt = 0xA0761D6478BD642Full;
  static constexpr double kPi = 3.14159265358979323846;

  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::uint64_t chain(std::uint64_t key, std::uint64_t index) {
    return mix(key ^ mix(index + kChainSalt));
  }

  std::uint64_t root_seed_;
  std::vector<std::uint64_t> path_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace fedsim
