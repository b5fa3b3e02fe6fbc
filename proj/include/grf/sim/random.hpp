#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace grf::sim {

/// SplitMix64 finalizer; a good 64-bit mixer for building stream keys.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a list of integers into one key. Every random draw in the simulator
/// is addressed by such a key (seed, user, step, video, purpose tag), so two
/// policies that face the same event see the same randomness.
inline std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

/// Small counter-based generator usable with <random> distributions. Cheap to
/// construct, which matters because one is created per keyed event.
class KeyedRng {
 public:
  using result_type = std::uint64_t;
  explicit KeyedRng(std::uint64_t key) : state_(key) {}
  KeyedRng(std::initializer_list<std::uint64_t> parts) : state_(stream_key(parts)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

/// Purpose tags keep streams for different quantities independent.
enum class Tag : std::uint64_t {
  catalog = 1,
  trace,
  user,
  device,
  server_rank,
  server_pxtr,
  playback,
  engagement,
  abandon,
  history,
};

inline std::uint64_t tag(Tag t) { return static_cast<std::uint64_t>(t); }

}  // namespace grf::sim
