#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace m3dseg::numerics {

/// 64-bit FNV-1a, used for stream derivation and file digests.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), seed);
}

/// Deterministic random stream identified by (master seed, name). Draws are
/// built from raw mt19937_64 output, so sequences are identical across
/// standard libraries.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::string_view name);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller).
  double normal();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[index(i)]);
  }

  /// Independent child stream.
  RandomStream fork(std::string_view name);

 private:
  explicit RandomStream(std::uint64_t state);
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace m3dseg::numerics
