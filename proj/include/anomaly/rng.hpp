#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace anomaly {

// Helpers on top of std::mt19937_64. The distribution adaptors in <random>
// are implementation-defined, so the mappings here are spelled out to make a
// seed produce the same value stream on every platform.

// Uniform draw in [0, 1) with 53 bits of precision.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Standard normal draw via Box-Muller. Consumes two words per call.
inline double gaussian(std::mt19937_64& rng) {
  double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Fisher-Yates shuffle. The modulo bias is negligible for index ranges.
template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace anomaly
