#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace minrec {

using UserId = std::string;
using ItemId = std::string;

// Thrown for problems in input data (bad files, out-of-scale ratings,
// empty pools). The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown for invalid parameters and configuration. CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bounded rating scale, e.g. (0.5, 5.0, 0.5) for MovieLens.
struct RatingScale {
  double min_value{0.5};
  double max_value{5.0};
  double step{0.5};

  bool contains(double v) const { return v >= min_value && v <= max_value; }

  double clamp(double v) const {
    if (v < min_value) return min_value;
    if (v > max_value) return max_value;
    return v;
  }

  // Snap to the nearest step on the grid, then clamp.
  double quantize(double v) const {
    const double snapped = min_value + step * std::round((v - min_value) / step);
    return clamp(snapped);
  }

  bool operator==(const RatingScale&) const = default;
};

struct RatedItem {
  double value{};
  std::int64_t timestamp{};

  bool operator==(const RatedItem&) const = default;
};

// A user profile: item -> (rating value, timestamp). Ordered map so that
// every iteration over a profile is deterministic.
using Profile = std::map<ItemId, RatedItem>;

using GenreMap = std::map<ItemId, std::vector<std::string>>;

// A predicted rating. `personalized` is false when the value came from a
// fallback (item mean, global mean, bias-only) rather than the model proper.
struct Prediction {
  double value{};
  bool personalized{true};
};

inline std::vector<ItemId> profile_items(const Profile& p) {
  std::vector<ItemId> out;
  out.reserve(p.size());
  for (const auto& [item, _] : p) out.push_back(item);
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic randomness.
//
// All randomness in the library flows from explicit 64-bit seeds through
// std::mt19937_64. The raw generator output is standardized, and the helpers
// below avoid std::uniform_*_distribution (whose output is implementation
// defined), so the same seed produces the same results on every platform.
// ---------------------------------------------------------------------------

// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Derives an independent child seed from (seed, salt), e.g. a per-user
// stream from the experiment seed and a user id hash.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return detail::splitmix64(seed ^ detail::splitmix64(salt));
}

// Unbiased integer in [0, n) by rejection sampling.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw ConfigError("uniform_below: n must be positive");
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;  // multiple of n
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via the Box-Muller transform; two generator draws per
// sample, no state carried between calls.
inline double normal_sample(std::mt19937_64& rng, double mean, double stddev) {
  const double u1 = 1.0 - uniform_unit(rng);  // (0, 1]
  const double u2 = uniform_unit(rng);
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  return mean + stddev * z;
}

// In-place Fisher-Yates shuffle driven by uniform_below.
template <typename T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace minrec
