#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "minrec/core.hpp"
#include "minrec/dataset.hpp"

namespace minrec {

// Latent-factor taste model for desk-scale synthetic ratings. Items get
// Zipf-skewed popularity weights; each user rates a popularity-weighted
// sample of items with value
//   mu + b_u + b_i + p_u . q_i + noise
// clamped to the scale and optionally snapped to the rating step. Factors
// are drawn with stddev factors^(-1/4) so the dot product has roughly unit
// variance regardless of the factor count.
struct SynthConfig {
  std::size_t users{50};
  std::size_t items{200};
  std::uint64_t seed{0};
  int taste_factors{8};
  double noise_std{0.35};
  double user_bias_std{0.45};
  double item_bias_std{0.30};
  double base_mean{3.4};
  std::size_t min_profile{46};   // smallest profile size
  double mean_profile{69.5};     // exponential tail above min_profile
  double zipf_exponent{0.8};     // item popularity skew
  RatingScale scale{0.5, 5.0, 0.5};
  bool quantize{true};
  std::size_t genre_pool{18};
  bool with_genres{true};
};

namespace synth_detail {

inline const std::vector<std::string>& genre_names() {
  static const std::vector<std::string> names = {
      "Action",   "Adventure", "Animation", "Children", "Comedy",  "Crime",
      "Documentary", "Drama",  "Fantasy",   "FilmNoir", "Horror",  "Musical",
      "Mystery",  "Romance",   "SciFi",     "Thriller", "War",     "Western"};
  return names;
}

inline std::string zero_pad(std::size_t v, std::size_t width) {
  std::string s = std::to_string(v);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

}  // namespace synth_detail

inline RatingsDataset synthesize(const SynthConfig& cfg) {
  if (cfg.users < 2 || cfg.items < 2)
    throw ConfigError("synth: need at least 2 users and 2 items");
  if (cfg.min_profile < 2) throw ConfigError("synth: min_profile must be >= 2");
  if (cfg.taste_factors < 1) throw ConfigError("synth: taste_factors must be >= 1");

  const auto f = static_cast<std::size_t>(cfg.taste_factors);
  const double factor_std = std::pow(static_cast<double>(cfg.taste_factors), -0.25);
  const std::size_t id_width = std::to_string(std::max(cfg.users, cfg.items)).size();

  std::mt19937_64 rng(cfg.seed);

  std::vector<double> item_factors(cfg.items * f), item_bias(cfg.items);
  std::vector<double> popularity(cfg.items);
  for (std::size_t i = 0; i < cfg.items; ++i) {
    for (std::size_t x = 0; x < f; ++x)
      item_factors[i * f + x] = normal_sample(rng, 0.0, factor_std);
    item_bias[i] = normal_sample(rng, 0.0, cfg.item_bias_std);
    popularity[i] = std::pow(static_cast<double>(i + 1), -cfg.zipf_exponent);
  }

  GenreMap genres;
  if (cfg.with_genres) {
    const auto& names = synth_detail::genre_names();
    const std::size_t pool = std::min(cfg.genre_pool, names.size());
    for (std::size_t i = 0; i < cfg.items; ++i) {
      const std::size_t count = 1 + uniform_below(rng, 3);
      std::vector<std::string> labels;
      while (labels.size() < count) {
        const std::string& g = names[uniform_below(rng, pool)];
        if (std::find(labels.begin(), labels.end(), g) == labels.end())
          labels.push_back(g);
      }
      genres["i" + synth_detail::zero_pad(i + 1, id_width)] = std::move(labels);
    }
  }

  std::vector<Rating> ratings;
  std::vector<double> user_factors(f);
  std::vector<std::pair<double, std::size_t>> keys(cfg.items);
  constexpr std::int64_t kBaseTimestamp = 800000000;
  for (std::size_t u = 0; u < cfg.users; ++u) {
    for (std::size_t x = 0; x < f; ++x)
      user_factors[x] = normal_sample(rng, 0.0, factor_std);
    const double user_bias = normal_sample(rng, 0.0, cfg.user_bias_std);

    const double excess = std::max(0.0, cfg.mean_profile - static_cast<double>(cfg.min_profile));
    const double tail = excess > 0.0 ? -excess * std::log(1.0 - uniform_unit(rng)) : 0.0;
    const std::size_t size =
        std::min(cfg.items, cfg.min_profile + static_cast<std::size_t>(std::floor(tail)));

    // Popularity-weighted sample without replacement (Efraimidis-Spirakis):
    // the `size` items with the largest U^(1/w) keys.
    for (std::size_t i = 0; i < cfg.items; ++i) {
      const double unit = 1.0 - uniform_unit(rng);  // (0, 1]
      keys[i] = {std::pow(unit, 1.0 / popularity[i]), i};
    }
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(size),
                      keys.end(), std::greater<>());

    const std::string user_id = "u" + synth_detail::zero_pad(u + 1, id_width);
    for (std::size_t s = 0; s < size; ++s) {
      const std::size_t i = keys[s].second;
      double dot = 0.0;
      for (std::size_t x = 0; x < f; ++x) dot += user_factors[x] * item_factors[i * f + x];
      double value = cfg.base_mean + user_bias + item_bias[i] + dot;
      if (cfg.noise_std > 0.0) value += normal_sample(rng, 0.0, cfg.noise_std);
      value = cfg.quantize ? cfg.scale.quantize(value) : cfg.scale.clamp(value);
      const auto timestamp =
          kBaseTimestamp + static_cast<std::int64_t>(uniform_below(rng, 700000000));
      ratings.push_back({user_id, "i" + synth_detail::zero_pad(i + 1, id_width),
                         value, timestamp});
    }
  }
  return RatingsDataset(std::move(ratings), cfg.scale, std::move(genres),
                        cfg.with_genres);
}

}  // namespace minrec
