#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <vector>

#include "minrec/core.hpp"
#include "minrec/dataset.hpp"
#include "minrec/metrics.hpp"
#include "minrec/recommender.hpp"

namespace minrec {

// Profile-minimization strategies. All select min(n, pool size) items from
// the candidate pool; `full` ignores n and reveals the whole pool. Every
// tie (equal rating, timestamp, count, variance, distance) breaks by
// ascending item id so selections are deterministic.
enum class Strategy {
  full,
  random,
  most_recent,
  most_favorite,
  least_favorite,
  most_rated,
  most_characteristic,
  highest_variance,
};

inline constexpr std::array<Strategy, 7> kMinimizingStrategies = {
    Strategy::random,          Strategy::most_recent,
    Strategy::most_favorite,   Strategy::least_favorite,
    Strategy::most_rated,      Strategy::most_characteristic,
    Strategy::highest_variance,
};

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::full: return "full";
    case Strategy::random: return "random";
    case Strategy::most_recent: return "most_recent";
    case Strategy::most_favorite: return "most_favorite";
    case Strategy::least_favorite: return "least_favorite";
    case Strategy::most_rated: return "most_rated";
    case Strategy::most_characteristic: return "most_characteristic";
    case Strategy::highest_variance: return "highest_variance";
  }
  throw ConfigError("unknown strategy");
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "full") return Strategy::full;
  if (s == "random") return Strategy::random;
  if (s == "most_recent") return Strategy::most_recent;
  if (s == "most_favorite") return Strategy::most_favorite;
  if (s == "least_favorite") return Strategy::least_favorite;
  if (s == "most_rated" || s == "most_watched") return Strategy::most_rated;
  if (s == "most_characteristic") return Strategy::most_characteristic;
  if (s == "highest_variance") return Strategy::highest_variance;
  throw ConfigError("unknown strategy: " + std::string(s));
}

// Item statistics over system data used by the stats-based strategies.
//
// For most_characteristic, each item is conceptually a binary vector over
// system users (1 where the user rated it) and selection minimizes the
// Euclidean distance to the average item vector b_avg. With
// S = sum_u b_avg[u]^2 and w_i = sum_{u in raters(i)} b_avg[u], the squared
// distance expands to S + |raters(i)| - 2 * w_i, so no dense vectors are
// ever materialized. Items absent from the system data behave as the zero
// vector (distance^2 = S), count 0, and variance 0.
class SystemStats {
 public:
  static SystemStats from_profiles(const std::map<UserId, Profile>& system_data) {
    SystemStats stats;
    stats.system_user_count_ = system_data.size();
    std::map<ItemId, std::pair<double, double>> sums;  // item -> (sum, sum of squares)
    std::map<UserId, std::size_t> user_profile_size;
    for (const auto& [user, profile] : system_data) {
      user_profile_size[user] = profile.size();
      for (const auto& [item, r] : profile) {
        ++stats.rating_counts_[item];
        auto& [s, s2] = sums[item];
        s += r.value;
        s2 += r.value * r.value;
      }
    }
    stats.system_item_count_ = stats.rating_counts_.size();
    for (const auto& [item, count] : stats.rating_counts_) {
      const auto& [s, s2] = sums[item];
      const double n = static_cast<double>(count);
      const double mean = s / n;
      stats.rating_variance_[item] = std::max(0.0, s2 / n - mean * mean);
    }
    if (stats.system_item_count_ > 0) {
      const double num_items = static_cast<double>(stats.system_item_count_);
      std::map<UserId, double> avg_vec;  // b_avg[u] = |I_u| / |I|
      for (const auto& [user, size] : user_profile_size)
        avg_vec[user] = static_cast<double>(size) / num_items;
      for (const auto& [user, a] : avg_vec) stats.avg_vector_sq_norm_ += a * a;
      for (const auto& [user, profile] : system_data)
        for (const auto& [item, _] : profile)
          stats.rater_weight_sums_[item] += avg_vec[user];
    }
    return stats;
  }

  std::size_t count(const ItemId& item) const {
    auto it = rating_counts_.find(item);
    return it == rating_counts_.end() ? 0 : it->second;
  }

  double variance(const ItemId& item) const {
    auto it = rating_variance_.find(item);
    return it == rating_variance_.end() ? 0.0 : it->second;
  }

  double characteristic_distance_sq(const ItemId& item) const {
    auto it = rater_weight_sums_.find(item);
    if (it == rater_weight_sums_.end()) return avg_vector_sq_norm_;
    return avg_vector_sq_norm_ + static_cast<double>(count(item)) - 2.0 * it->second;
  }

  bool has_item(const ItemId& item) const { return rating_counts_.count(item) > 0; }

  const std::map<ItemId, std::size_t>& rating_counts() const { return rating_counts_; }
  const std::map<ItemId, double>& rating_variance() const { return rating_variance_; }
  double avg_vector_sq_norm() const { return avg_vector_sq_norm_; }
  std::size_t system_user_count() const { return system_user_count_; }
  std::size_t system_item_count() const { return system_item_count_; }

 private:
  std::map<ItemId, std::size_t> rating_counts_;
  std::map<ItemId, double> rating_variance_;
  std::map<ItemId, double> rater_weight_sums_;
  double avg_vector_sq_norm_{0.0};
  std::size_t system_user_count_{0};
  std::size_t system_item_count_{0};
};

// The subset of the candidate pool a strategy reveals to the recommender.
struct MinimizedProfile {
  UserId user_id;
  Strategy strategy{};
  std::size_t n{};
  Profile selected;
  std::size_t withheld_count{};
  std::size_t missing_stats_count{};  // candidate items unknown to the system data
};

namespace detail {

template <typename Key>
std::vector<ItemId> ranked_items(const Profile& pool, Key key) {
  struct Entry {
    decltype(key(*pool.begin())) k;
    const ItemId* item;
  };
  std::vector<Entry> entries;
  entries.reserve(pool.size());
  for (const auto& kv : pool) entries.push_back({key(kv), &kv.first});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.k != b.k) return a.k < b.k;
    return *a.item < *b.item;
  });
  std::vector<ItemId> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(*e.item);
  return out;
}

}  // namespace detail

inline MinimizedProfile select_profile(Strategy strategy, const UserId& user,
                                       const Profile& candidate,
                                       const SystemStats& stats, std::size_t n,
                                       std::uint64_t seed) {
  if (candidate.empty()) throw DataError("user " + user + " has an empty candidate pool");
  if (strategy != Strategy::full && n < 1)
    throw ConfigError("budget n must be >= 1 for strategy " + to_string(strategy));

  MinimizedProfile result;
  result.user_id = user;
  result.strategy = strategy;
  result.n = n;

  std::vector<ItemId> order;
  switch (strategy) {
    case Strategy::full:
      order = profile_items(candidate);
      break;
    case Strategy::random: {
      order = profile_items(candidate);  // sorted
      std::mt19937_64 rng(seed);
      fisher_yates(order, rng);
      break;
    }
    case Strategy::most_recent:
      order = detail::ranked_items(candidate, [](const auto& kv) {
        return -static_cast<double>(kv.second.timestamp);
      });
      break;
    case Strategy::most_favorite:
      order = detail::ranked_items(candidate,
                                   [](const auto& kv) { return -kv.second.value; });
      break;
    case Strategy::least_favorite:
      order = detail::ranked_items(candidate,
                                   [](const auto& kv) { return kv.second.value; });
      break;
    case Strategy::most_rated:
      order = detail::ranked_items(candidate, [&stats](const auto& kv) {
        return -static_cast<double>(stats.count(kv.first));
      });
      break;
    case Strategy::most_characteristic:
      order = detail::ranked_items(candidate, [&stats](const auto& kv) {
        return stats.characteristic_distance_sq(kv.first);
      });
      break;
    case Strategy::highest_variance:
      order = detail::ranked_items(candidate, [&stats](const auto& kv) {
        return -stats.variance(kv.first);
      });
      break;
  }

  const std::size_t take =
      strategy == Strategy::full ? candidate.size() : std::min(n, candidate.size());
  for (std::size_t i = 0; i < take; ++i)
    result.selected.emplace(order[i], candidate.at(order[i]));
  result.withheld_count = candidate.size() - take;

  if (strategy == Strategy::most_rated || strategy == Strategy::most_characteristic ||
      strategy == Strategy::highest_variance) {
    for (const auto& [item, _] : candidate)
      if (!stats.has_item(item)) ++result.missing_stats_count;
  }
  return result;
}

// One-item empirical bounds: the single-item selections with the lowest
// ("one item best") and highest ("one item worst") test RMSE, plus the mean
// over all single-item selections. Ties break by ascending item id.
struct OneItemBounds {
  ItemId best_item;
  double best_score{};
  ItemId worst_item;
  double worst_score{};
  double average_score{};
};

inline OneItemBounds empirical_one_item_bounds(const UserSplit& user,
                                               const Recommender& recommender) {
  if (user.candidate.empty()) throw DataError("empty candidate pool");
  if (user.test.empty()) throw DataError("empty test pool");
  const std::vector<ItemId> test_items = profile_items(user.test);

  OneItemBounds bounds;
  double sum = 0.0;
  bool first = true;
  for (const auto& [item, rated] : user.candidate) {
    double score;
    try {
      Profile observed;
      observed.emplace(item, rated);
      const std::vector<Prediction> preds = recommender.predict(observed, test_items);
      ScoredItems scored;
      scored.reserve(test_items.size());
      for (std::size_t i = 0; i < test_items.size(); ++i)
        scored.push_back(
            {test_items[i], preds[i].value, user.test.at(test_items[i]).value});
      score = rmse(scored);
    } catch (const std::exception& e) {
      throw DataError("one-item bounds failed on item " + item + ": " + e.what());
    }
    sum += score;
    if (first || score < bounds.best_score) {
      bounds.best_item = item;
      bounds.best_score = score;
    }
    if (first || score > bounds.worst_score) {
      bounds.worst_item = item;
      bounds.worst_score = score;
    }
    first = false;
  }
  bounds.average_score = sum / static_cast<double>(user.candidate.size());
  return bounds;
}

}  // namespace minrec
