#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "minrec/core.hpp"

namespace minrec {

struct KnnConfig {
  int k{30};                  // neighborhood size
  std::size_t min_overlap{1}; // shared items required for a nonzero similarity
};

// Mean-squared-difference similarity with add-1 smoothing:
// 1 / (mean squared rating difference over shared items + 1).
// Profiles sharing fewer than `min_overlap` items have similarity 0.
inline double msd_similarity(const Profile& a, const Profile& b,
                             std::size_t min_overlap = 1) {
  const Profile& small = a.size() <= b.size() ? a : b;
  const Profile& large = a.size() <= b.size() ? b : a;
  double sum = 0.0;
  std::size_t shared = 0;
  for (const auto& [item, r] : small) {
    auto it = large.find(item);
    if (it == large.end()) continue;
    const double d = r.value - it->second.value;
    sum += d * d;
    ++shared;
  }
  if (shared < std::max<std::size_t>(min_overlap, 1)) return 0.0;
  return 1.0 / (sum / static_cast<double>(shared) + 1.0);
}

// User-user kNN over immutable system profiles. Predictions are the
// similarity-weighted mean of the ratings of the k most similar system
// users who rated the item, falling back to the item mean and then the
// global mean when no neighbor has positive similarity.
class KnnModel {
 public:
  KnnModel(std::map<UserId, Profile> system_profiles, RatingScale scale,
           KnnConfig config = {})
      : profiles_(std::move(system_profiles)), scale_(scale), config_(config) {
    if (config_.k < 1) throw ConfigError("knn: k must be >= 1");
    if (profiles_.empty()) throw DataError("knn: empty system data");
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& [user, profile] : profiles_) {
      for (const auto& [item, r] : profile) {
        raters_[item].emplace_back(user, r.value);
        total += r.value;
        ++count;
      }
    }
    if (count == 0) throw DataError("knn: system data has no ratings");
    global_mean_ = total / static_cast<double>(count);
    for (auto& [item, entries] : raters_) {
      double s = 0.0;
      for (const auto& [_, v] : entries) s += v;
      item_means_[item] = s / static_cast<double>(entries.size());
    }
  }

  const std::map<UserId, Profile>& system_profiles() const { return profiles_; }
  const RatingScale& scale() const { return scale_; }
  const KnnConfig& config() const { return config_; }
  double global_mean() const { return global_mean_; }

  std::size_t item_rating_count(const ItemId& item) const {
    auto it = raters_.find(item);
    return it == raters_.end() ? 0 : it->second.size();
  }

  std::optional<double> item_mean(const ItemId& item) const {
    auto it = item_means_.find(item);
    if (it == item_means_.end()) return std::nullopt;
    return it->second;
  }

  Prediction predict(const Profile& observed, const ItemId& item) const {
    SimCache cache;
    return predict_cached(observed, item, cache);
  }

  // Element-wise predict with the similarity cache shared across items.
  std::vector<Prediction> predict_batch(const Profile& observed,
                                        const std::vector<ItemId>& items) const {
    SimCache cache;
    std::vector<Prediction> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(predict_cached(observed, item, cache));
    return out;
  }

 private:
  using SimCache = std::unordered_map<const Profile*, double>;

  Prediction predict_cached(const Profile& observed, const ItemId& item,
                            SimCache& cache) const {
    auto raters = raters_.find(item);
    if (raters != raters_.end() && !observed.empty()) {
      // Candidate neighbors: system raters of the item with positive
      // similarity, ordered by similarity descending, user id ascending.
      struct Neighbor {
        double sim;
        const UserId* user;
        double rating;
      };
      std::vector<Neighbor> neighbors;
      for (const auto& [user, rating] : raters->second) {
        const Profile& profile = profiles_.find(user)->second;
        auto cached = cache.find(&profile);
        double sim;
        if (cached != cache.end()) {
          sim = cached->second;
        } else {
          sim = msd_similarity(observed, profile, config_.min_overlap);
          cache.emplace(&profile, sim);
        }
        if (sim > 0.0) neighbors.push_back({sim, &user, rating});
      }
      if (!neighbors.empty()) {
        const std::size_t k = std::min<std::size_t>(neighbors.size(),
                                                    static_cast<std::size_t>(config_.k));
        std::partial_sort(neighbors.begin(),
                          neighbors.begin() + static_cast<std::ptrdiff_t>(k),
                          neighbors.end(), [](const Neighbor& a, const Neighbor& b) {
                            if (a.sim != b.sim) return a.sim > b.sim;
                            return *a.user < *b.user;
                          });
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          num += neighbors[i].sim * neighbors[i].rating;
          den += neighbors[i].sim;
        }
        return {scale_.clamp(num / den), true};
      }
    }
    auto mean = item_mean(item);
    return {scale_.clamp(mean.value_or(global_mean_)), false};
  }

  std::map<UserId, Profile> profiles_;
  std::map<ItemId, std::vector<std::pair<UserId, double>>> raters_;
  std::map<ItemId, double> item_means_;
  double global_mean_{};
  RatingScale scale_;
  KnnConfig config_;
};

inline Prediction predict_knn(const KnnModel& model, const Profile& observed,
                              const ItemId& item) {
  return model.predict(observed, item);
}

inline std::vector<Prediction> batch_predict_knn(const KnnModel& model,
                                                 const Profile& observed,
                                                 const std::vector<ItemId>& items) {
  return model.predict_batch(observed, items);
}

}  // namespace minrec
