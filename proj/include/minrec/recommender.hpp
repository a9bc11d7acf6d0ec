#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "minrec/core.hpp"
#include "minrec/knn.hpp"
#include "minrec/svd.hpp"

namespace minrec {

enum class Algorithm { knn, svd, svd_unbiased };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::knn: return "knn";
    case Algorithm::svd: return "svd";
    case Algorithm::svd_unbiased: return "svd_unbiased";
  }
  throw ConfigError("unknown algorithm");
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "knn") return Algorithm::knn;
  if (s == "svd") return Algorithm::svd;
  if (s == "svd_unbiased") return Algorithm::svd_unbiased;
  throw ConfigError("unknown algorithm: " + std::string(s));
}

// A trained predictor mapping (observed user ratings, target items) to
// predicted ratings. Implementations are immutable and safe to share
// across threads.
class Recommender {
 public:
  virtual ~Recommender() = default;
  virtual Algorithm algorithm() const = 0;
  virtual std::vector<Prediction> predict(const Profile& observed,
                                          const std::vector<ItemId>& items) const = 0;
};

class KnnRecommender final : public Recommender {
 public:
  explicit KnnRecommender(KnnModel model) : model_(std::move(model)) {}

  Algorithm algorithm() const override { return Algorithm::knn; }

  std::vector<Prediction> predict(const Profile& observed,
                                  const std::vector<ItemId>& items) const override {
    return model_.predict_batch(observed, items);
  }

  const KnnModel& model() const { return model_; }

 private:
  KnnModel model_;
};

// Predicts by folding the observed profile into the frozen factorization,
// one user at a time, then applying the prediction rule per item.
class SvdRecommender final : public Recommender {
 public:
  explicit SvdRecommender(SvdModel model) : model_(std::move(model)) {}

  Algorithm algorithm() const override {
    return model_.config().biased ? Algorithm::svd : Algorithm::svd_unbiased;
  }

  std::vector<Prediction> predict(const Profile& observed,
                                  const std::vector<ItemId>& items) const override {
    const FoldedUser user = fold_in_user(model_, observed);
    std::vector<Prediction> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(predict_svd(model_, user, item));
    return out;
  }

  const SvdModel& model() const { return model_; }

 private:
  SvdModel model_;
};

inline std::unique_ptr<Recommender> make_recommender(
    Algorithm algorithm, const std::map<UserId, Profile>& system_data,
    RatingScale scale, const KnnConfig& knn_config, SvdConfig svd_config) {
  switch (algorithm) {
    case Algorithm::knn:
      return std::make_unique<KnnRecommender>(KnnModel(system_data, scale, knn_config));
    case Algorithm::svd:
      svd_config.biased = true;
      return std::make_unique<SvdRecommender>(train_svd(system_data, scale, svd_config));
    case Algorithm::svd_unbiased:
      svd_config.biased = false;
      return std::make_unique<SvdRecommender>(train_svd(system_data, scale, svd_config));
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace minrec
