#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "minrec/core.hpp"

namespace minrec {

struct SvdConfig {
  int factors{30};
  int epochs{20};
  double learning_rate{0.005};
  double regularization{0.02};
  double init_std{0.1};
  bool biased{true};  // false drops the global mean and both bias terms
  std::uint64_t seed{0};

  bool operator==(const SvdConfig&) const = default;
};

namespace svd_detail {

// Per-rating regularized loss, the quantity SGD descends:
//   0.5 * e^2 + 0.5 * reg * (b_u^2 + b_i^2 + |p_u|^2 + |q_i|^2)
// with e = r - prediction. The unbiased variant keeps only the factor terms.
inline double rating_loss(double r, double mu, double b_u, double b_i,
                          std::span<const double> p, std::span<const double> q,
                          double reg, bool biased) {
  double dot = 0.0, p_sq = 0.0, q_sq = 0.0;
  for (std::size_t f = 0; f < p.size(); ++f) {
    dot += p[f] * q[f];
    p_sq += p[f] * p[f];
    q_sq += q[f] * q[f];
  }
  const double pred = biased ? mu + b_u + b_i + dot : dot;
  const double e = r - pred;
  const double bias_sq = biased ? b_u * b_u + b_i * b_i : 0.0;
  return 0.5 * e * e + 0.5 * reg * (bias_sq + p_sq + q_sq);
}

struct RatingGradient {
  double d_bu{};
  double d_bi{};
  std::vector<double> d_p;
  std::vector<double> d_q;
};

// Analytic gradient of rating_loss with respect to each parameter class,
// evaluated at the current parameters. The SGD step is theta -= lr * grad.
inline RatingGradient rating_gradient(double r, double mu, double b_u, double b_i,
                                      std::span<const double> p,
                                      std::span<const double> q, double reg,
                                      bool biased) {
  double dot = 0.0;
  for (std::size_t f = 0; f < p.size(); ++f) dot += p[f] * q[f];
  const double pred = biased ? mu + b_u + b_i + dot : dot;
  const double e = r - pred;
  RatingGradient g;
  g.d_bu = biased ? -e + reg * b_u : 0.0;
  g.d_bi = biased ? -e + reg * b_i : 0.0;
  g.d_p.resize(p.size());
  g.d_q.resize(p.size());
  for (std::size_t f = 0; f < p.size(); ++f) {
    g.d_p[f] = -e * q[f] + reg * p[f];
    g.d_q[f] = -e * p[f] + reg * q[f];
  }
  return g;
}

}  // namespace svd_detail

// Biased matrix factorization: prediction = mu + b_u + b_i + q_i . p_u
// (or just q_i . p_u when config.biased is false). Immutable once trained.
class SvdModel {
 public:
  SvdModel(SvdConfig config, RatingScale scale, double global_mean,
           std::map<UserId, std::size_t> user_index,
           std::map<ItemId, std::size_t> item_index,
           std::vector<double> user_factors, std::vector<double> user_bias,
           std::vector<double> item_factors, std::vector<double> item_bias)
      : config_(config),
        scale_(scale),
        global_mean_(global_mean),
        user_index_(std::move(user_index)),
        item_index_(std::move(item_index)),
        user_factors_(std::move(user_factors)),
        user_bias_(std::move(user_bias)),
        item_factors_(std::move(item_factors)),
        item_bias_(std::move(item_bias)) {}

  const SvdConfig& config() const { return config_; }
  const RatingScale& scale() const { return scale_; }
  double global_mean() const { return global_mean_; }
  const std::map<UserId, std::size_t>& user_index() const { return user_index_; }
  const std::map<ItemId, std::size_t>& item_index() const { return item_index_; }

  bool knows_item(const ItemId& item) const { return item_index_.count(item) > 0; }

  std::span<const double> item_factors(const ItemId& item) const {
    const std::size_t idx = item_index_.at(item);
    return {item_factors_.data() + idx * factors(), static_cast<std::size_t>(factors())};
  }
  double item_bias(const ItemId& item) const { return item_bias_[item_index_.at(item)]; }

  std::span<const double> user_factors(const UserId& user) const {
    const std::size_t idx = user_index_.at(user);
    return {user_factors_.data() + idx * factors(), static_cast<std::size_t>(factors())};
  }
  double user_bias(const UserId& user) const { return user_bias_[user_index_.at(user)]; }

  int factors() const { return config_.factors; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["config"] = {{"factors", config_.factors},
                   {"epochs", config_.epochs},
                   {"learning_rate", config_.learning_rate},
                   {"regularization", config_.regularization},
                   {"init_std", config_.init_std},
                   {"biased", config_.biased},
                   {"seed", config_.seed}};
    j["scale"] = {{"min", scale_.min_value}, {"max", scale_.max_value}, {"step", scale_.step}};
    j["global_mean"] = global_mean_;
    auto dump_side = [this](const auto& index, const std::vector<double>& factors,
                            const std::vector<double>& bias) {
      nlohmann::json side = nlohmann::json::array();
      for (const auto& [id, idx] : index) {
        nlohmann::json entry;
        entry["id"] = id;
        entry["bias"] = bias[idx];
        entry["factors"] = std::vector<double>(
            factors.begin() + static_cast<std::ptrdiff_t>(idx * config_.factors),
            factors.begin() + static_cast<std::ptrdiff_t>((idx + 1) * config_.factors));
        side.push_back(std::move(entry));
      }
      return side;
    };
    j["users"] = dump_side(user_index_, user_factors_, user_bias_);
    j["items"] = dump_side(item_index_, item_factors_, item_bias_);
    return j;
  }

  static SvdModel from_json(const nlohmann::json& j) {
    if (j.value("schema_version", 0) != 1)
      throw DataError("svd model: unsupported schema version");
    SvdConfig cfg;
    const auto& jc = j.at("config");
    cfg.factors = jc.at("factors").get<int>();
    cfg.epochs = jc.at("epochs").get<int>();
    cfg.learning_rate = jc.at("learning_rate").get<double>();
    cfg.regularization = jc.at("regularization").get<double>();
    cfg.init_std = jc.at("init_std").get<double>();
    cfg.biased = jc.at("biased").get<bool>();
    cfg.seed = jc.at("seed").get<std::uint64_t>();
    RatingScale scale{j.at("scale").at("min").get<double>(),
                      j.at("scale").at("max").get<double>(),
                      j.at("scale").at("step").get<double>()};
    auto load_side = [&cfg](const nlohmann::json& side, auto& index,
                            std::vector<double>& factors, std::vector<double>& bias) {
      std::size_t idx = 0;
      for (const auto& entry : side) {
        index.emplace(entry.at("id").get<std::string>(), idx++);
        bias.push_back(entry.at("bias").get<double>());
        for (const auto& f : entry.at("factors")) factors.push_back(f.get<double>());
      }
      if (factors.size() != idx * static_cast<std::size_t>(cfg.factors))
        throw DataError("svd model: factor vector length mismatch");
    };
    std::map<UserId, std::size_t> user_index;
    std::map<ItemId, std::size_t> item_index;
    std::vector<double> user_factors, user_bias, item_factors, item_bias;
    load_side(j.at("users"), user_index, user_factors, user_bias);
    load_side(j.at("items"), item_index, item_factors, item_bias);
    return SvdModel(cfg, scale, j.at("global_mean").get<double>(),
                    std::move(user_index), std::move(item_index),
                    std::move(user_factors), std::move(user_bias),
                    std::move(item_factors), std::move(item_bias));
  }

 private:
  SvdConfig config_;
  RatingScale scale_;
  double global_mean_{};
  std::map<UserId, std::size_t> user_index_;
  std::map<ItemId, std::size_t> item_index_;
  std::vector<double> user_factors_;  // row-major, factors() per user
  std::vector<double> user_bias_;
  std::vector<double> item_factors_;
  std::vector<double> item_bias_;
};

// Trains by SGD on the squared error of the prediction rule with L2
// regularization. Deterministic given config.seed: factors are initialized
// from Normal(0, init_std) in sorted user order then sorted item order, and
// every epoch sweeps the ratings sorted by (user id, item id).
// `epoch_losses`, when given, receives the summed per-rating regularized
// loss after each epoch.
inline SvdModel train_svd(const std::map<UserId, Profile>& system_data,
                          RatingScale scale, SvdConfig config,
                          std::vector<double>* epoch_losses = nullptr) {
  if (system_data.empty()) throw DataError("svd: empty system data");
  if (config.factors < 1) throw ConfigError("svd: factors must be >= 1");
  if (config.epochs < 1) throw ConfigError("svd: epochs must be >= 1");
  if (config.learning_rate <= 0.0) throw ConfigError("svd: learning_rate must be > 0");
  if (config.regularization < 0.0) throw ConfigError("svd: regularization must be >= 0");

  std::map<UserId, std::size_t> user_index;
  std::map<ItemId, std::size_t> item_index;
  struct Entry {
    std::size_t u, i;
    double r;
  };
  std::vector<Entry> entries;
  double total = 0.0;
  for (const auto& [user, profile] : system_data) {
    const std::size_t u = user_index.emplace(user, user_index.size()).first->second;
    for (const auto& [item, rated] : profile) {
      const std::size_t i = item_index.emplace(item, item_index.size()).first->second;
      entries.push_back({u, i, rated.value});
      total += rated.value;
    }
  }
  if (entries.empty()) throw DataError("svd: system data has no ratings");
  const double mu = total / static_cast<double>(entries.size());
  // item indices were assigned in rating order; remap to sorted-id order
  {
    std::map<ItemId, std::size_t> sorted;
    std::vector<std::size_t> remap(item_index.size());
    std::size_t next = 0;
    for (const auto& [id, old] : item_index) {
      remap[old] = next;
      sorted.emplace(id, next++);
    }
    for (auto& e : entries) e.i = remap[e.i];
    item_index = std::move(sorted);
  }

  const auto f = static_cast<std::size_t>(config.factors);
  std::vector<double> p(user_index.size() * f), q(item_index.size() * f);
  std::vector<double> bu(user_index.size(), 0.0), bi(item_index.size(), 0.0);
  std::mt19937_64 rng(config.seed);
  for (double& v : p) v = normal_sample(rng, 0.0, config.init_std);
  for (double& v : q) v = normal_sample(rng, 0.0, config.init_std);

  const double lr = config.learning_rate;
  const double reg = config.regularization;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (const Entry& e : entries) {
      double* pu = p.data() + e.u * f;
      double* qi = q.data() + e.i * f;
      double dot = 0.0;
      for (std::size_t x = 0; x < f; ++x) dot += pu[x] * qi[x];
      const double pred = config.biased ? mu + bu[e.u] + bi[e.i] + dot : dot;
      const double err = e.r - pred;
      if (config.biased) {
        bu[e.u] += lr * (err - reg * bu[e.u]);
        bi[e.i] += lr * (err - reg * bi[e.i]);
      }
      for (std::size_t x = 0; x < f; ++x) {
        const double puf = pu[x];
        pu[x] += lr * (err * qi[x] - reg * puf);
        qi[x] += lr * (err * puf - reg * qi[x]);
      }
    }
    if (epoch_losses) {
      double loss = 0.0;
      for (const Entry& e : entries)
        loss += svd_detail::rating_loss(e.r, mu, bu[e.u], bi[e.i],
                                        {p.data() + e.u * f, f},
                                        {q.data() + e.i * f, f}, reg, config.biased);
      epoch_losses->push_back(loss);
    }
  }
  return SvdModel(config, scale, mu, std::move(user_index), std::move(item_index),
                  std::move(p), std::move(bu), std::move(q), std::move(bi));
}

// One minimizing user's latent representation fitted against the frozen model.
struct FoldedUser {
  std::vector<double> factors;
  double bias{0.0};
  std::set<ItemId> trained_on;
  std::size_t skipped_unknown{0};
};

// Fits user-side parameters only: item factors, item biases, and the global
// mean stay frozen. p_u starts from Normal(0, init_std) seeded by
// config.seed, b_u at 0, then SGD runs config.epochs passes over `observed`
// in item-id order. Observed items unknown to the model are skipped and
// counted. An empty observed profile yields the zero vector.
inline FoldedUser fold_in_user(const SvdModel& model, const Profile& observed) {
  const SvdConfig& config = model.config();
  const auto f = static_cast<std::size_t>(config.factors);
  FoldedUser user;
  user.factors.assign(f, 0.0);

  std::vector<std::pair<const ItemId*, double>> known;
  for (const auto& [item, rated] : observed) {
    if (model.knows_item(item)) {
      known.emplace_back(&item, rated.value);
    } else {
      ++user.skipped_unknown;
    }
  }
  if (known.empty()) return user;

  std::mt19937_64 rng(config.seed);
  for (double& v : user.factors) v = normal_sample(rng, 0.0, config.init_std);

  const double mu = model.global_mean();
  const double lr = config.learning_rate;
  const double reg = config.regularization;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& [item, r] : known) {
      const std::span<const double> qi = model.item_factors(*item);
      double dot = 0.0;
      for (std::size_t x = 0; x < f; ++x) dot += user.factors[x] * qi[x];
      const double pred = config.biased
                              ? mu + user.bias + model.item_bias(*item) + dot
                              : dot;
      const double err = r - pred;
      if (config.biased) user.bias += lr * (err - reg * user.bias);
      for (std::size_t x = 0; x < f; ++x)
        user.factors[x] += lr * (err * qi[x] - reg * user.factors[x]);
    }
  }
  for (const auto& [item, _] : known) user.trained_on.insert(*item);
  return user;
}

// Prediction rule, clamped to the rating scale. Unknown items fall back to
// mu + b_u (0 for the unbiased variant) and are flagged non-personalized.
inline Prediction predict_svd(const SvdModel& model, const FoldedUser& user,
                              const ItemId& item) {
  const bool biased = model.config().biased;
  if (!model.knows_item(item)) {
    const double value = biased ? model.global_mean() + user.bias : 0.0;
    return {model.scale().clamp(value), false};
  }
  const std::span<const double> qi = model.item_factors(item);
  double dot = 0.0;
  for (std::size_t x = 0; x < qi.size(); ++x) dot += user.factors[x] * qi[x];
  const double value =
      biased ? model.global_mean() + user.bias + model.item_bias(item) + dot : dot;
  return {model.scale().clamp(value), true};
}

inline void save_svd(const SvdModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << model.to_json().dump(2) << '\n';
}

inline SvdModel load_svd(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError(path + ": invalid JSON");
  return SvdModel::from_json(j);
}

}  // namespace minrec
