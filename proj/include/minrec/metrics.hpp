#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "minrec/core.hpp"

namespace minrec {

// One (predicted, true) rating pair from a user's test pool.
struct ScoredItem {
  ItemId item;
  double predicted{};
  double truth{};
};

using ScoredItems = std::vector<ScoredItem>;

namespace detail {
inline void check_scored(const ScoredItems& scored, const char* op) {
  if (scored.empty()) throw DataError(std::string(op) + ": no scored items");
  std::set<ItemId> seen;
  for (const auto& s : scored)
    if (!seen.insert(s.item).second)
      throw DataError(std::string(op) + ": duplicate item id " + s.item);
}
}  // namespace detail

inline double rmse(const ScoredItems& scored) {
  detail::check_scored(scored, "rmse");
  double sum = 0.0;
  for (const auto& s : scored) {
    const double d = s.predicted - s.truth;
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(scored.size()));
}

// Gain applied to the true rating when computing DCG.
enum class NdcgGain { linear, exponential };

// NDCG@k. Items are ranked by predicted rating descending, ties broken by
// ascending item id; gain is the true rating (or 2^truth - 1) discounted by
// 1/log2(position + 1), positions starting at 1. IDCG ranks by truth; an
// all-zero ideal (IDCG = 0) defines NDCG = 1.
inline double ndcg_at_k(const ScoredItems& scored, std::size_t k,
                        NdcgGain gain = NdcgGain::linear) {
  detail::check_scored(scored, "ndcg_at_k");
  if (k < 1) throw ConfigError("ndcg_at_k: k must be >= 1");

  const auto gain_of = [gain](double truth) {
    return gain == NdcgGain::linear ? truth : std::exp2(truth) - 1.0;
  };

  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].predicted != scored[b].predicted)
      return scored[a].predicted > scored[b].predicted;
    return scored[a].item < scored[b].item;
  });

  std::vector<double> gains;
  gains.reserve(scored.size());
  for (const auto& s : scored) gains.push_back(gain_of(s.truth));

  const std::size_t depth = std::min(k, scored.size());
  double dcg = 0.0;
  for (std::size_t pos = 0; pos < depth; ++pos)
    dcg += gains[order[pos]] / std::log2(static_cast<double>(pos) + 2.0);

  std::vector<double> ideal = gains;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t pos = 0; pos < depth; ++pos)
    idcg += ideal[pos] / std::log2(static_cast<double>(pos) + 2.0);

  if (idcg == 0.0) return 1.0;
  return dcg / idcg;
}

// Unweighted mean across users.
inline double macro_average(const std::vector<double>& per_user) {
  if (per_user.empty()) throw DataError("macro_average: no values");
  double sum = 0.0;
  for (double v : per_user) sum += v;
  return sum / static_cast<double>(per_user.size());
}

}  // namespace minrec
