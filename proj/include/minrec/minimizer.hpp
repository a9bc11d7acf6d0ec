#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "minrec/analysis.hpp"
#include "minrec/core.hpp"
#include "minrec/dataset.hpp"
#include "minrec/metrics.hpp"
#include "minrec/recommender.hpp"
#include "minrec/strategies.hpp"

namespace minrec {

// One cell of the experiment grid.
struct Condition {
  Algorithm algorithm{};
  Strategy strategy{};
  std::size_t n{};         // budget; ignored by Strategy::full
  std::uint64_t seed{};
};

struct UserEval {
  double rmse{};
  double ndcg{};
  std::size_t selected_count{};
  std::size_t pool_size{};
};

struct ConditionScores {
  Condition condition;
  std::map<UserId, UserEval> per_user;
  std::vector<UserId> excluded_users;  // empty test or candidate pool
};

// Strategy selections for every minimizing user of one condition. The
// per-user stream seed depends on (seed, user) but not on n, so random
// selections at growing budgets nest.
inline std::map<UserId, MinimizedProfile> select_all(const ExperimentSplit& split,
                                                     const SystemStats& stats,
                                                     Strategy strategy, std::size_t n,
                                                     std::uint64_t seed) {
  std::map<UserId, MinimizedProfile> out;
  for (const auto& [user, pools] : split.minimizing_users) {
    if (pools.candidate.empty() || pools.test.empty()) continue;
    out.emplace(user, select_profile(strategy, user, pools.candidate, stats, n,
                                     mix_seed(seed, fnv1a64(user))));
  }
  return out;
}

// Scores one condition: per user, predict the test pool from the selected
// profile and evaluate RMSE and NDCG@k. Users with an empty test or
// candidate pool are excluded and reported.
inline ConditionScores evaluate_selected(
    const ExperimentSplit& split, const Recommender& recommender,
    const Condition& condition,
    const std::map<UserId, MinimizedProfile>& selections, std::size_t ndcg_k) {
  ConditionScores scores;
  scores.condition = condition;
  for (const auto& [user, pools] : split.minimizing_users) {
    if (pools.candidate.empty() || pools.test.empty()) {
      scores.excluded_users.push_back(user);
      continue;
    }
    const MinimizedProfile& minimized = selections.at(user);
    const std::vector<ItemId> test_items = profile_items(pools.test);
    const std::vector<Prediction> preds =
        recommender.predict(minimized.selected, test_items);
    ScoredItems scored;
    scored.reserve(test_items.size());
    for (std::size_t i = 0; i < test_items.size(); ++i)
      scored.push_back({test_items[i], preds[i].value, pools.test.at(test_items[i]).value});
    UserEval eval;
    eval.rmse = rmse(scored);
    eval.ndcg = ndcg_at_k(scored, ndcg_k);
    eval.selected_count = minimized.selected.size();
    eval.pool_size = pools.candidate.size();
    scores.per_user.emplace(user, eval);
  }
  if (scores.per_user.empty()) throw DataError("condition has no evaluable users");
  return scores;
}

inline ConditionScores evaluate_condition(const ExperimentSplit& split,
                                          const Recommender& recommender,
                                          const SystemStats& stats,
                                          const Condition& condition,
                                          std::size_t ndcg_k) {
  const auto selections =
      select_all(split, stats, condition.strategy, condition.n, condition.seed);
  return evaluate_selected(split, recommender, condition, selections, ndcg_k);
}

struct Significance {
  double p_value{1.0};
  bool significant{false};
  std::size_t num_comparisons{1};
  bool degenerate{false};
};

// Per-condition evaluation against the Full baseline of the same algorithm
// and seed.
struct EvaluationReport {
  Condition condition;
  struct PerUser {
    double rmse{};
    double ndcg{};
    double delta_rmse{};  // condition - full; positive is worse
    double delta_ndcg{};  // condition - full; negative is worse
    std::size_t selected_count{};
    std::size_t pool_size{};
  };
  std::map<UserId, PerUser> per_user;
  double macro_rmse{};
  double macro_ndcg{};
  double macro_delta_rmse{};
  double macro_delta_ndcg{};
  Significance rmse_significance;
  Significance ndcg_significance;
  double withheld_fraction{};  // mean over users of 1 - |selected| / |pool|
  std::vector<UserId> excluded_users;
};

// Assembles the report for `scores` with deltas and paired t-tests against
// the Full baseline. `num_comparisons` is the Bonferroni family size (all
// strategy x budget cells of the algorithm's table).
inline EvaluationReport build_report(const ConditionScores& scores,
                                     const ConditionScores& full_baseline,
                                     double alpha, std::size_t num_comparisons) {
  EvaluationReport report;
  report.condition = scores.condition;
  report.excluded_users = scores.excluded_users;

  std::vector<double> rmse_cond, rmse_full, ndcg_cond, ndcg_full;
  double withheld_sum = 0.0;
  for (const auto& [user, eval] : scores.per_user) {
    auto base = full_baseline.per_user.find(user);
    if (base == full_baseline.per_user.end())
      throw DataError("user " + user + " missing from the full baseline");
    EvaluationReport::PerUser row;
    row.rmse = eval.rmse;
    row.ndcg = eval.ndcg;
    row.delta_rmse = eval.rmse - base->second.rmse;
    row.delta_ndcg = eval.ndcg - base->second.ndcg;
    row.selected_count = eval.selected_count;
    row.pool_size = eval.pool_size;
    report.per_user.emplace(user, row);
    rmse_cond.push_back(eval.rmse);
    rmse_full.push_back(base->second.rmse);
    ndcg_cond.push_back(eval.ndcg);
    ndcg_full.push_back(base->second.ndcg);
    withheld_sum += 1.0 - static_cast<double>(eval.selected_count) /
                              static_cast<double>(eval.pool_size);
  }
  report.macro_rmse = macro_average(rmse_cond);
  report.macro_ndcg = macro_average(ndcg_cond);
  report.macro_delta_rmse = report.macro_rmse - macro_average(rmse_full);
  report.macro_delta_ndcg = report.macro_ndcg - macro_average(ndcg_full);
  report.withheld_fraction = withheld_sum / static_cast<double>(scores.per_user.size());

  const double threshold = alpha / static_cast<double>(num_comparisons);
  auto significance = [&](const std::vector<double>& cond,
                          const std::vector<double>& full) {
    Significance s;
    s.num_comparisons = num_comparisons;
    if (cond.size() < 2) {
      s.degenerate = true;
      return s;
    }
    const TTestResult t = paired_ttest(cond, full);
    s.p_value = t.p_value;
    s.degenerate = t.degenerate;
    s.significant = t.p_value < threshold;
    return s;
  };
  report.rmse_significance = significance(rmse_cond, rmse_full);
  report.ndcg_significance = significance(ndcg_cond, ndcg_full);
  return report;
}

inline EvaluationReport run_condition(const ExperimentSplit& split,
                                      const Recommender& recommender,
                                      const SystemStats& stats,
                                      const Condition& condition,
                                      const ConditionScores& full_baseline,
                                      double alpha, std::size_t num_comparisons,
                                      std::size_t ndcg_k) {
  return build_report(
      evaluate_condition(split, recommender, stats, condition, ndcg_k),
      full_baseline, alpha, num_comparisons);
}

// Mean over minimizing users of the fraction of candidate data withheld,
// 1 - |O_u| / |pool_u|. Selections take min(n, pool) items, so this is a
// pure function of the pool sizes; Strategy::full withholds nothing.
inline double withheld_fraction(const ExperimentSplit& split, const Condition& condition) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& [_, pools] : split.minimizing_users) {
    if (pools.candidate.empty()) continue;
    const auto pool = static_cast<double>(pools.candidate.size());
    const double selected =
        condition.strategy == Strategy::full
            ? pool
            : static_cast<double>(std::min(condition.n, pools.candidate.size()));
    sum += 1.0 - selected / pool;
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

enum class MinimizationDefinition { global, per_user };
enum class QualityMetric { rmse, ndcg };

inline std::string to_string(MinimizationDefinition d) {
  return d == MinimizationDefinition::global ? "global" : "per_user";
}
inline std::string to_string(QualityMetric m) {
  return m == QualityMetric::rmse ? "rmse" : "ndcg";
}
inline QualityMetric parse_metric(std::string_view s) {
  if (s == "rmse") return QualityMetric::rmse;
  if (s == "ndcg") return QualityMetric::ndcg;
  throw ConfigError("unknown metric: " + std::string(s));
}

// Outcome of a budget search under one of the two minimization definitions.
// k_star is the smallest feasible budget in the grid, or empty when none
// satisfies the constraint. feasibility_curve records the slack
// (lambda - loss) at every tested budget; loss is oriented so that larger
// means worse (RMSE increase, NDCG decrease).
struct MinimizationDecision {
  MinimizationDefinition definition{};
  double lambda{};
  QualityMetric metric{};
  std::optional<std::size_t> k_star;
  std::map<std::size_t, double> feasibility_curve;  // n -> slack
  std::map<std::size_t, double> loss_curve;         // n -> quality loss vs full
  std::map<UserId, std::optional<std::size_t>> per_user_k;  // per-user runs only
};

namespace detail {

inline double user_loss(const UserEval& cond, const UserEval& full, QualityMetric metric) {
  return metric == QualityMetric::rmse ? cond.rmse - full.rmse : full.ndcg - cond.ndcg;
}

inline MinimizationDecision minimize_impl(const ExperimentSplit& split,
                                          const Recommender& recommender,
                                          const SystemStats& stats, Strategy strategy,
                                          double lambda, QualityMetric metric,
                                          const std::vector<std::size_t>& budget_grid,
                                          std::uint64_t seed, std::size_t ndcg_k,
                                          MinimizationDefinition definition) {
  if (budget_grid.empty()) throw ConfigError("empty budget grid");
  if (!std::is_sorted(budget_grid.begin(), budget_grid.end()))
    throw ConfigError("budget grid must be ascending");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");

  const Condition full_condition{recommender.algorithm(), Strategy::full, 0, seed};
  const ConditionScores full =
      evaluate_condition(split, recommender, stats, full_condition, ndcg_k);

  MinimizationDecision decision;
  decision.definition = definition;
  decision.lambda = lambda;
  decision.metric = metric;
  if (definition == MinimizationDefinition::per_user)
    for (const auto& [user, _] : full.per_user) decision.per_user_k[user] = std::nullopt;

  for (std::size_t n : budget_grid) {
    const Condition condition{recommender.algorithm(), strategy, n, seed};
    const ConditionScores scores =
        evaluate_condition(split, recommender, stats, condition, ndcg_k);
    double loss;
    if (definition == MinimizationDefinition::global) {
      std::vector<double> cond_vals, full_vals;
      for (const auto& [user, eval] : scores.per_user) {
        cond_vals.push_back(metric == QualityMetric::rmse ? eval.rmse : eval.ndcg);
        const UserEval& base = full.per_user.at(user);
        full_vals.push_back(metric == QualityMetric::rmse ? base.rmse : base.ndcg);
      }
      const double cond_mean = macro_average(cond_vals);
      const double full_mean = macro_average(full_vals);
      loss = metric == QualityMetric::rmse ? cond_mean - full_mean : full_mean - cond_mean;
    } else {
      loss = -std::numeric_limits<double>::infinity();
      for (const auto& [user, eval] : scores.per_user) {
        const double l = user_loss(eval, full.per_user.at(user), metric);
        loss = std::max(loss, l);
        if (l <= lambda && !decision.per_user_k[user])
          decision.per_user_k[user] = n;
      }
    }
    decision.loss_curve[n] = loss;
    decision.feasibility_curve[n] = lambda - loss;
    if (loss <= lambda && !decision.k_star) decision.k_star = n;
  }
  return decision;
}

}  // namespace detail

// Definition 1: smallest budget whose average quality loss against the
// Full baseline stays within lambda.
inline MinimizationDecision minimize_global(const ExperimentSplit& split,
                                            const Recommender& recommender,
                                            const SystemStats& stats, Strategy strategy,
                                            double lambda, QualityMetric metric,
                                            const std::vector<std::size_t>& budget_grid,
                                            std::uint64_t seed, std::size_t ndcg_k) {
  return detail::minimize_impl(split, recommender, stats, strategy, lambda, metric,
                               budget_grid, seed, ndcg_k,
                               MinimizationDefinition::global);
}

// Definition 2: smallest budget where every user's quality loss stays
// within lambda.
inline MinimizationDecision minimize_per_user(const ExperimentSplit& split,
                                              const Recommender& recommender,
                                              const SystemStats& stats, Strategy strategy,
                                              double lambda, QualityMetric metric,
                                              const std::vector<std::size_t>& budget_grid,
                                              std::uint64_t seed, std::size_t ndcg_k) {
  return detail::minimize_impl(split, recommender, stats, strategy, lambda, metric,
                               budget_grid, seed, ndcg_k,
                               MinimizationDefinition::per_user);
}

}  // namespace minrec
