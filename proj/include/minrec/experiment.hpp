#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "minrec/analysis.hpp"
#include "minrec/core.hpp"
#include "minrec/dataset.hpp"
#include "minrec/minimizer.hpp"
#include "minrec/recommender.hpp"
#include "minrec/strategies.hpp"
#include "minrec/synth.hpp"

namespace minrec {

// Resolved experiment configuration. Defaults follow the usual protocol for
// this kind of study: >= 45 ratings per user, 70/30 user and 70/30 rating
// splits, budgets {1,3,7,15,100}, kNN with k=30, 30-factor SVD, NDCG@10,
// alpha 0.01.
struct ExperimentConfig {
  std::string data_path;
  DataFormat format{DataFormat::movielens_csv};
  std::string genres_path;  // optional
  RatingScale scale{0.5, 5.0, 0.5};
  std::size_t min_profile_size{45};
  std::size_t user_cap{0};  // 0 = keep all users
  double system_fraction{0.7};
  double candidate_fraction{0.7};
  std::vector<std::size_t> budgets{1, 3, 7, 15, 100};
  std::vector<Algorithm> algorithms{Algorithm::knn, Algorithm::svd};
  std::vector<Strategy> strategies{Strategy::random,
                                   Strategy::most_recent,
                                   Strategy::most_favorite,
                                   Strategy::least_favorite,
                                   Strategy::most_rated,
                                   Strategy::most_characteristic,
                                   Strategy::highest_variance};
  KnnConfig knn;
  SvdConfig svd;
  std::size_t ndcg_k{10};
  double alpha{0.01};
  double lambda{0.02};
  QualityMetric decision_metric{QualityMetric::rmse};
  std::uint64_t seed{0};
  std::size_t jobs{1};
  std::string out_dir;
};

using StrategyBudget = std::pair<Strategy, std::size_t>;

struct AlgorithmRun {
  Algorithm algorithm{};
  ConditionScores full_scores;
  std::map<StrategyBudget, EvaluationReport> reports;
};

struct ExperimentResult {
  ExperimentSplit split;
  SystemStats stats;
  std::map<StrategyBudget, std::map<UserId, MinimizedProfile>> selections;
  std::vector<AlgorithmRun> runs;
  std::map<StrategyBudget, double> withheld;  // mean withheld fraction per cell
};

// Loads, validates, filters, and optionally caps the configured dataset.
inline RatingsDataset prepare_dataset(const ExperimentConfig& config) {
  RatingsDataset ds = load_ratings(config.data_path, config.format, config.scale);
  if (!config.genres_path.empty()) ds = with_genres(ds, load_genres(config.genres_path));
  ds = filter_min_profile(ds, config.min_profile_size);
  return cap_users(ds, config.user_cap, config.seed);
}

// Runs the full (algorithm x strategy x budget) grid on one split.
// Selections are computed once per (strategy, budget) and shared across
// algorithms, mirroring a protocol where the strategy picks the data and
// each algorithm consumes the same minimized profiles. With jobs > 1 the
// per-condition evaluations run on worker threads; results are identical
// to a sequential run.
inline ExperimentResult run_experiment(const RatingsDataset& ds,
                                       const ExperimentConfig& config) {
  if (config.budgets.empty()) throw ConfigError("no budgets configured");
  if (config.strategies.empty()) throw ConfigError("no strategies configured");
  if (config.algorithms.empty()) throw ConfigError("no algorithms configured");
  for (Strategy s : config.strategies)
    if (s == Strategy::full)
      throw ConfigError("the full baseline is implicit; do not list it as a strategy");

  ExperimentResult result;
  result.split = make_split(ds, config.system_fraction, config.candidate_fraction,
                            config.seed);
  result.stats = SystemStats::from_profiles(result.split.system_users);

  for (Strategy strategy : config.strategies) {
    for (std::size_t n : config.budgets) {
      auto selections =
          select_all(result.split, result.stats, strategy, n, config.seed);
      result.withheld[{strategy, n}] =
          withheld_fraction(result.split, {Algorithm::knn, strategy, n, config.seed});
      result.selections.emplace(StrategyBudget{strategy, n}, std::move(selections));
    }
  }

  std::vector<std::unique_ptr<Recommender>> recommenders;
  for (Algorithm algorithm : config.algorithms)
    recommenders.push_back(make_recommender(algorithm, result.split.system_users,
                                            config.scale, config.knn,
                                            [&] {
                                              SvdConfig c = config.svd;
                                              c.seed = config.seed;
                                              return c;
                                            }()));

  struct Job {
    std::size_t run_index;
    StrategyBudget key;
  };
  std::vector<Job> jobs;
  result.runs.resize(config.algorithms.size());
  for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
    result.runs[a].algorithm = config.algorithms[a];
    const Condition full_condition{config.algorithms[a], Strategy::full, 0, config.seed};
    result.runs[a].full_scores = evaluate_condition(
        result.split, *recommenders[a], result.stats, full_condition, config.ndcg_k);
    for (Strategy strategy : config.strategies)
      for (std::size_t n : config.budgets) jobs.push_back({a, {strategy, n}});
  }

  const std::size_t family = config.strategies.size() * config.budgets.size();
  std::vector<std::pair<Job, EvaluationReport>> outputs(jobs.size());
  const auto worker_count = std::max<std::size_t>(1, config.jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) {
      const Job& job = jobs[j];
      const Condition condition{config.algorithms[job.run_index], job.key.first,
                                job.key.second, config.seed};
      ConditionScores scores =
          evaluate_selected(result.split, *recommenders[job.run_index], condition,
                            result.selections.at(job.key), config.ndcg_k);
      outputs[j] = {job, build_report(scores, result.runs[job.run_index].full_scores,
                                      config.alpha, family)};
    }
  };
  if (worker_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < worker_count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& [job, report] : outputs)
    result.runs[job.run_index].reports.emplace(job.key, std::move(report));
  return result;
}

inline ExperimentResult run_pipeline(const ExperimentConfig& config) {
  const RatingsDataset ds = prepare_dataset(config);
  return run_experiment(ds, config);
}

}  // namespace minrec
