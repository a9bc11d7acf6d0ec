// minrec: performance-based data minimization experiments for recommenders.
//
// Subcommands:
//   synth     generate a synthetic ratings + genre dataset
//   run       train recommenders and evaluate minimization strategies
//   minimize  search the smallest feasible budget for a quality threshold
//   analyze   user characteristics, OLS regressions, identifiability tables
//   identify  minimum identifying subsets over full profiles
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "minrec/experiment.hpp"
#include "minrec/identifiability.hpp"
#include "minrec/report_io.hpp"
#include "minrec/synth.hpp"

namespace fs = std::filesystem;
using namespace minrec;

namespace {

// CLI-facing mirror of ExperimentConfig; strings here, enums after validation.
struct RunOptions {
  std::string data;
  std::string format{"movielens_csv"};
  std::string genres;
  double scale_min{0.5}, scale_max{5.0}, scale_step{0.5};
  std::size_t min_profile{45};
  std::size_t user_cap{0};
  double system_fraction{0.7};
  double candidate_fraction{0.7};
  std::vector<std::size_t> budgets{1, 3, 7, 15, 100};
  std::vector<std::string> algorithms{"knn", "svd"};
  std::vector<std::string> strategies{"random", "most_recent", "most_favorite",
                                      "least_favorite", "most_rated",
                                      "most_characteristic", "highest_variance"};
  int knn_k{30};
  std::size_t min_overlap{1};
  int factors{30};
  int epochs{20};
  double learning_rate{0.005};
  double regularization{0.02};
  double init_std{0.1};
  std::size_t ndcg_k{10};
  double alpha{0.01};
  double lambda{0.02};
  std::string metric{"rmse"};
  std::uint64_t seed{0};
  std::size_t jobs{1};
  std::string out;
};

void register_run_options(CLI::App* cmd, RunOptions& opt, bool for_cli) {
  auto* data = cmd->add_option("--data", opt.data, "Ratings file");
  if (for_cli) data->required();
  cmd->add_option("--format", opt.format, "Ratings format: movielens_csv, tsv, jsonl")
      ->capture_default_str();
  cmd->add_option("--genres", opt.genres, "Optional MovieLens-style genre file");
  cmd->add_option("--scale-min", opt.scale_min, "Rating scale minimum")
      ->capture_default_str();
  cmd->add_option("--scale-max", opt.scale_max, "Rating scale maximum")
      ->capture_default_str();
  cmd->add_option("--scale-step", opt.scale_step, "Rating scale step")
      ->capture_default_str();
  cmd->add_option("--min-profile", opt.min_profile,
                  "Keep users with at least this many ratings")
      ->capture_default_str();
  cmd->add_option("--user-cap", opt.user_cap,
                  "Subsample to at most this many users (0 = all)")
      ->capture_default_str();
  cmd->add_option("--system-fraction", opt.system_fraction,
                  "Fraction of users assigned to the system data")
      ->capture_default_str();
  cmd->add_option("--candidate-fraction", opt.candidate_fraction,
                  "Fraction of each minimizing user's ratings in the candidate pool")
      ->capture_default_str();
  cmd->add_option("--budgets", opt.budgets, "Minimization budgets n")
      ->capture_default_str();
  cmd->add_option("--algorithms", opt.algorithms,
                  "Algorithms: knn, svd, svd_unbiased")
      ->capture_default_str();
  cmd->add_option("--strategies", opt.strategies,
                  "Minimization strategies (the full baseline is implicit)")
      ->capture_default_str();
  cmd->add_option("--knn-k", opt.knn_k, "kNN neighborhood size")->capture_default_str();
  cmd->add_option("--min-overlap", opt.min_overlap,
                  "Shared items required for a nonzero similarity")
      ->capture_default_str();
  cmd->add_option("--factors", opt.factors, "SVD latent factors")->capture_default_str();
  cmd->add_option("--epochs", opt.epochs, "SVD SGD epochs")->capture_default_str();
  cmd->add_option("--learning-rate", opt.learning_rate, "SVD learning rate")
      ->capture_default_str();
  cmd->add_option("--regularization", opt.regularization, "SVD L2 weight")
      ->capture_default_str();
  cmd->add_option("--init-std", opt.init_std, "SVD factor init stddev")
      ->capture_default_str();
  cmd->add_option("--ndcg-k", opt.ndcg_k, "NDCG cutoff")->capture_default_str();
  cmd->add_option("--alpha", opt.alpha, "Significance level before correction")
      ->capture_default_str();
  cmd->add_option("--lambda", opt.lambda, "Quality-loss threshold for minimize")
      ->capture_default_str();
  cmd->add_option("--metric", opt.metric, "Decision metric: rmse or ndcg")
      ->capture_default_str();
  cmd->add_option("--seed", opt.seed, "Master seed")->capture_default_str();
  cmd->add_option("--jobs", opt.jobs, "Worker threads for independent conditions")
      ->capture_default_str();
  auto* out = cmd->add_option("--out", opt.out, "Output directory")
                  ->envname("MINREC_OUT");
  if (for_cli) out->required();
}

ExperimentConfig to_config(const RunOptions& opt) {
  ExperimentConfig config;
  config.data_path = opt.data;
  config.format = parse_format(opt.format);
  config.genres_path = opt.genres;
  config.scale = {opt.scale_min, opt.scale_max, opt.scale_step};
  config.min_profile_size = opt.min_profile;
  config.user_cap = opt.user_cap;
  config.system_fraction = opt.system_fraction;
  config.candidate_fraction = opt.candidate_fraction;
  config.budgets = opt.budgets;
  config.algorithms.clear();
  for (const auto& a : opt.algorithms) config.algorithms.push_back(parse_algorithm(a));
  config.strategies.clear();
  for (const auto& s : opt.strategies) config.strategies.push_back(parse_strategy(s));
  config.knn = {opt.knn_k, opt.min_overlap};
  config.svd.factors = opt.factors;
  config.svd.epochs = opt.epochs;
  config.svd.learning_rate = opt.learning_rate;
  config.svd.regularization = opt.regularization;
  config.svd.init_std = opt.init_std;
  config.svd.seed = opt.seed;
  config.ndcg_k = opt.ndcg_k;
  config.alpha = opt.alpha;
  config.lambda = opt.lambda;
  config.decision_metric = parse_metric(opt.metric);
  config.seed = opt.seed;
  config.jobs = opt.jobs;
  config.out_dir = opt.out;
  return config;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::vector<std::string> s;
  for (auto n : v) s.push_back(std::to_string(n));
  return join(s);
}

// Resolved configuration as key=value lines under a per-subcommand section,
// readable back via `minrec --config <file> <subcommand>`.
std::vector<std::string> resolved_config_lines(const RunOptions& opt,
                                               const std::string& section) {
  std::vector<std::string> lines;
  lines.push_back("[" + section + "]");
  lines.push_back("data=" + opt.data);
  lines.push_back("format=" + opt.format);
  if (!opt.genres.empty()) lines.push_back("genres=" + opt.genres);
  lines.push_back("scale-min=" + io::fmt(opt.scale_min));
  lines.push_back("scale-max=" + io::fmt(opt.scale_max));
  lines.push_back("scale-step=" + io::fmt(opt.scale_step));
  lines.push_back("min-profile=" + std::to_string(opt.min_profile));
  lines.push_back("user-cap=" + std::to_string(opt.user_cap));
  lines.push_back("system-fraction=" + io::fmt(opt.system_fraction));
  lines.push_back("candidate-fraction=" + io::fmt(opt.candidate_fraction));
  lines.push_back("budgets=" + join_sizes(opt.budgets));
  lines.push_back("algorithms=" + join(opt.algorithms));
  lines.push_back("strategies=" + join(opt.strategies));
  lines.push_back("knn-k=" + std::to_string(opt.knn_k));
  lines.push_back("min-overlap=" + std::to_string(opt.min_overlap));
  lines.push_back("factors=" + std::to_string(opt.factors));
  lines.push_back("epochs=" + std::to_string(opt.epochs));
  lines.push_back("learning-rate=" + io::fmt(opt.learning_rate));
  lines.push_back("regularization=" + io::fmt(opt.regularization));
  lines.push_back("init-std=" + io::fmt(opt.init_std));
  lines.push_back("ndcg-k=" + std::to_string(opt.ndcg_k));
  lines.push_back("alpha=" + io::fmt(opt.alpha));
  lines.push_back("lambda=" + io::fmt(opt.lambda));
  lines.push_back("metric=" + opt.metric);
  lines.push_back("seed=" + std::to_string(opt.seed));
  return lines;
}

void write_resolved_config(const fs::path& dir, const std::vector<std::string>& lines) {
  std::ofstream out(dir / "config.resolved.cfg");
  if (!out) throw DataError("cannot write " + (dir / "config.resolved.cfg").string());
  for (const auto& line : lines) out << line << '\n';
}

int cmd_run(const RunOptions& opt) {
  const ExperimentConfig config = to_config(opt);
  const std::vector<std::string> header = resolved_config_lines(opt, "run");
  fs::create_directories(config.out_dir);
  const fs::path out(config.out_dir);

  const RatingsDataset ds = prepare_dataset(config);
  std::cerr << "loaded " << ds.num_users() << " users, " << ds.num_ratings()
            << " ratings";
  if (ds.duplicate_count() > 0)
    std::cerr << " (" << ds.duplicate_count() << " duplicates resolved)";
  if (ds.dropped_genre_count() > 0)
    std::cerr << " (" << ds.dropped_genre_count() << " genre rows dropped)";
  std::cerr << '\n';

  const ExperimentResult result = run_experiment(ds, config);

  write_resolved_config(out, header);
  write_report_csv(out / "report.csv", result, header);
  write_report_json(out / "report.json", result, header);
  write_withheld_csv(out / "withheld.csv", result, header);
  write_selections_csv(out / "selections.csv", result, header);
  for (const AlgorithmRun& run : result.runs) {
    const std::string name = to_string(run.algorithm);
    write_summary(out / ("summary_" + name + ".csv"), out / ("summary_" + name + ".txt"),
                  run, config, header);
    write_figure_csvs(out, run, config, header);
  }
  std::cerr << "wrote results for " << result.runs.size() << " algorithm(s) x "
            << config.strategies.size() << " strategies x " << config.budgets.size()
            << " budgets to " << config.out_dir << '\n';
  return 0;
}

int cmd_minimize(const RunOptions& opt, const std::string& definition) {
  const ExperimentConfig config = to_config(opt);
  const std::vector<std::string> header = resolved_config_lines(opt, "minimize");
  fs::create_directories(config.out_dir);
  const fs::path out(config.out_dir);

  const RatingsDataset ds = prepare_dataset(config);
  const ExperimentSplit split =
      make_split(ds, config.system_fraction, config.candidate_fraction, config.seed);
  const SystemStats stats = SystemStats::from_profiles(split.system_users);

  const bool both = definition == "both";
  std::vector<MinimizationDefinition> defs;
  if (both || definition == "global") defs.push_back(MinimizationDefinition::global);
  if (both || definition == "per_user") defs.push_back(MinimizationDefinition::per_user);
  if (defs.empty())
    throw ConfigError("unknown definition: " + definition +
                      " (expected global, per_user, or both)");

  io::CsvFile comparison(out / "comparison.csv", "decision_comparison", header);
  comparison.row({"algorithm", "strategy", "definition", "metric", "lambda", "k_star"});

  write_resolved_config(out, header);
  for (Algorithm algorithm : config.algorithms) {
    SvdConfig svd = config.svd;
    svd.seed = config.seed;
    const auto recommender =
        make_recommender(algorithm, split.system_users, config.scale, config.knn, svd);
    for (Strategy strategy : config.strategies) {
      for (MinimizationDefinition def : defs) {
        const MinimizationDecision decision =
            def == MinimizationDefinition::global
                ? minimize_global(split, *recommender, stats, strategy, config.lambda,
                                  config.decision_metric, config.budgets, config.seed,
                                  config.ndcg_k)
                : minimize_per_user(split, *recommender, stats, strategy, config.lambda,
                                    config.decision_metric, config.budgets, config.seed,
                                    config.ndcg_k);
        write_decision(out, decision, algorithm, strategy, header);
        comparison.row({to_string(algorithm), to_string(strategy), to_string(def),
                        to_string(decision.metric), io::fmt(decision.lambda),
                        decision.k_star ? std::to_string(*decision.k_star)
                                        : "infeasible"});
        std::cerr << to_string(algorithm) << "/" << to_string(strategy) << " "
                  << to_string(def) << ": k_star = "
                  << (decision.k_star ? std::to_string(*decision.k_star) : "infeasible")
                  << '\n';
      }
    }
  }
  return 0;
}

RunOptions load_run_options(const fs::path& run_dir) {
  const fs::path config_path = run_dir / "config.resolved.cfg";
  if (!fs::exists(config_path))
    throw DataError("missing " + config_path.string() +
                    "; expected a directory produced by `minrec run`");
  RunOptions opt;
  CLI::App shadow{"config loader"};
  shadow.set_config("--config", config_path.string())->required();
  CLI::App* run = shadow.add_subcommand("run", "");
  register_run_options(run, opt, false);
  std::vector<const char*> argv{"minrec", "run"};
  shadow.parse(static_cast<int>(argv.size()), argv.data());
  return opt;
}

// Per-user values parsed back from a run directory's report.csv.
struct ReportRows {
  // algorithm -> user -> metric value under the full strategy
  std::map<std::string, std::map<UserId, double>> full_rmse;
  // (algorithm, strategy, n) -> user -> delta rmse
  std::map<std::string, std::map<UserId, double>> delta_rmse;  // key: alg|strategy|n

  static std::string key(const std::string& algorithm, const std::string& strategy,
                         std::size_t n) {
    return algorithm + "|" + strategy + "|" + std::to_string(n);
  }
};

ReportRows load_report_rows(const fs::path& run_dir) {
  const fs::path path = run_dir / "report.csv";
  std::ifstream in(path);
  if (!in) throw DataError("missing " + path.string());
  ReportRows rows;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      saw_header = true;
      continue;
    }
    const auto fields = minrec::detail::split_csv_line(line);
    if (fields.size() < 10) throw DataError(path.string() + ": malformed row");
    const std::string& algorithm = fields[0];
    const std::string& strategy = fields[1];
    const UserId& user = fields[3];
    if (strategy == "full") {
      rows.full_rmse[algorithm][user] = std::stod(fields[6]);
    } else {
      const auto n = static_cast<std::size_t>(std::stoull(fields[2]));
      rows.delta_rmse[ReportRows::key(algorithm, strategy, n)][user] =
          std::stod(fields[8]);
    }
  }
  if (rows.full_rmse.empty()) throw DataError(path.string() + ": no full-strategy rows");
  return rows;
}

std::map<std::pair<std::string, std::size_t>, std::map<UserId, std::set<ItemId>>>
load_selections(const fs::path& run_dir) {
  const fs::path path = run_dir / "selections.csv";
  std::ifstream in(path);
  if (!in) throw DataError("missing " + path.string());
  std::map<std::pair<std::string, std::size_t>, std::map<UserId, std::set<ItemId>>> out;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      saw_header = true;
      continue;
    }
    const auto fields = minrec::detail::split_csv_line(line);
    if (fields.size() != 4) throw DataError(path.string() + ": malformed row");
    out[{fields[0], static_cast<std::size_t>(std::stoull(fields[1]))}][fields[2]]
        .insert(fields[3]);
  }
  if (out.empty()) throw DataError(path.string() + ": no selections");
  return out;
}

int cmd_analyze(const std::string& run_dir_arg, std::size_t cap,
                std::vector<std::size_t> delta_budgets) {
  const fs::path run_dir(run_dir_arg);
  const RunOptions opt = load_run_options(run_dir);
  const ExperimentConfig config = to_config(opt);
  const std::vector<std::string> header = resolved_config_lines(opt, "run");

  // deterministic splits let the analysis re-derive the exact experiment state
  const RatingsDataset ds = prepare_dataset(config);
  const ExperimentSplit split =
      make_split(ds, config.system_fraction, config.candidate_fraction, config.seed);
  const KnnModel knn(split.system_users, config.scale, config.knn);
  const GenreMap* genres = ds.has_genres() ? &ds.genres() : nullptr;

  std::map<UserId, UserCharacteristics> characteristics;
  for (const auto& [user, _] : split.minimizing_users)
    characteristics.emplace(user,
                            compute_characteristics(user, split, knn, genres));
  write_characteristics_csv(run_dir / "characteristics.csv", characteristics, header);

  const ReportRows rows = load_report_rows(run_dir);
  const std::vector<std::string> feature_names{
      "num_ratings",        "avg_rating",         "avg_item_popularity",
      "genre_diversity",    "avg_similarity_all", "avg_similarity_top30"};

  io::CsvFile regression(run_dir / "regression.csv", "regression", header);
  std::vector<std::string> reg_header{"algorithm", "strategy", "target",
                                      "n_observations", "r_squared", "intercept"};
  for (const auto& f : feature_names) reg_header.push_back("coef_" + f);
  reg_header.push_back("dropped_features");
  regression.row(reg_header);

  for (const auto& algorithm : opt.algorithms) {
    for (const auto& strategy : opt.strategies) {
      // scatter data behind the characteristic-vs-delta plots
      io::CsvFile scatter(
          run_dir / ("scatter_" + algorithm + "_" + strategy + ".csv"), "scatter",
          header);
      std::vector<std::string> scatter_header{"user_id"};
      for (const auto& f : feature_names) scatter_header.push_back(f);
      scatter_header.push_back("rmse_full");
      for (std::size_t n : delta_budgets)
        scatter_header.push_back("delta_rmse_n" + std::to_string(n));
      scatter.row(scatter_header);

      const auto& full = rows.full_rmse.at(algorithm);
      for (const auto& [user, c] : characteristics) {
        if (!full.count(user)) continue;
        std::vector<std::string> row{user,
                                     std::to_string(c.num_ratings),
                                     io::fmt(c.avg_rating),
                                     io::fmt(c.avg_item_popularity),
                                     std::to_string(c.genre_diversity),
                                     io::fmt(c.avg_similarity_all),
                                     io::fmt(c.avg_similarity_top30)};
        row.push_back(io::fmt(full.at(user)));
        for (std::size_t n : delta_budgets) {
          const auto it = rows.delta_rmse.find(ReportRows::key(algorithm, strategy, n));
          row.push_back(it != rows.delta_rmse.end() && it->second.count(user)
                            ? io::fmt(it->second.at(user))
                            : "");
        }
        scatter.row(row);
      }

      for (std::size_t n : delta_budgets) {
        const auto it = rows.delta_rmse.find(ReportRows::key(algorithm, strategy, n));
        if (it == rows.delta_rmse.end()) continue;  // budget not in the run
        std::vector<std::vector<double>> X;
        std::vector<double> y;
        for (const auto& [user, delta] : it->second) {
          const auto c = characteristics.find(user);
          if (c == characteristics.end()) continue;
          X.push_back({static_cast<double>(c->second.num_ratings),
                       c->second.avg_rating, c->second.avg_item_popularity,
                       static_cast<double>(c->second.genre_diversity),
                       c->second.avg_similarity_all, c->second.avg_similarity_top30});
          y.push_back(delta);
        }
        std::vector<std::string> row{algorithm, strategy, "delta_" + std::to_string(n)};
        try {
          const RegressionResult r = ols_regress(X, y, feature_names);
          row.push_back(std::to_string(r.n_observations));
          row.push_back(io::fmt(r.r_squared));
          row.push_back(io::fmt(r.intercept));
          for (const auto& f : feature_names) {
            const auto pos = std::find(r.features.begin(), r.features.end(), f);
            row.push_back(pos == r.features.end()
                              ? "dropped"
                              : io::fmt(r.coefficients[static_cast<std::size_t>(
                                    pos - r.features.begin())]));
          }
          std::string dropped;
          for (const auto& d : r.dropped) {
            if (!dropped.empty()) dropped += '|';
            dropped += d;
          }
          row.push_back(dropped);
        } catch (const DataError& e) {
          // degenerate design in one cell (tiny fixtures, collinear columns)
          row.push_back(std::to_string(y.size()));
          for (std::size_t i = 0; i < feature_names.size() + 2; ++i) row.push_back("");
          row.push_back(std::string("error: ") + e.what());
        }
        regression.row(row);
      }
    }
  }

  // identifiability of the minimized profiles, per (strategy, n) cell
  const auto selections = load_selections(run_dir);
  const auto table = identifiability_table(selections, cap);
  write_identifiability_csv(run_dir / "identifiability.csv",
                            run_dir / "identifiability.txt", table, header);

  // genre breadth of minimized profiles vs full profiles
  io::CsvFile breadth(run_dir / "genre_breadth.csv", "genre_breadth", header);
  breadth.row({"strategy", "n", "mean_breadth", "mean_full_breadth", "available"});
  double full_breadth = 0.0;
  if (genres) {
    for (const auto& [user, pools] : split.minimizing_users) {
      std::set<ItemId> items;
      for (const auto& [item, _] : pools.candidate) items.insert(item);
      for (const auto& [item, _] : pools.test) items.insert(item);
      full_breadth += static_cast<double>(genre_breadth(items, *genres));
    }
    full_breadth /= static_cast<double>(split.minimizing_users.size());
  }
  for (const auto& [key, profiles] : selections) {
    if (!genres) {
      breadth.row({key.first, std::to_string(key.second), "", "", "false"});
      continue;
    }
    double mean = 0.0;
    for (const auto& [user, items] : profiles)
      mean += static_cast<double>(genre_breadth(items, *genres));
    mean /= static_cast<double>(profiles.size());
    breadth.row({key.first, std::to_string(key.second), io::fmt(mean),
                 io::fmt(full_breadth), "true"});
  }

  std::cerr << "analysis written to " << run_dir << '\n';
  return 0;
}

int cmd_identify(const RunOptions& opt, std::size_t cap) {
  const ExperimentConfig config = to_config(opt);
  const std::vector<std::string> header = resolved_config_lines(opt, "identify");
  fs::create_directories(config.out_dir);
  const fs::path out(config.out_dir);

  const RatingsDataset ds = prepare_dataset(config);
  std::map<UserId, std::set<ItemId>> profiles;
  for (const auto& [user, profile] : ds.profiles()) {
    std::set<ItemId> items;
    for (const auto& [item, _] : profile) items.insert(item);
    profiles.emplace(user, std::move(items));
  }

  io::CsvFile csv(out / "identify.csv", "identify", header);
  csv.row({"user_id", "status", "min_subset_size", "exact", "cap"});
  double sum = 0.0;
  std::size_t identified = 0, capped = 0, hidden = 0;
  for (const auto& [user, items] : profiles) {
    std::vector<const std::set<ItemId>*> others;
    for (const auto& [other, other_items] : profiles)
      if (other != user) others.push_back(&other_items);
    const IdentifiabilityResult r = min_identifying_subset(user, items, others, cap);
    std::string status;
    switch (r.status) {
      case IdentifiabilityResult::Status::identified:
        status = "identified";
        sum += static_cast<double>(r.min_subset_size);
        ++identified;
        break;
      case IdentifiabilityResult::Status::capped:
        status = "capped";
        ++capped;
        break;
      case IdentifiabilityResult::Status::not_identifiable:
        status = "not_identifiable";
        ++hidden;
        break;
    }
    csv.row({user, status,
             r.status == IdentifiabilityResult::Status::not_identifiable
                 ? ""
                 : std::to_string(r.min_subset_size),
             r.exact ? "true" : "false", std::to_string(cap)});
  }
  std::cerr << "identified " << identified << " users exactly";
  if (identified > 0)
    std::cerr << " (mean subset size " << sum / static_cast<double>(identified) << ")";
  std::cerr << ", " << capped << " capped, " << hidden << " not identifiable\n";
  return 0;
}

int cmd_synth(const SynthConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const RatingsDataset ds = synthesize(cfg);
  save_ratings(ds, (fs::path(out_dir) / "ratings.csv").string(),
               DataFormat::movielens_csv);
  if (ds.has_genres())
    save_genres(ds, (fs::path(out_dir) / "movies.csv").string());
  std::cerr << "wrote " << ds.num_ratings() << " ratings for " << ds.num_users()
            << " users to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Performance-based data minimization experiments for recommender systems"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Read options from a key=value file with a [subcommand] section");

  RunOptions run_opt;
  CLI::App* run = app.add_subcommand("run", "Evaluate the strategy x budget grid");
  register_run_options(run, run_opt, true);

  RunOptions min_opt;
  std::string definition{"both"};
  CLI::App* minimize =
      app.add_subcommand("minimize", "Search the smallest feasible budget");
  register_run_options(minimize, min_opt, true);
  minimize->add_option("--definition", definition,
                       "Constraint definition: global, per_user, or both")
      ->capture_default_str();

  std::string analyze_dir;
  std::size_t analyze_cap = 5;
  std::vector<std::size_t> delta_budgets{3, 15};
  CLI::App* analyze =
      app.add_subcommand("analyze", "Characteristics, regressions, identifiability");
  analyze->add_option("--run", analyze_dir, "Directory produced by `minrec run`")
      ->required();
  analyze->add_option("--cap", analyze_cap, "Identifiability search cap")
      ->capture_default_str();
  analyze->add_option("--delta-budgets", delta_budgets,
                      "Budgets for the error-delta regressions")
      ->capture_default_str();

  RunOptions id_opt;
  std::size_t id_cap = 5;
  CLI::App* identify =
      app.add_subcommand("identify", "Minimum identifying subsets of full profiles");
  register_run_options(identify, id_opt, true);
  identify->add_option("--cap", id_cap, "Identifiability search cap")
      ->capture_default_str();

  SynthConfig synth_cfg;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--users", synth_cfg.users, "Number of users")->capture_default_str();
  synth->add_option("--items", synth_cfg.items, "Number of items")->capture_default_str();
  synth->add_option("--seed", synth_cfg.seed, "Generator seed")->capture_default_str();
  synth->add_option("--taste-factors", synth_cfg.taste_factors,
                    "Latent taste dimensions")
      ->capture_default_str();
  synth->add_option("--noise", synth_cfg.noise_std, "Rating noise stddev")
      ->capture_default_str();
  synth->add_option("--min-profile", synth_cfg.min_profile, "Smallest profile size")
      ->capture_default_str();
  synth->add_option("--mean-profile", synth_cfg.mean_profile, "Mean profile size")
      ->capture_default_str();
  synth->add_option("--zipf", synth_cfg.zipf_exponent, "Item popularity skew")
      ->capture_default_str();
  synth->add_flag("--quantize,!--no-quantize", synth_cfg.quantize,
                  "Snap ratings to the scale step")
      ->capture_default_str();
  synth->add_flag("--genres,!--no-genres", synth_cfg.with_genres,
                  "Emit a genre file")
      ->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")
      ->envname("MINREC_OUT")
      ->required();

  try {
    app.parse(argc, argv);
    if (*run) return cmd_run(run_opt);
    if (*minimize) return cmd_minimize(min_opt, definition);
    if (*analyze) return cmd_analyze(analyze_dir, analyze_cap, delta_budgets);
    if (*identify) return cmd_identify(id_opt, id_cap);
    if (*synth) return cmd_synth(synth_cfg, synth_out);
    throw ConfigError("no subcommand");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
}
