#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "minrec/experiment.hpp"
#include "minrec/identifiability.hpp"

namespace minrec {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kDecisionSchemaVersion = 1;
inline constexpr int kAnalysisSchemaVersion = 1;

namespace io {

// Shortest round-trip decimal representation; reloading gives the same bits.
inline std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

inline std::string fmt3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// CSV file with `# `-prefixed header comments (schema id + resolved
// config); the data body is RFC 4180.
class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::string& schema,
          const std::vector<std::string>& config_lines) {
    out_.open(path);
    if (!out_) throw DataError("cannot write " + path.string());
    out_ << "# schema: " << schema << " v" << kReportSchemaVersion << "\n";
    for (const auto& line : config_lines)
      if (!line.empty()) out_ << "# " << line << "\n";
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_escape(fields[i]);
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline void write_text(const std::filesystem::path& path, const std::string& body,
                       const std::vector<std::string>& config_lines = {}) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& line : config_lines)
    if (!line.empty()) out << "# " << line << "\n";
  if (!config_lines.empty()) out << "\n";
  out << body;
}

}  // namespace io

// ---------------------------------------------------------------------------
// `run` outputs
// ---------------------------------------------------------------------------

// One row per user per condition, including the implicit full baseline
// (strategy "full", empty n).
inline void write_report_csv(const std::filesystem::path& path,
                             const ExperimentResult& result,
                             const std::vector<std::string>& config_lines) {
  io::CsvFile csv(path, "report", config_lines);
  csv.row({"algorithm", "strategy", "n", "user_id", "selected", "pool", "rmse",
           "ndcg", "delta_rmse_vs_full", "delta_ndcg_vs_full"});
  for (const AlgorithmRun& run : result.runs) {
    const std::string algorithm = to_string(run.algorithm);
    for (const auto& [user, eval] : run.full_scores.per_user)
      csv.row({algorithm, "full", "", user, std::to_string(eval.selected_count),
               std::to_string(eval.pool_size), io::fmt(eval.rmse), io::fmt(eval.ndcg),
               io::fmt(0.0), io::fmt(0.0)});
    for (const auto& [key, report] : run.reports) {
      for (const auto& [user, row] : report.per_user)
        csv.row({algorithm, to_string(key.first), std::to_string(key.second), user,
                 std::to_string(row.selected_count), std::to_string(row.pool_size),
                 io::fmt(row.rmse), io::fmt(row.ndcg), io::fmt(row.delta_rmse),
                 io::fmt(row.delta_ndcg)});
    }
  }
}

inline nlohmann::json report_to_json(const EvaluationReport& report) {
  nlohmann::json j;
  j["algorithm"] = to_string(report.condition.algorithm);
  j["strategy"] = to_string(report.condition.strategy);
  j["n"] = report.condition.n;
  j["seed"] = report.condition.seed;
  j["macro"] = {{"rmse", report.macro_rmse},
                {"ndcg", report.macro_ndcg},
                {"delta_rmse", report.macro_delta_rmse},
                {"delta_ndcg", report.macro_delta_ndcg}};
  auto sig = [](const Significance& s) {
    return nlohmann::json{{"p_value", s.p_value},
                          {"significant_after_bonferroni", s.significant},
                          {"num_comparisons", s.num_comparisons},
                          {"degenerate", s.degenerate}};
  };
  j["significance"] = {{"rmse", sig(report.rmse_significance)},
                       {"ndcg", sig(report.ndcg_significance)}};
  j["withheld_fraction"] = report.withheld_fraction;
  j["excluded_users"] = report.excluded_users;
  nlohmann::json per_user = nlohmann::json::object();
  for (const auto& [user, row] : report.per_user)
    per_user[user] = {{"rmse", row.rmse},
                      {"ndcg", row.ndcg},
                      {"delta_rmse_vs_full", row.delta_rmse},
                      {"delta_ndcg_vs_full", row.delta_ndcg},
                      {"selected", row.selected_count},
                      {"pool", row.pool_size}};
  j["per_user"] = std::move(per_user);
  return j;
}

inline void write_report_json(const std::filesystem::path& path,
                              const ExperimentResult& result,
                              const std::vector<std::string>& config_lines) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["config"] = config_lines;
  nlohmann::json runs = nlohmann::json::array();
  for (const AlgorithmRun& run : result.runs) {
    nlohmann::json r;
    r["algorithm"] = to_string(run.algorithm);
    nlohmann::json full = nlohmann::json::object();
    for (const auto& [user, eval] : run.full_scores.per_user)
      full[user] = {{"rmse", eval.rmse},
                    {"ndcg", eval.ndcg},
                    {"selected", eval.selected_count},
                    {"pool", eval.pool_size}};
    r["full_per_user"] = std::move(full);
    r["conditions"] = nlohmann::json::array();
    for (const auto& [_, report] : run.reports)
      r["conditions"].push_back(report_to_json(report));
    runs.push_back(std::move(r));
  }
  j["runs"] = std::move(runs);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Machine-readable summary (one row per metric x strategy x budget) and an
// aligned text table shaped like the usual results tables, with `*` marking
// significance after the Bonferroni correction.
inline void write_summary(const std::filesystem::path& csv_path,
                          const std::filesystem::path& txt_path,
                          const AlgorithmRun& run, const ExperimentConfig& config,
                          const std::vector<std::string>& config_lines) {
  io::CsvFile csv(csv_path, "summary", config_lines);
  csv.row({"metric", "strategy", "n", "value", "delta_vs_full", "p_value",
           "significant_after_bonferroni", "degenerate", "num_comparisons"});

  std::vector<double> full_rmse, full_ndcg;
  for (const auto& [_, eval] : run.full_scores.per_user) {
    full_rmse.push_back(eval.rmse);
    full_ndcg.push_back(eval.ndcg);
  }
  const double full_rmse_macro = macro_average(full_rmse);
  const double full_ndcg_macro = macro_average(full_ndcg);

  for (const char* metric : {"rmse", "ndcg"}) {
    const bool is_rmse = std::string(metric) == "rmse";
    for (Strategy strategy : config.strategies) {
      for (std::size_t n : config.budgets) {
        const EvaluationReport& report = run.reports.at({strategy, n});
        const Significance& sig =
            is_rmse ? report.rmse_significance : report.ndcg_significance;
        csv.row({metric, to_string(strategy), std::to_string(n),
                 io::fmt(is_rmse ? report.macro_rmse : report.macro_ndcg),
                 io::fmt(is_rmse ? report.macro_delta_rmse : report.macro_delta_ndcg),
                 io::fmt(sig.p_value), sig.significant ? "true" : "false",
                 sig.degenerate ? "true" : "false",
                 std::to_string(sig.num_comparisons)});
      }
    }
    csv.row({metric, "full", "", io::fmt(is_rmse ? full_rmse_macro : full_ndcg_macro),
             io::fmt(0.0), "", "", "", ""});
  }

  std::ostringstream txt;
  std::size_t name_width = 12;
  for (Strategy s : config.strategies)
    name_width = std::max(name_width, to_string(s).size() + 2);
  txt << to_string(run.algorithm) << " minimization summary (macro-averaged; "
      << "* = significant vs full, two-tailed paired t-test, p < "
      << io::fmt(config.alpha) << " with Bonferroni correction)\n";
  for (const std::string& metric :
       {std::string("RMSE"), "NDCG@" + std::to_string(config.ndcg_k)}) {
    const bool is_rmse = metric == "RMSE";
    txt << '\n' << metric << '\n';
    txt << std::left << std::setw(static_cast<int>(name_width)) << "strategy";
    for (std::size_t n : config.budgets)
      txt << std::right << std::setw(10) << ("n=" + std::to_string(n));
    txt << std::right << std::setw(10) << "full" << '\n';
    for (Strategy strategy : config.strategies) {
      txt << std::left << std::setw(static_cast<int>(name_width)) << to_string(strategy);
      for (std::size_t n : config.budgets) {
        const EvaluationReport& report = run.reports.at({strategy, n});
        const Significance& sig =
            is_rmse ? report.rmse_significance : report.ndcg_significance;
        std::string cell = io::fmt3(is_rmse ? report.macro_rmse : report.macro_ndcg);
        if (sig.significant) cell += '*';
        txt << std::right << std::setw(10) << cell;
      }
      txt << std::right << std::setw(10)
          << io::fmt3(is_rmse ? full_rmse_macro : full_ndcg_macro) << '\n';
    }
  }
  io::write_text(txt_path, txt.str(), config_lines);
}

inline void write_withheld_csv(const std::filesystem::path& path,
                               const ExperimentResult& result,
                               const std::vector<std::string>& config_lines) {
  io::CsvFile csv(path, "withheld", config_lines);
  csv.row({"strategy", "n", "mean_withheld_fraction"});
  for (const auto& [key, fraction] : result.withheld)
    csv.row({to_string(key.first), std::to_string(key.second), io::fmt(fraction)});
}

inline void write_selections_csv(const std::filesystem::path& path,
                                 const ExperimentResult& result,
                                 const std::vector<std::string>& config_lines) {
  io::CsvFile csv(path, "selections", config_lines);
  csv.row({"strategy", "n", "user_id", "item_id"});
  for (const auto& [key, selections] : result.selections)
    for (const auto& [user, minimized] : selections)
      for (const auto& [item, _] : minimized.selected)
        csv.row({to_string(key.first), std::to_string(key.second), user, item});
}

// Per-user curves for the two figure styles: each condition column sorted
// independently ("sorted"), and rows aligned by user and ordered by the
// full-baseline value ("by_full"). Both files contain the same multiset of
// values per column.
inline void write_figure_csvs(const std::filesystem::path& dir,
                              const AlgorithmRun& run, const ExperimentConfig& config,
                              const std::vector<std::string>& config_lines) {
  for (const char* metric : {"rmse", "ndcg"}) {
    const bool is_rmse = std::string(metric) == "rmse";
    auto full_value = [&](const UserId& u) {
      const UserEval& e = run.full_scores.per_user.at(u);
      return is_rmse ? e.rmse : e.ndcg;
    };
    for (Strategy strategy : config.strategies) {
      std::vector<UserId> users;
      for (const auto& [user, _] : run.full_scores.per_user) users.push_back(user);

      const std::string base = std::string(metric) + "_" + to_string(run.algorithm) +
                               "_" + to_string(strategy) + ".csv";
      {
        io::CsvFile csv(dir / ("fig_sorted_" + base), "figure_sorted", config_lines);
        std::vector<std::string> header{"rank", "full"};
        for (std::size_t n : config.budgets) header.push_back("n=" + std::to_string(n));
        csv.row(header);
        std::vector<std::vector<double>> columns;
        {
          std::vector<double> col;
          for (const UserId& u : users) col.push_back(full_value(u));
          std::sort(col.begin(), col.end());
          columns.push_back(std::move(col));
        }
        for (std::size_t n : config.budgets) {
          const EvaluationReport& report = run.reports.at({strategy, n});
          std::vector<double> col;
          for (const UserId& u : users) {
            const auto& row = report.per_user.at(u);
            col.push_back(is_rmse ? row.rmse : row.ndcg);
          }
          std::sort(col.begin(), col.end());
          columns.push_back(std::move(col));
        }
        for (std::size_t r = 0; r < users.size(); ++r) {
          std::vector<std::string> row{std::to_string(r + 1)};
          for (const auto& col : columns) row.push_back(io::fmt(col[r]));
          csv.row(row);
        }
      }
      {
        io::CsvFile csv(dir / ("fig_by_full_" + base), "figure_by_full", config_lines);
        std::vector<std::string> header{"user_id", "full"};
        for (std::size_t n : config.budgets) header.push_back("n=" + std::to_string(n));
        csv.row(header);
        std::sort(users.begin(), users.end(), [&](const UserId& a, const UserId& b) {
          const double fa = full_value(a), fb = full_value(b);
          if (fa != fb) return fa < fb;
          return a < b;
        });
        for (const UserId& u : users) {
          std::vector<std::string> row{u, io::fmt(full_value(u))};
          for (std::size_t n : config.budgets) {
            const auto& r = run.reports.at({strategy, n}).per_user.at(u);
            row.push_back(io::fmt(is_rmse ? r.rmse : r.ndcg));
          }
          csv.row(row);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// `minimize` outputs
// ---------------------------------------------------------------------------

inline nlohmann::json decision_to_json(const MinimizationDecision& decision,
                                       Algorithm algorithm, Strategy strategy,
                                       const std::vector<std::string>& config_lines) {
  nlohmann::json j;
  j["schema_version"] = kDecisionSchemaVersion;
  j["config"] = config_lines;
  j["definition"] = to_string(decision.definition);
  j["algorithm"] = to_string(algorithm);
  j["strategy"] = to_string(strategy);
  j["metric"] = to_string(decision.metric);
  j["lambda"] = decision.lambda;
  if (decision.k_star)
    j["k_star"] = *decision.k_star;
  else
    j["k_star"] = "infeasible";
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [n, slack] : decision.feasibility_curve)
    curve.push_back({{"n", n},
                     {"loss", decision.loss_curve.at(n)},
                     {"slack", slack},
                     {"feasible", slack >= 0.0}});
  j["feasibility_curve"] = std::move(curve);
  if (!decision.per_user_k.empty()) {
    nlohmann::json per_user = nlohmann::json::object();
    for (const auto& [user, k] : decision.per_user_k) {
      if (k)
        per_user[user] = *k;
      else
        per_user[user] = "infeasible";
    }
    j["per_user_k"] = std::move(per_user);
  }
  return j;
}

inline void write_decision(const std::filesystem::path& dir,
                           const MinimizationDecision& decision, Algorithm algorithm,
                           Strategy strategy,
                           const std::vector<std::string>& config_lines) {
  const std::string base = "decision_" + to_string(decision.definition) + "_" +
                           to_string(algorithm) + "_" + to_string(strategy);
  {
    std::ofstream out(dir / (base + ".json"));
    if (!out) throw DataError("cannot write decision file");
    out << decision_to_json(decision, algorithm, strategy, config_lines).dump(2) << '\n';
  }
  io::CsvFile csv(dir / (base + ".csv"), "decision_curve", config_lines);
  csv.row({"n", "loss", "slack", "feasible"});
  for (const auto& [n, slack] : decision.feasibility_curve)
    csv.row({std::to_string(n), io::fmt(decision.loss_curve.at(n)), io::fmt(slack),
             slack >= 0.0 ? "true" : "false"});
}

// ---------------------------------------------------------------------------
// `analyze` outputs
// ---------------------------------------------------------------------------

inline void write_characteristics_csv(const std::filesystem::path& path,
                                      const std::map<UserId, UserCharacteristics>& rows,
                                      const std::vector<std::string>& config_lines) {
  io::CsvFile csv(path, "characteristics", config_lines);
  csv.row({"user_id", "num_ratings", "avg_rating", "avg_item_popularity",
           "genre_diversity", "genre_available", "avg_similarity_all",
           "avg_similarity_top30"});
  for (const auto& [user, c] : rows)
    csv.row({user, std::to_string(c.num_ratings), io::fmt(c.avg_rating),
             io::fmt(c.avg_item_popularity),
             c.genre_available ? std::to_string(c.genre_diversity) : "unavailable",
             c.genre_available ? "true" : "false", io::fmt(c.avg_similarity_all),
             io::fmt(c.avg_similarity_top30)});
}

inline void write_identifiability_csv(
    const std::filesystem::path& csv_path, const std::filesystem::path& txt_path,
    const std::map<std::pair<std::string, std::size_t>, IdentifiabilityCell>& table,
    const std::vector<std::string>& config_lines) {
  io::CsvFile csv(csv_path, "identifiability", config_lines);
  csv.row({"strategy", "n", "mean_min_subset", "identified_exact", "capped",
           "not_identifiable", "cap"});
  std::map<std::string, std::map<std::size_t, const IdentifiabilityCell*>> by_strategy;
  for (const auto& [key, cell] : table) {
    csv.row({key.first, std::to_string(key.second),
             cell.mean_min_subset ? io::fmt(*cell.mean_min_subset) : "",
             std::to_string(cell.identified), std::to_string(cell.capped),
             std::to_string(cell.not_identifiable), std::to_string(cell.cap)});
    by_strategy[key.first][key.second] = &cell;
  }

  // table-shaped variant: one row per strategy, one column per budget
  {
    std::filesystem::path wide_path = csv_path;
    wide_path.replace_filename(csv_path.stem().string() + "_table.csv");
    io::CsvFile wide(wide_path, "identifiability_table", config_lines);
    std::vector<std::size_t> budgets;
    if (!by_strategy.empty())
      for (const auto& [n, _] : by_strategy.begin()->second) budgets.push_back(n);
    std::vector<std::string> header{"strategy"};
    for (std::size_t n : budgets) header.push_back("n=" + std::to_string(n));
    for (std::size_t n : budgets) {
      header.push_back("capped_n=" + std::to_string(n));
      header.push_back("not_identifiable_n=" + std::to_string(n));
    }
    wide.row(header);
    for (const auto& [name, cells] : by_strategy) {
      std::vector<std::string> row{name};
      for (std::size_t n : budgets) {
        const auto it = cells.find(n);
        row.push_back(it != cells.end() && it->second->mean_min_subset
                          ? io::fmt(*it->second->mean_min_subset)
                          : "");
      }
      for (std::size_t n : budgets) {
        const auto it = cells.find(n);
        row.push_back(it != cells.end() ? std::to_string(it->second->capped) : "");
        row.push_back(it != cells.end() ? std::to_string(it->second->not_identifiable)
                                        : "");
      }
      wide.row(row);
    }
  }

  std::ostringstream txt;
  txt << "mean minimum identifying subset size (exactly identified users only)\n\n";
  std::vector<std::size_t> budgets;
  if (!by_strategy.empty())
    for (const auto& [n, _] : by_strategy.begin()->second) budgets.push_back(n);
  std::size_t name_width = 12;
  for (const auto& [name, _] : by_strategy)
    name_width = std::max(name_width, name.size() + 2);
  txt << std::left << std::setw(static_cast<int>(name_width)) << "strategy";
  for (std::size_t n : budgets)
    txt << std::right << std::setw(10) << ("n=" + std::to_string(n));
  txt << '\n';
  for (const auto& [name, cells] : by_strategy) {
    txt << std::left << std::setw(static_cast<int>(name_width)) << name;
    for (std::size_t n : budgets) {
      const IdentifiabilityCell* cell = cells.at(n);
      txt << std::right << std::setw(10)
          << (cell->mean_min_subset ? io::fmt3(*cell->mean_min_subset) : "-");
    }
    txt << '\n';
  }
  io::write_text(txt_path, txt.str(), config_lines);
}

}  // namespace minrec
