#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "minrec/core.hpp"
#include "minrec/dataset.hpp"
#include "minrec/knn.hpp"
#include "minrec/metrics.hpp"

namespace minrec {

namespace stats_detail {

// Regularized incomplete beta function I_x(a, b) by the continued fraction
// evaluated with the modified Lentz method. Converges to ~1e-14 for the
// (a, b) pairs a t-distribution needs.
inline double incomplete_beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * incomplete_beta_cf(a, b, x) / a;
  return 1.0 - front * incomplete_beta_cf(b, a, 1.0 - x) / b;
}

// Two-tailed p-value of Student's t with df degrees of freedom:
// p = I_{df/(df+t^2)}(df/2, 1/2).
inline double student_t_two_tailed(double t, double df) {
  const double x = df / (df + t * t);
  return incomplete_beta(df / 2.0, 0.5, x);
}

}  // namespace stats_detail

struct TTestResult {
  double t{};
  std::size_t df{};
  double p_value{};
  bool degenerate{false};  // zero variance of the paired differences
};

// Two-tailed paired t-test. Zero-variance differences are degenerate:
// p = 1 when all differences are zero, otherwise 0.
inline TTestResult paired_ttest(const std::vector<double>& a,
                                const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("paired_ttest: unequal lengths");
  if (a.size() < 2) throw ConfigError("paired_ttest: need at least 2 pairs");
  const auto n = static_cast<double>(a.size());
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= n;
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double var = ss / (n - 1.0);

  TTestResult result;
  result.df = a.size() - 1;
  if (var == 0.0) {
    result.degenerate = true;
    result.t = 0.0;
    result.p_value = mean == 0.0 ? 1.0 : 0.0;
    return result;
  }
  result.t = mean / std::sqrt(var / n);
  result.p_value = stats_detail::student_t_two_tailed(result.t, n - 1.0);
  return result;
}

// Family-wise correction: flag_i = (p_i < alpha / m) with m the number of
// comparisons in the family (all cells of one results table).
inline std::vector<bool> bonferroni(const std::vector<double>& p_values,
                                    double alpha) {
  if (p_values.empty()) throw ConfigError("bonferroni: empty family");
  const double threshold = alpha / static_cast<double>(p_values.size());
  std::vector<bool> flags;
  flags.reserve(p_values.size());
  for (double p : p_values) flags.push_back(p < threshold);
  return flags;
}

// Per-user features measured over the full profile, before minimization.
struct UserCharacteristics {
  std::size_t num_ratings{};
  double avg_rating{};
  double avg_item_popularity{};  // mean system rating count of profile items
  std::size_t genre_diversity{};
  bool genre_available{false};
  double avg_similarity_all{};    // mean MSD similarity to all system users
  double avg_similarity_top30{};  // mean over the 30 most similar system users
};

inline UserCharacteristics compute_characteristics(const UserId& user,
                                                   const ExperimentSplit& split,
                                                   const KnnModel& model,
                                                   const GenreMap* genres,
                                                   std::size_t top_m = 30) {
  auto it = split.minimizing_users.find(user);
  if (it == split.minimizing_users.end())
    throw DataError("user " + user + " is not a minimizing user");
  Profile full = it->second.candidate;
  full.insert(it->second.test.begin(), it->second.test.end());

  UserCharacteristics c;
  c.num_ratings = full.size();
  double rating_sum = 0.0, popularity_sum = 0.0;
  for (const auto& [item, r] : full) {
    rating_sum += r.value;
    popularity_sum += static_cast<double>(model.item_rating_count(item));
  }
  c.avg_rating = rating_sum / static_cast<double>(full.size());
  c.avg_item_popularity = popularity_sum / static_cast<double>(full.size());

  if (genres && !genres->empty()) {
    c.genre_available = true;
    std::set<std::string> labels;
    for (const auto& [item, _] : full) {
      auto g = genres->find(item);
      if (g != genres->end()) labels.insert(g->second.begin(), g->second.end());
    }
    c.genre_diversity = labels.size();
  }

  std::vector<double> sims;
  sims.reserve(model.system_profiles().size());
  for (const auto& [_, profile] : model.system_profiles())
    sims.push_back(msd_similarity(full, profile, model.config().min_overlap));
  c.avg_similarity_all = macro_average(sims);
  std::sort(sims.begin(), sims.end(), std::greater<>());
  const std::size_t m = std::min(top_m, sims.size());
  double top_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) top_sum += sims[i];
  c.avg_similarity_top30 = m == 0 ? 0.0 : top_sum / static_cast<double>(m);
  return c;
}

struct RegressionResult {
  std::vector<std::string> features;  // surviving feature names, column order
  std::vector<double> coefficients;   // aligned with `features`
  double intercept{};
  double r_squared{};
  std::size_t n_observations{};
  std::vector<std::string> dropped;  // zero-variance features removed
};

// Ordinary least squares with an intercept, solved by column-pivoted
// Householder QR. Zero-variance feature columns are dropped (constants are
// collinear with the intercept); a rank-deficient design after dropping is
// an error naming the collinear features.
inline RegressionResult ols_regress(const std::vector<std::vector<double>>& rows,
                                    const std::vector<double>& target,
                                    const std::vector<std::string>& feature_names) {
  if (rows.size() != target.size()) throw ConfigError("ols: rows/target size mismatch");
  const std::size_t n = rows.size();
  const std::size_t k = feature_names.size();
  for (const auto& row : rows)
    if (row.size() != k) throw ConfigError("ols: row width mismatch");

  RegressionResult result;
  result.n_observations = n;

  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < k; ++j) {
    bool constant = true;
    for (std::size_t i = 1; i < n && constant; ++i)
      constant = rows[i][j] == rows[0][j];
    if (constant) {
      result.dropped.push_back(feature_names[j]);
    } else {
      kept.push_back(j);
    }
  }
  if (n < kept.size() + 1)
    throw DataError("ols: need at least " + std::to_string(kept.size() + 1) +
                    " observations for " + std::to_string(kept.size()) + " features");

  Eigen::MatrixXd X(n, kept.size() + 1);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t j = 0; j < kept.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = rows[i][kept[j]];
    y(static_cast<Eigen::Index>(i)) = target[i];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) {
    std::string names;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index r = qr.rank(); r < X.cols(); ++r) {
      const Eigen::Index col = perm(r);
      if (col == 0) continue;  // intercept
      if (!names.empty()) names += ", ";
      names += feature_names[kept[static_cast<std::size_t>(col - 1)]];
    }
    throw DataError("ols: collinear features: " + names);
  }
  const Eigen::VectorXd beta = qr.solve(y);

  const Eigen::VectorXd residual = y - X * beta;
  const double ss_res = residual.squaredNorm();
  const double y_mean = y.mean();
  const double ss_tot = (y.array() - y_mean).matrix().squaredNorm();
  result.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  result.r_squared = std::clamp(result.r_squared, 0.0, 1.0);
  result.intercept = beta(0);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    result.features.push_back(feature_names[kept[j]]);
    result.coefficients.push_back(beta(static_cast<Eigen::Index>(j + 1)));
  }
  return result;
}

}  // namespace minrec
