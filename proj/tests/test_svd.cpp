#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "minrec/dataset.hpp"
#include "minrec/minimizer.hpp"
#include "minrec/recommender.hpp"
#include "minrec/svd.hpp"

using namespace minrec;
using testutil::make_profile;

namespace {

nlohmann::json handmade_model_json(double mu, double item_bias,
                                   std::vector<double> item_factors, bool biased) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["config"] = {{"factors", static_cast<int>(item_factors.size())},
                 {"epochs", 1},
                 {"learning_rate", 0.005},
                 {"regularization", 0.02},
                 {"init_std", 0.1},
                 {"biased", biased},
                 {"seed", 0}};
  j["scale"] = {{"min", 0.5}, {"max", 5.0}, {"step", 0.5}};
  j["global_mean"] = mu;
  j["users"] = nlohmann::json::array();
  j["items"] = {{{"id", "i1"}, {"bias", item_bias}, {"factors", item_factors}}};
  return j;
}

}  // namespace

TEST_CASE("train_svd fits a single rating") {
  std::map<UserId, Profile> data;
  data["u"] = make_profile({{"i", 4.5}});
  SvdConfig config;
  config.factors = 4;
  config.epochs = 400;
  config.learning_rate = 0.05;
  config.regularization = 0.0;
  const SvdModel model = train_svd(data, {0.5, 5.0, 0.5}, config);
  FoldedUser trained;
  trained.factors.assign(model.user_factors("u").begin(), model.user_factors("u").end());
  trained.bias = model.user_bias("u");
  const Prediction p = predict_svd(model, trained, "i");
  REQUIRE_THAT(p.value, Catch::Matchers::WithinAbs(4.5, 0.05));
}

TEST_CASE("train_svd validates its configuration") {
  std::map<UserId, Profile> data;
  data["u"] = make_profile({{"i", 4.0}});
  SvdConfig config;
  config.factors = 0;
  REQUIRE_THROWS_AS(train_svd(data, {0.5, 5.0, 0.5}, config), ConfigError);
  REQUIRE_THROWS_AS(train_svd({}, {0.5, 5.0, 0.5}, SvdConfig{}), DataError);
}

TEST_CASE("train_svd is bit-deterministic given the seed") {
  const RatingsDataset ds = testutil::random_dataset(8, 20, 10, 5);
  SvdConfig config;
  config.factors = 6;
  config.epochs = 5;
  config.seed = 99;
  const SvdModel a = train_svd(ds.profiles(), ds.scale(), config);
  const SvdModel b = train_svd(ds.profiles(), ds.scale(), config);
  REQUIRE(a.to_json() == b.to_json());

  // the stored global mean is the mean of the training ratings
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& [user, profile] : ds.profiles())
    for (const auto& [item, r] : profile) {
      sum += r.value;
      ++count;
    }
  REQUIRE_THAT(a.global_mean(),
               Catch::Matchers::WithinAbs(sum / static_cast<double>(count), 1e-9));
}

TEST_CASE("fold_in_user with empty observed predicts mu + item bias") {
  const SvdModel model =
      SvdModel::from_json(handmade_model_json(3.4, -0.2, {0.3, -0.1}, true));
  const FoldedUser user = fold_in_user(model, {});
  REQUIRE(user.bias == 0.0);
  for (double f : user.factors) REQUIRE(f == 0.0);
  const Prediction p = predict_svd(model, user, "i1");
  REQUIRE_THAT(p.value, Catch::Matchers::WithinAbs(3.4 - 0.2, 1e-12));
}

TEST_CASE("fold_in_user learns a positive bias from a high rating") {
  const SvdModel model =
      SvdModel::from_json(handmade_model_json(3.0, 0.0, {0.05, 0.05}, true));
  const FoldedUser user = fold_in_user(model, make_profile({{"i1", 5.0}}));
  REQUIRE(user.bias > 0.0);
  REQUIRE(user.trained_on == std::set<ItemId>{"i1"});
}

TEST_CASE("fold_in_user skips unknown items with a count") {
  const SvdModel model =
      SvdModel::from_json(handmade_model_json(3.0, 0.0, {0.1, 0.1}, true));
  const FoldedUser user =
      fold_in_user(model, make_profile({{"i1", 4.0}, {"mystery", 5.0}}));
  REQUIRE(user.skipped_unknown == 1);
  REQUIRE(user.trained_on == std::set<ItemId>{"i1"});

  // all-unknown observed behaves like empty
  const FoldedUser ghost = fold_in_user(model, make_profile({{"mystery", 5.0}}));
  REQUIRE(ghost.skipped_unknown == 1);
  for (double f : ghost.factors) REQUIRE(f == 0.0);
}

TEST_CASE("fold_in_user is deterministic and leaves the model untouched") {
  const RatingsDataset ds = testutil::random_dataset(6, 15, 8, 17);
  SvdConfig config;
  config.factors = 5;
  config.epochs = 10;
  config.seed = 3;
  const SvdModel model = train_svd(ds.profiles(), ds.scale(), config);
  const std::string before = model.to_json().dump();

  const Profile observed = make_profile({{"i1", 4.0}, {"i2", 2.0}});
  const FoldedUser a = fold_in_user(model, observed);
  const FoldedUser b = fold_in_user(model, observed);
  REQUIRE(a.factors == b.factors);
  REQUIRE(a.bias == b.bias);

  const FoldedUser other = fold_in_user(model, make_profile({{"i3", 5.0}}));
  const FoldedUser a_again = fold_in_user(model, observed);
  REQUIRE(a.factors == a_again.factors);
  REQUIRE(other.factors != a.factors);
  REQUIRE(model.to_json().dump() == before);
}

TEST_CASE("predict_svd evaluates the prediction rule") {
  // all parameters zero -> mu
  const SvdModel zero =
      SvdModel::from_json(handmade_model_json(3.5, 0.0, {0.0, 0.0}, true));
  REQUIRE(predict_svd(zero, fold_in_user(zero, {}), "i1").value == 3.5);

  // mu=3.5, b_u=0.2, b_i=-0.1, q.p=0.3 -> 3.9
  const SvdModel model =
      SvdModel::from_json(handmade_model_json(3.5, -0.1, {0.3, 0.0}, true));
  FoldedUser user;
  user.factors = {1.0, 0.0};
  user.bias = 0.2;
  user.trained_on = {"i1"};
  REQUIRE_THAT(predict_svd(model, user, "i1").value,
               Catch::Matchers::WithinAbs(3.9, 1e-12));

  // unknown item: mu + b_u, non-personalized
  const Prediction unknown = predict_svd(model, user, "j9");
  REQUIRE_THAT(unknown.value, Catch::Matchers::WithinAbs(3.7, 1e-12));
  REQUIRE_FALSE(unknown.personalized);

  // unbiased variant: q.p = 0.3 clamps up to the scale minimum 0.5
  const SvdModel unbiased =
      SvdModel::from_json(handmade_model_json(3.5, -0.1, {0.3, 0.0}, false));
  REQUIRE(predict_svd(unbiased, user, "i1").value == 0.5);
}

TEST_CASE("analytic gradients match central finite differences") {
  // 3 users x 3 items, parameters moved off init by one epoch of training
  const RatingsDataset ds = testutil::random_dataset(3, 3, 3, 23);
  SvdConfig config;
  config.factors = 3;
  config.epochs = 1;
  config.seed = 8;
  for (const bool biased : {true, false}) {
    config.biased = biased;
    const SvdModel model = train_svd(ds.profiles(), ds.scale(), config);
    const double reg = config.regularization;
    const double mu = model.global_mean();
    for (const auto& [user, profile] : ds.profiles()) {
      for (const auto& [item, rated] : profile) {
        std::vector<double> p(model.user_factors(user).begin(),
                              model.user_factors(user).end());
        std::vector<double> q(model.item_factors(item).begin(),
                              model.item_factors(item).end());
        double bu = model.user_bias(user);
        double bi = model.item_bias(item);
        const auto grad = svd_detail::rating_gradient(rated.value, mu, bu, bi, p, q,
                                                      reg, biased);
        const double h = 1e-6;
        const auto check = [&](double analytic, double& slot) {
          const double saved = slot;
          slot = saved + h;
          const double up = svd_detail::rating_loss(rated.value, mu, bu, bi, p, q,
                                                    reg, biased);
          slot = saved - h;
          const double down = svd_detail::rating_loss(rated.value, mu, bu, bi, p, q,
                                                      reg, biased);
          slot = saved;
          const double numeric = (up - down) / (2.0 * h);
          const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
          REQUIRE(std::fabs(analytic - numeric) / denom < 1e-5);
        };
        if (biased) {
          check(grad.d_bu, bu);
          check(grad.d_bi, bi);
        }
        for (std::size_t f = 0; f < p.size(); ++f) check(grad.d_p[f], p[f]);
        for (std::size_t f = 0; f < q.size(); ++f) check(grad.d_q[f], q[f]);
      }
    }
  }
}

TEST_CASE("the training step descends the per-rating gradient") {
  // one SGD step on a single rating equals theta - lr * rating_gradient
  std::map<UserId, Profile> data;
  data["u"] = make_profile({{"i", 4.0}});
  SvdConfig config;
  config.factors = 3;
  config.epochs = 1;
  config.seed = 4;
  const SvdModel trained = train_svd(data, {0.5, 5.0, 0.5}, config);

  // reconstruct the init state: same seed, same draw order
  std::mt19937_64 rng(config.seed);
  std::vector<double> p0(3), q0(3);
  for (double& v : p0) v = normal_sample(rng, 0.0, config.init_std);
  for (double& v : q0) v = normal_sample(rng, 0.0, config.init_std);
  const auto grad =
      svd_detail::rating_gradient(4.0, trained.global_mean(), 0.0, 0.0, p0, q0,
                                  config.regularization, true);
  REQUIRE_THAT(trained.user_bias("u"),
               Catch::Matchers::WithinAbs(-config.learning_rate * grad.d_bu, 1e-15));
  REQUIRE_THAT(trained.item_bias("i"),
               Catch::Matchers::WithinAbs(-config.learning_rate * grad.d_bi, 1e-15));
  for (std::size_t f = 0; f < 3; ++f) {
    REQUIRE_THAT(trained.user_factors("u")[f],
                 Catch::Matchers::WithinAbs(p0[f] - config.learning_rate * grad.d_p[f], 1e-15));
    REQUIRE_THAT(trained.item_factors("i")[f],
                 Catch::Matchers::WithinAbs(q0[f] - config.learning_rate * grad.d_q[f], 1e-15));
  }
}

TEST_CASE("training loss is non-increasing for at least 90% of epochs") {
  const RatingsDataset ds = testutil::random_dataset(12, 30, 15, 41);
  SvdConfig config;
  config.epochs = 30;
  config.seed = 6;
  std::vector<double> losses;
  train_svd(ds.profiles(), ds.scale(), config, &losses);
  REQUIRE(losses.size() == 30);
  std::size_t increases = 0;
  for (std::size_t e = 1; e < losses.size(); ++e)
    if (losses[e] > losses[e - 1]) ++increases;
  REQUIRE(increases <= losses.size() / 10);
}

TEST_CASE("model save/load reproduces predictions bit-exactly") {
  const RatingsDataset ds = testutil::random_dataset(6, 12, 8, 3);
  SvdConfig config;
  config.factors = 4;
  config.epochs = 8;
  config.seed = 12;
  const SvdModel model = train_svd(ds.profiles(), ds.scale(), config);
  testutil::TempDir dir("svdio");
  save_svd(model, dir.file("model.json"));
  const SvdModel reloaded = load_svd(dir.file("model.json"));

  const Profile observed = make_profile({{"i1", 4.0}, {"i5", 2.5}});
  const FoldedUser a = fold_in_user(model, observed);
  const FoldedUser b = fold_in_user(reloaded, observed);
  REQUIRE(a.factors == b.factors);
  REQUIRE(a.bias == b.bias);
  for (int i = 0; i < 12; ++i) {
    const ItemId item = "i" + std::to_string(i);
    REQUIRE(predict_svd(model, a, item).value == predict_svd(reloaded, b, item).value);
  }
}

TEST_CASE("minimization hurts the unbiased variant at least as much") {
  // checked-in fixture: random strategy, n=1 vs full, macro RMSE deltas
  const RatingsDataset ds = load_ratings(
      std::string(MINREC_FIXTURE_DIR) + "/minimization_fixture.csv",
      DataFormat::movielens_csv);
  const ExperimentSplit split = make_split(ds, 0.7, 0.7, 11);
  const SystemStats stats = SystemStats::from_profiles(split.system_users);

  double delta[2];
  int slot = 0;
  for (const Algorithm algorithm : {Algorithm::svd, Algorithm::svd_unbiased}) {
    SvdConfig config;
    config.seed = 11;
    const auto recommender =
        make_recommender(algorithm, split.system_users, ds.scale(), {}, config);
    const ConditionScores full = evaluate_condition(
        split, *recommender, stats, {algorithm, Strategy::full, 0, 11}, 10);
    const ConditionScores one = evaluate_condition(
        split, *recommender, stats, {algorithm, Strategy::random, 1, 11}, 10);
    std::vector<double> full_rmse, one_rmse;
    for (const auto& [user, eval] : full.per_user) full_rmse.push_back(eval.rmse);
    for (const auto& [user, eval] : one.per_user) one_rmse.push_back(eval.rmse);
    delta[slot++] = macro_average(one_rmse) - macro_average(full_rmse);
  }
  REQUIRE(delta[1] >= delta[0]);  // unbiased degrades at least as much
}
