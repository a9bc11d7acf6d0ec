#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "helpers.hpp"
#include "minrec/dataset.hpp"
#include "minrec/svd.hpp"
#include "minrec/synth.hpp"

using namespace minrec;

TEST_CASE("synthesize produces a loadable movielens-format dataset") {
  SynthConfig cfg;
  cfg.users = 50;
  cfg.items = 200;
  cfg.seed = 5;
  const RatingsDataset ds = synthesize(cfg);
  REQUIRE(ds.num_users() == 50);
  REQUIRE(ds.has_genres());

  testutil::TempDir dir("synth");
  save_ratings(ds, dir.file("ratings.csv"), DataFormat::movielens_csv);
  save_genres(ds, dir.file("movies.csv"));
  RatingsDataset loaded = load_ratings(dir.file("ratings.csv"), DataFormat::movielens_csv);
  loaded = with_genres(loaded, load_genres(dir.file("movies.csv")));
  REQUIRE(loaded == ds);
}

TEST_CASE("synthesize is deterministic in the seed") {
  SynthConfig cfg;
  cfg.users = 20;
  cfg.items = 60;
  cfg.seed = 9;
  REQUIRE(synthesize(cfg) == synthesize(cfg));
  SynthConfig other = cfg;
  other.seed = 10;
  REQUIRE_FALSE(synthesize(cfg) == synthesize(other));
}

TEST_CASE("profile sizes respect the configured minimum") {
  SynthConfig cfg;
  cfg.users = 30;
  cfg.items = 120;
  cfg.seed = 3;
  cfg.min_profile = 46;
  const RatingsDataset ds = synthesize(cfg);
  double total = 0.0;
  for (const auto& [user, profile] : ds.profiles()) {
    REQUIRE(profile.size() >= 46);
    REQUIRE(profile.size() <= 120);
    total += static_cast<double>(profile.size());
  }
  REQUIRE(total / 30.0 > 46.0);  // tail above the minimum
}

TEST_CASE("ratings stay on the declared scale grid when quantized") {
  SynthConfig cfg;
  cfg.users = 15;
  cfg.items = 80;
  cfg.seed = 21;
  cfg.quantize = true;
  const RatingsDataset ds = synthesize(cfg);
  for (const Rating& r : ds.ratings()) {
    REQUIRE(ds.scale().contains(r.value));
    const double steps = (r.value - ds.scale().min_value) / ds.scale().step;
    REQUIRE_THAT(steps, Catch::Matchers::WithinAbs(std::round(steps), 1e-9));
  }
}

TEST_CASE("a noiseless instance is fit almost exactly by matched-capacity svd") {
  SynthConfig cfg;
  cfg.users = 40;
  cfg.items = 80;
  cfg.seed = 17;
  cfg.taste_factors = 4;
  cfg.noise_std = 0.0;
  cfg.quantize = false;
  const RatingsDataset ds = synthesize(cfg);

  SvdConfig sc;
  sc.factors = 8;
  sc.epochs = 120;
  sc.learning_rate = 0.02;
  sc.regularization = 0.001;
  sc.seed = 1;
  const SvdModel model = train_svd(ds.profiles(), ds.scale(), sc);

  double sq = 0.0;
  std::size_t count = 0;
  for (const auto& [user, profile] : ds.profiles()) {
    FoldedUser folded;
    folded.factors.assign(model.user_factors(user).begin(),
                          model.user_factors(user).end());
    folded.bias = model.user_bias(user);
    folded.trained_on.insert("x");
    for (const auto& [item, rated] : profile) {
      const double d = predict_svd(model, folded, item).value - rated.value;
      sq += d * d;
      ++count;
    }
  }
  const double training_rmse = std::sqrt(sq / static_cast<double>(count));
  REQUIRE(training_rmse < 0.15);
}

TEST_CASE("synthesize validates its configuration") {
  SynthConfig cfg;
  cfg.users = 1;
  REQUIRE_THROWS_AS(synthesize(cfg), ConfigError);
  cfg.users = 10;
  cfg.items = 1;
  REQUIRE_THROWS_AS(synthesize(cfg), ConfigError);
}
