#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <sstream>
#include <type_traits>

#include "fwls/cf/benchmark.hpp"

namespace fwls::cf {
namespace {

double rmse_on(const RatingDataset& ds, Split s, auto&& predict) {
  double ss = 0.0;
  std::size_t n = 0;
  for (const auto& r : ds.ratings) {
    if (r.split != s) continue;
    const double e = predict(r.user, r.item) - r.value;
    ss += e * e;
    ++n;
  }
  return std::sqrt(ss / static_cast<double>(n));
}

TrainSplit toy_train(std::uint32_t users, std::uint32_t items, std::vector<Rating> ratings) {
  return {users, items, std::move(ratings)};
}

// ---- generator ------------------------------------------------------------

TEST(Generate, SameSeedSameBytes) {
  GeneratorConfig c;
  c.n_users = 300;
  c.n_items = 100;
  c.seed = 5;
  const auto a = generate(c), b = generate(c);
  ASSERT_EQ(a.ratings.size(), b.ratings.size());
  for (std::size_t k = 0; k < a.ratings.size(); ++k) {
    EXPECT_EQ(a.ratings[k].user, b.ratings[k].user);
    EXPECT_EQ(a.ratings[k].item, b.ratings[k].item);
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.ratings[k].value),
              std::bit_cast<std::uint64_t>(b.ratings[k].value));
    EXPECT_EQ(a.ratings[k].split, b.ratings[k].split);
  }
  c.seed = 6;
  const auto d = generate(c);
  EXPECT_FALSE(d.ratings.size() == a.ratings.size() &&
               std::equal(a.ratings.begin(), a.ratings.end(), d.ratings.begin(),
                          [](const Rating& x, const Rating& y) { return x.value == y.value; }));
}

TEST(Generate, DefaultConfigMarginals) {
  const auto ds = generate({});
  EXPECT_NO_THROW(ds.validate());
  EXPECT_GE(ds.ratings.size(), 90000u);
  EXPECT_LE(ds.ratings.size(), 110000u);
  std::vector<std::size_t> per_user(ds.n_users, 0), per_item(ds.n_items, 0);
  for (const auto& r : ds.ratings) {
    ++per_user[r.user];
    ++per_item[r.item];
  }
  const auto [ulo, uhi] = std::minmax_element(per_user.begin(), per_user.end());
  EXPECT_GE(double(*uhi) / double(*ulo), 100.0) << *ulo << " .. " << *uhi;
  const auto [ilo, ihi] = std::minmax_element(per_item.begin(), per_item.end());
  // Heavy users reach deep into the catalogue, which flattens item counts.
  EXPECT_GE(double(*ihi) / double(*ilo), 5.0) << *ilo << " .. " << *ihi;
  const double n = static_cast<double>(ds.ratings.size());
  EXPECT_NEAR(ds.count(Split::Train) / n, 0.8, 0.02);
  EXPECT_NEAR(ds.count(Split::Blend) / n, 0.1, 0.02);
  EXPECT_NEAR(ds.count(Split::Test) / n, 0.1, 0.02);
}

TEST(Generate, ValuesStayOnScale) {
  GeneratorConfig c;
  c.n_users = 200;
  c.n_items = 80;
  c.noise_sd = 3.0;  // forces clipping
  for (const auto& r : generate(c).ratings) {
    EXPECT_GE(r.value, 1.0);
    EXPECT_LE(r.value, 5.0);
  }
}

TEST(Generate, RejectsEmptyDimensions) {
  GeneratorConfig c;
  c.n_users = 0;
  EXPECT_THROW(generate(c), ContractViolation);
}

TEST(RatingDataset, ValidateCatchesBrokenInvariants) {
  RatingDataset dup{2, 2, {{0, 0, 3.0, Split::Train}, {1, 1, 4.0, Split::Train}, {0, 0, 2.0, Split::Test}}};
  EXPECT_THROW(dup.validate(), ContractViolation);
  RatingDataset no_train{2, 2, {{0, 0, 3.0, Split::Train}, {1, 1, 4.0, Split::Blend}}};
  EXPECT_THROW(no_train.validate(), ContractViolation);
  RatingDataset off_scale{1, 1, {{0, 0, 5.5, Split::Train}}};
  EXPECT_THROW(off_scale.validate(), ContractViolation);
}

TEST(ReadRatings, ParsesSplitsAndReportsLines) {
  std::istringstream ok("user,item,rating,split\n0,1,4,train\n2,0,3.5,blend\n1,1,2,test\n");
  const auto ds = read_ratings(ok);
  EXPECT_EQ(ds.n_users, 3u);
  EXPECT_EQ(ds.n_items, 2u);
  ASSERT_EQ(ds.ratings.size(), 3u);
  EXPECT_EQ(ds.ratings[1].split, Split::Blend);
  EXPECT_EQ(ds.ratings[1].value, 3.5);

  std::istringstream bad("user,item,rating\n0,1,4\n0,x,3\n");
  try {
    read_ratings(bad);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream neg("user,item,rating\n-1,0,4\n");
  EXPECT_THROW(read_ratings(neg), ParseError);
}

// ---- global effects -------------------------------------------------------

TEST(GlobalEffects, HandComputedOffsets) {
  // mu = 3; user 0 residuals {+1, +1} -> 2 / (2 + 2) = 0.5 with alpha = 2.
  const auto t = toy_train(2, 2, {{0, 0, 4.0}, {0, 1, 4.0}, {1, 0, 1.0}, {1, 1, 3.0}});
  const GlobalEffects ge(t, {.alpha = 2.0});
  EXPECT_DOUBLE_EQ(ge.mu(), 3.0);
  EXPECT_DOUBLE_EQ(ge.user_offset(0), 0.5);
  EXPECT_DOUBLE_EQ(ge.user_offset(1), -0.5);
  // Item 0 residuals after user: (4-3-0.5) + (1-3+0.5) = -1 -> /4.
  EXPECT_DOUBLE_EQ(ge.item_offset(0), -0.25);
  EXPECT_DOUBLE_EQ(ge.predict(0, 0), 3.25);
}

TEST(GlobalEffects, UserWithoutRatingsFallsBackToItemOffset) {
  const auto t = toy_train(3, 2, {{0, 0, 4.0}, {0, 1, 2.0}, {1, 0, 5.0}, {1, 1, 3.0}});
  const GlobalEffects ge(t);
  EXPECT_EQ(ge.user_offset(2), 0.0);
  EXPECT_DOUBLE_EQ(ge.predict(2, 0), ge.mu() + ge.item_offset(0));
}

TEST(GlobalEffects, HugeAlphaPredictsMean) {
  const auto ds = generate({.n_users = 200, .n_items = 60, .seed = 3});
  const auto t = ds.train();
  const GlobalEffects ge(t, {.alpha = 1e12});
  for (const auto& r : ds.ratings) EXPECT_NEAR(ge.predict(r.user, r.item), ge.mu(), 1e-8);
}

// Additive generator without noise or interactions: the offsets are
// recoverable up to shrinkage, which is small once users and items carry
// many ratings.
TEST(GlobalEffects, RecoversAdditiveGenerator) {
  GeneratorConfig c;
  c.n_users = 400;
  c.n_items = 300;
  c.n_factors = 0;
  c.noise_sd = 0.0;
  c.min_ratings_per_user = 250;
  c.max_ratings_per_user = 300;
  c.mean_ratings_per_user = 270;
  c.item_popularity_exponent = 0.0;
  const auto ds = generate(c);
  const auto t = ds.train();
  const GlobalEffects ge(t);
  const double test = rmse_on(ds, Split::Test, [&](auto u, auto i) { return ge.predict(u, i); });
  RecordProperty("test_rmse", std::to_string(test));
  EXPECT_LE(test, 0.05);
  const GlobalEffects exact(t, {.alpha = 0.0});
  EXPECT_LE(rmse_on(ds, Split::Train, [&](auto u, auto i) { return exact.predict(u, i); }), 0.05);
}

// ---- matrix factorization -------------------------------------------------

TEST(MatrixFactorization, RecoversRankOneToy) {
  const double a[5] = {0.4, 0.6, 0.8, 1.0, 1.2}, b[5] = {1.0, 1.5, 2.0, 2.5, 3.0};
  std::vector<Rating> rs;
  for (std::uint32_t u = 0; u < 5; ++u)
    for (std::uint32_t i = 0; i < 5; ++i) rs.push_back({u, i, 1.0 + a[u] * b[i]});
  const auto t = toy_train(5, 5, rs);  // values stay inside [1, 5]
  const MatrixFactorization mf(t, {.n_factors = 1, .learn_rate = 0.02, .reg = 0.0, .epochs = 4000,
                                   .init_sd = 0.3, .seed = 1});
  double ss = 0.0;
  for (const auto& r : rs) ss += std::pow(mf.predict(r.user, r.item) - r.value, 2);
  EXPECT_LE(std::sqrt(ss / 25.0), 0.05);
}

TEST(MatrixFactorization, ZeroLearnRateKeepsInitialisation) {
  const auto t = generate({.n_users = 100, .n_items = 40, .seed = 9}).train();
  const MatrixFactorization init(t, {.n_factors = 4, .epochs = 0, .seed = 3});
  const MatrixFactorization frozen(t, {.n_factors = 4, .learn_rate = 0.0, .epochs = 10, .seed = 3});
  for (std::uint32_t u = 0; u < 100; u += 7)
    for (std::uint32_t i = 0; i < 40; i += 3)
      EXPECT_EQ(frozen.predict(u, i), init.predict(u, i));
  for (std::uint32_t u = 0; u < 100; ++u) {
    const auto p0 = init.user_vector(u), p1 = frozen.user_vector(u);
    EXPECT_TRUE(std::equal(p0.begin(), p0.end(), p1.begin()));
  }
}

TEST(MatrixFactorization, DeterministicPerSeed) {
  const auto t = generate({.n_users = 150, .n_items = 50, .seed = 10}).train();
  const MatrixFactorization a(t, {.epochs = 5, .seed = 4}), b(t, {.epochs = 5, .seed = 4}),
      c(t, {.epochs = 5, .seed = 5});
  EXPECT_EQ(a.predict(3, 7), b.predict(3, 7));
  EXPECT_NE(a.predict(3, 7), c.predict(3, 7));
}

TEST(MatrixFactorization, DivergenceNamesEpoch) {
  const auto t = generate({.n_users = 100, .n_items = 40, .seed = 11}).train();
  try {
    MatrixFactorization mf(t, {.n_factors = 8, .learn_rate = 50.0, .epochs = 30});
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_GE(e.epoch(), 1);
    EXPECT_LE(e.epoch(), 30);
    EXPECT_NE(std::string(e.what()).find(std::to_string(e.epoch())), std::string::npos);
  }
  EXPECT_THROW(MatrixFactorization(t, {.n_factors = 0}), ContractViolation);
}

TEST(MatrixFactorization, BeatsGlobalEffectsOnDefaultGenerator) {
  const auto ds = generate({});
  const auto t = ds.train();
  const GlobalEffects ge(t);
  const MatrixFactorization mf(t);
  const double e_ge = rmse_on(ds, Split::Test, [&](auto u, auto i) { return ge.predict(u, i); });
  const double e_mf = rmse_on(ds, Split::Test, [&](auto u, auto i) { return mf.predict(u, i); });
  EXPECT_LT(e_mf, e_ge);
}

// ---- item knn -------------------------------------------------------------

// Items 0 and 1 get identical ratings from n users; item 2 pins each
// user's mean so the centred values vary.
TrainSplit twin_items(std::uint32_t n) {
  std::vector<Rating> rs;
  for (std::uint32_t u = 0; u < n; ++u) {
    const double v = 1.0 + (u * 7 % 5);
    rs.push_back({u, 0, v});
    rs.push_back({u, 1, v});
    rs.push_back({u, 2, 3.0});
  }
  return toy_train(n, 3, rs);
}

TEST(ItemKnn, TwinItemsApproachSimilarityOne) {
  double prev = 0.0;
  for (std::uint32_t n : {5u, 50u, 500u, 5000u}) {
    const ItemKnn knn(twin_items(n));
    const double s = knn.similarity(0, 1);
    EXPECT_NEAR(s, double(n) / (n + 100.0), 1e-12) << n;
    EXPECT_GT(s, prev);
    EXPECT_EQ(knn.similarity(1, 0), s);
    prev = s;
  }
  EXPECT_GT(prev, 0.98);
}

TEST(ItemKnn, OverlapBelowMinimumGivesZero) {
  EXPECT_EQ(ItemKnn(twin_items(2)).similarity(0, 1), 0.0);
  EXPECT_GT(ItemKnn(twin_items(3)).similarity(0, 1), 0.0);
  EXPECT_EQ(ItemKnn(twin_items(3), {.min_overlap = 4}).similarity(0, 1), 0.0);
}

TEST(ItemKnn, DisjointItemsFallBackToGlobalEffects) {
  // Users 0-2 rate items 0-1; user 3 rates only item 2, which nobody else
  // rated, so item 3's neighbourhood is empty for user 3.
  const auto t = toy_train(4, 4, {{0, 0, 5}, {0, 1, 4}, {0, 3, 2}, {1, 0, 2}, {1, 1, 1}, {1, 3, 4},
                                  {2, 0, 3}, {2, 1, 3}, {2, 3, 3}, {3, 2, 4}});
  const ItemKnn knn(t);
  const GlobalEffects ge(t);
  EXPECT_EQ(knn.neighbour_count(3, 3), 0u);
  EXPECT_EQ(knn.predict(3, 3), ge.predict(3, 3));
  EXPECT_THROW(ItemKnn(t, {.k = 0}), ContractViolation);
}

TEST(ItemKnn, PredictionIsUserMeanPlusWeightedDeviation) {
  const auto t = twin_items(50);
  const ItemKnn knn(t);
  // User 2 rated items 0 and 1 with v and item 2 with 3. Item 0 twins item 1;
  // item 2 is anti-correlated after centring and drops out.
  const double v = 1.0 + (2 * 7 % 5);
  const double mean = (v + v + 3.0) / 3.0;
  EXPECT_EQ(knn.neighbour_count(2, 1), 1u);
  EXPECT_NEAR(knn.predict(2, 1), clamp_rating(mean + (v - mean)), 1e-12);
}

TEST(ItemKnn, BeatsGlobalEffectsOnClusteredItems) {
  GeneratorConfig c;
  c.item_clusters = 10;
  c.cluster_spread = 0.05;
  c.interaction_sd = 0.8;
  const auto ds = generate(c);
  const auto t = ds.train();
  const GlobalEffects ge(t);
  const ItemKnn knn(t);
  const double e_ge = rmse_on(ds, Split::Test, [&](auto u, auto i) { return ge.predict(u, i); });
  const double e_knn = rmse_on(ds, Split::Test, [&](auto u, auto i) { return knn.predict(u, i); });
  RecordProperty("ge", std::to_string(e_ge));
  RecordProperty("knn", std::to_string(e_knn));
  EXPECT_LT(e_knn, e_ge);
}

// ---- meta-features --------------------------------------------------------

TEST(MetaFeatures, HandBuiltToy) {
  // user 0: items 0,1 (4, 2); user 1: item 0 (5); user 2: nothing.
  const auto t = toy_train(3, 3, {{0, 0, 4.0}, {0, 1, 2.0}, {1, 0, 5.0}});
  const auto specs = all_meta_features();
  const std::vector<UserItem> pairs{{0, 1}, {1, 2}, {2, 0}};
  const auto m = compute_meta_features(t, specs, pairs);
  ASSERT_EQ(m.size(), 21u);
  const double l1 = std::log(2.0), l2 = std::log(3.0);
  const double sd_u0 = std::sqrt(2.0);        // {4, 2}
  const double sd_i0 = std::sqrt(0.5);        // {4, 5}
  const double expect[3][7] = {
      {1.0, l1, l2, l1 * l2, sd_u0, 0.0, (l2 + l1) / 2.0},  // user 0, item 1
      {1.0, 0.0, l1, 0.0, 0.0, 0.0, l2},                    // user 1, item 2 (unrated)
      {1.0, l2, 0.0, 0.0, 0.0, sd_i0, 0.0},                 // user 2 (no ratings), item 0
  };
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 7; ++j)
      EXPECT_NEAR(m[r * 7 + j], expect[r][j], 1e-15) << r << "," << j;
}

TEST(MetaFeatures, SupportProductIsExactProduct) {
  const auto ds = generate({.n_users = 300, .n_items = 100, .seed = 12});
  const auto specs = all_meta_features();
  const auto pairs = ds.pairs(Split::Blend);
  const auto m = compute_meta_features(ds.train(), specs, pairs);
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    EXPECT_EQ(m[r * 7 + 3], m[r * 7 + 1] * m[r * 7 + 2]);
    for (std::size_t j = 0; j < 7; ++j) EXPECT_TRUE(std::isfinite(m[r * 7 + j]));
  }
}

TEST(MetaFeatures, UnknownSpec) {
  EXPECT_THROW(meta_feature(0), ContractViolation);
  EXPECT_THROW(meta_feature(8), ContractViolation);
  EXPECT_THROW(meta_feature("movie_date"), ContractViolation);
  EXPECT_EQ(meta_feature("3").id, MetaFeatureId::LogUserSupport);
  EXPECT_EQ(meta_feature("item_stdev").id, MetaFeatureId::ItemStdev);
}

// ---- leakage guard --------------------------------------------------------

static_assert(!std::is_constructible_v<GlobalEffects, const RatingDataset&>);
static_assert(!std::is_constructible_v<MatrixFactorization, const RatingDataset&>);
static_assert(!std::is_constructible_v<ItemKnn, const RatingDataset&>);
static_assert(!std::is_constructible_v<SupportStatistics, const RatingDataset&>);

TEST(LeakageGuard, HeldOutTargetsDoNotReachModelsOrFeatures) {
  BenchmarkConfig cfg = quick_profile({});
  const auto ds = generate(cfg.generator);
  auto scrambled = ds;
  for (auto& r : scrambled.ratings)
    if (r.split != Split::Train) r.value = 6.0 - r.value;
  const auto a = build_blend_splits(ds, cfg);
  const auto b = build_blend_splits(scrambled, cfg);
  EXPECT_EQ(a.blend_preds, b.blend_preds);
  EXPECT_EQ(a.test_preds, b.test_preds);
  EXPECT_TRUE(std::equal(a.blend.meta_feats().begin(), a.blend.meta_feats().end(),
                         b.blend.meta_feats().begin()));
  EXPECT_TRUE(std::equal(a.test.meta_feats().begin(), a.test.meta_feats().end(),
                         b.test.meta_feats().begin()));
}

// ---- benchmark ------------------------------------------------------------

TEST(Benchmark, FwlsContainsStackingInSample) {
  const auto cfg = quick_profile({});
  const auto splits = build_blend_splits(generate(cfg.generator), cfg);
  const GramState gs = accumulate(splits.blend);
  const std::vector<std::size_t> constant{0};
  const double stack = solve(select_features(gs, constant), 0.0).train_rmse;
  const double fwls = solve(gs, 0.0).train_rmse;
  EXPECT_LE(fwls, stack + 1e-10);
}

TEST(Benchmark, IdenticalModelsCollapseStrategies) {
  Rng rng(77);
  const std::size_t n = 4000;
  std::vector<double> y(n), p, f;
  for (std::size_t r = 0; r < n; ++r) {
    y[r] = 1.0 + 4.0 * rng.uniform();
    const double g = y[r] + 1e-4 * rng.normal();
    for (int i = 0; i < 3; ++i) p.push_back(g);
    f.insert(f.end(), {1.0, rng.uniform(), rng.normal()});
  }
  const StackedDataset all(y, p, f, 3, 3);
  std::vector<std::size_t> head(n / 2), tail(n / 2);
  std::iota(head.begin(), head.end(), 0);
  std::iota(tail.begin(), tail.end(), n / 2);
  const auto rep = evaluate_strategies(all.subset_rows(head), all.subset_rows(tail), {});
  const double b = rep.get("uniform_average").test_rmse;
  EXPECT_NEAR(rep.get("stacking").test_rmse, b, 1e-6);
  EXPECT_NEAR(rep.get("fwls_forward").test_rmse, b, 1e-6);
}

BenchmarkReport default_run() {
  static const BenchmarkReport rep = run_benchmark({});
  return rep;
}

TEST(Benchmark, DefaultConfigFwlsBeatsStacking) {
  const auto rep = default_run();
  const auto& c = rep.result.get("stacking");
  const auto& d = rep.result.get("merged_baseline");
  const auto& e = rep.result.get("fwls_forward");
  RecordProperty("cv_gap", std::to_string(c.blend_oos_rmse - e.blend_oos_rmse));
  RecordProperty("test_gap", std::to_string(c.test_rmse - e.test_rmse));
  EXPECT_LE(e.test_rmse, c.test_rmse - 0.0005);
  EXPECT_LE(e.blend_oos_rmse, c.blend_oos_rmse - 0.0005);
  EXPECT_LT(c.blend_oos_rmse - d.blend_oos_rmse, 0.2 * (c.blend_oos_rmse - e.blend_oos_rmse));
  EXPECT_GE(rep.result.forward.selected.size(), 2u);
}

TEST(Benchmark, StackingDominatesFixedCombinations) {
  const auto rep = default_run();
  const double a = rep.result.strategies[0].blend_oos_rmse;
  const double b = rep.result.get("uniform_average").blend_oos_rmse;
  const double c = rep.result.get("stacking").blend_oos_rmse;
  EXPECT_LE(c, a);
  EXPECT_LE(c, b);
}

// With comparably accurate base models the uniform average also beats the
// best single one, giving the full chain.
TEST(Benchmark, NestedChainOnBalancedModels) {
  BenchmarkConfig cfg;
  cfg.generator.interaction_sd = 0.3;
  cfg.generator.noise_sd = 0.6;
  const auto rep = run_benchmark(cfg);
  const double a = rep.result.strategies[0].blend_oos_rmse;
  const double b = rep.result.get("uniform_average").blend_oos_rmse;
  const double c = rep.result.get("stacking").blend_oos_rmse;
  EXPECT_LE(c, b);
  EXPECT_LE(b, a);
}

TEST(Benchmark, ReliabilityVariesWithUserSupport) {
  const auto rep = default_run();
  double best = 0.0;
  for (const auto& r : rep.reliability) best = std::max(best, std::abs(r.user_support));
  RecordProperty("max_abs_rho", std::to_string(best));
  EXPECT_GE(best, 0.05);
}

TEST(Benchmark, ReportIsAPureFunctionOfConfig) {
  const auto cfg = quick_profile({});
  const auto a = run_benchmark(cfg), b = run_benchmark(cfg);
  std::ostringstream ca, cb, ta, tb;
  a.write_csv(ca);
  b.write_csv(cb);
  a.write_table(ta);
  b.write_table(tb);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_EQ(ca.str().substr(0, ca.str().find('\n')), "strategy,blend_oos_rmse,test_rmse");
}

TEST(Benchmark, QuickProfileIsQuick) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = run_benchmark(quick_profile({}));
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(s, 60.0);
  EXPECT_EQ(rep.result.strategies.size(), 6u);
}

// ---- config ---------------------------------------------------------------

TEST(BenchmarkConfig, RoundTripsAndRejectsUnknownKeys) {
  BenchmarkConfig c;
  c.generator.n_users = 123;
  c.mf.learn_rate = 0.0125;
  c.features = {meta_feature(1), meta_feature(3)};
  std::ostringstream out;
  write_config(out, c);
  std::istringstream in(out.str());
  const auto back = read_config(in);
  EXPECT_EQ(back.generator.n_users, 123u);
  EXPECT_EQ(back.mf.learn_rate, 0.0125);
  ASSERT_EQ(back.features.size(), 2u);
  EXPECT_EQ(back.features[1].id, MetaFeatureId::LogUserSupport);

  std::istringstream partial("# comment\nseed = 9  # trailing\n\nknn_k=5\n");
  const auto p = read_config(partial);
  EXPECT_EQ(p.generator.seed, 9u);
  EXPECT_EQ(p.knn.k, 5u);
  EXPECT_EQ(p.generator.n_items, GeneratorConfig{}.n_items);

  std::istringstream typo("n_user = 5\n");
  EXPECT_THROW(read_config(typo), ParseError);
  std::istringstream bad_value("n_users = lots\n");
  EXPECT_THROW(read_config(bad_value), ParseError);
  std::istringstream negative("n_users = -3\n");
  EXPECT_THROW(read_config(negative), ContractViolation);
  std::istringstream no_const("features = log_user_support\n");
  EXPECT_THROW(read_config(no_const), ContractViolation);
}

}  // namespace
}  // namespace fwls::cf
