#ifndef FWLS_CF_BENCHMARK_HPP
#define FWLS_CF_BENCHMARK_HPP

// End-to-end comparison of blending strategies on synthetic ratings: base
// models fit on train, blenders fit and cross-validated on blend, everything
// scored once on test.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "fwls/cf/meta_features.hpp"
#include "fwls/cf/models.hpp"
#include "fwls/cf/ratings.hpp"
#include "fwls/core.hpp"
#include "fwls/csv.hpp"
#include "fwls/cv.hpp"
#include "fwls/gram.hpp"
#include "fwls/ridge.hpp"

namespace fwls::cf {

struct BlendConfig {
  std::size_t folds = 10;
  std::uint64_t cv_seed = 2024;
  double lambda = kDefaultLambda;
};

struct BenchmarkConfig {
  GeneratorConfig generator;
  GlobalEffects::Config global_effects;
  MatrixFactorization::Config mf;
  ItemKnn::Config knn;
  BlendConfig blend;
  std::vector<MetaFeatureSpec> features = all_meta_features();
};

/// Smaller data and fewer epochs, same pipeline.
inline BenchmarkConfig quick_profile(BenchmarkConfig c) {
  c.generator.n_users = 800;
  c.generator.n_items = 250;
  c.generator.max_ratings_per_user = 200;
  c.mf.epochs = 20;
  c.blend.folds = 5;
  return c;
}

namespace detail {

struct ConfigKey {
  std::string name;
  std::function<void(BenchmarkConfig&, std::string_view)> set;
  std::function<std::string(const BenchmarkConfig&)> get;
};

template <typename T>
T parse_as(std::string_view key, std::string_view text) {
  const double v = csv::parse_number(text, 0, 0);
  if constexpr (std::is_integral_v<T>) {
    if (v < 0 || v != std::floor(v) || v > 1.8e19)
      throw ContractViolation("config: " + std::string(key) + " must be a non-negative integer");
  }
  return static_cast<T>(v);
}

#define FWLS_CF_KEY(name, member)                                                  \
  ConfigKey {                                                                      \
    name,                                                                          \
        [](BenchmarkConfig& c, std::string_view v) {                               \
          c.member = parse_as<decltype(c.member)>(name, v);                        \
        },                                                                         \
        [](const BenchmarkConfig& c) { return fmt::format("{}", c.member); }       \
  }

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      FWLS_CF_KEY("n_users", generator.n_users),
      FWLS_CF_KEY("n_items", generator.n_items),
      FWLS_CF_KEY("n_factors", generator.n_factors),
      FWLS_CF_KEY("noise_sd", generator.noise_sd),
      FWLS_CF_KEY("global_mean", generator.global_mean),
      FWLS_CF_KEY("user_bias_sd", generator.user_bias_sd),
      FWLS_CF_KEY("item_bias_sd", generator.item_bias_sd),
      FWLS_CF_KEY("interaction_sd", generator.interaction_sd),
      FWLS_CF_KEY("mean_ratings_per_user", generator.mean_ratings_per_user),
      FWLS_CF_KEY("min_ratings_per_user", generator.min_ratings_per_user),
      FWLS_CF_KEY("max_ratings_per_user", generator.max_ratings_per_user),
      FWLS_CF_KEY("user_count_alpha", generator.user_count_alpha),
      FWLS_CF_KEY("item_popularity_exponent", generator.item_popularity_exponent),
      FWLS_CF_KEY("item_clusters", generator.item_clusters),
      FWLS_CF_KEY("cluster_spread", generator.cluster_spread),
      FWLS_CF_KEY("train_fraction", generator.train_fraction),
      FWLS_CF_KEY("blend_fraction", generator.blend_fraction),
      FWLS_CF_KEY("seed", generator.seed),
      FWLS_CF_KEY("ge_alpha", global_effects.alpha),
      FWLS_CF_KEY("mf_factors", mf.n_factors),
      FWLS_CF_KEY("mf_learn_rate", mf.learn_rate),
      FWLS_CF_KEY("mf_reg", mf.reg),
      FWLS_CF_KEY("mf_epochs", mf.epochs),
      FWLS_CF_KEY("mf_init_sd", mf.init_sd),
      FWLS_CF_KEY("mf_seed", mf.seed),
      FWLS_CF_KEY("knn_k", knn.k),
      FWLS_CF_KEY("knn_min_overlap", knn.min_overlap),
      FWLS_CF_KEY("knn_shrink", knn.shrink),
      FWLS_CF_KEY("cv_folds", blend.folds),
      FWLS_CF_KEY("cv_seed", blend.cv_seed),
      FWLS_CF_KEY("lambda", blend.lambda),
      ConfigKey{"features",
                [](BenchmarkConfig& c, std::string_view v) {
                  c.features.clear();
                  for (auto part : csv::split(v)) c.features.push_back(meta_feature(csv::trim(part)));
                },
                [](const BenchmarkConfig& c) {
                  std::string s;
                  for (const auto& f : c.features) s += (s.empty() ? "" : ",") + f.name;
                  return s;
                }},
  };
  return keys;
}

#undef FWLS_CF_KEY

}  // namespace detail

/// `key = value` lines; `#` starts a comment. Unknown keys are errors so a
/// typo cannot silently fall back to a default.
inline BenchmarkConfig read_config(std::istream& in, BenchmarkConfig c = {}) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = csv::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value", line_no);
    const auto key = csv::trim(body.substr(0, eq));
    const auto value = csv::trim(body.substr(eq + 1));
    const auto& keys = detail::config_keys();
    const auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& k) { return k.name == key; });
    if (it == keys.end())
      throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" +
                           std::string(key) + "'",
                       line_no);
    try {
      it->set(c, value);
    } catch (const ParseError&) {
      throw ParseError("config line " + std::to_string(line_no) + ": bad value for " +
                           std::string(key),
                       line_no);
    }
  }
  if (c.features.empty() || c.features.front().id != MetaFeatureId::Constant)
    throw ContractViolation("config: features must start with const");
  return c;
}

inline void write_config(std::ostream& out, const BenchmarkConfig& c) {
  for (const auto& k : detail::config_keys()) out << k.name << " = " << k.get(c) << '\n';
}

struct StrategyResult {
  std::string name;
  double blend_oos_rmse = 0.0;  // base models: plain blend-split RMSE; blenders: k-fold CV
  double test_rmse = 0.0;
};

struct StrategyReport {
  std::vector<StrategyResult> strategies;  // a..e in order, then fwls_all
  cv::CvReport forward;
  std::vector<std::size_t> merged_features;

  const StrategyResult& get(std::string_view prefix) const {
    for (const auto& s : strategies)
      if (s.name.starts_with(prefix)) return s;
    throw ContractViolation("benchmark: no strategy " + std::string(prefix));
  }
};

namespace detail {

inline std::vector<double> predict_rows(const BlendCoefficients& c, const StackedDataset& ds,
                                        std::span<const std::size_t> features) {
  std::vector<double> out(ds.n_rows()), fsub(features.size());
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    const auto f = ds.f(r);
    for (std::size_t s = 0; s < features.size(); ++s) fsub[s] = f[features[s]];
    out[r] = blend_predict(c, ds.g(r), fsub);
  }
  return out;
}

inline double fit_and_score(const StackedDataset& train, const StackedDataset& test,
                            std::span<const std::size_t> features, double lambda) {
  const SolvedBlend fit = solve(select_features(accumulate(train), features), lambda);
  return cv::rmse(predict_rows(fit.coeffs, test, features), test.targets());
}

inline std::vector<double> column(const StackedDataset& ds, std::size_t model) {
  std::vector<double> out(ds.n_rows());
  for (std::size_t r = 0; r < ds.n_rows(); ++r) out[r] = ds.g(r)[model];
  return out;
}

}  // namespace detail

/// Strategies (a)-(e) on an assembled blend/test pair. Feature 0 of both
/// datasets must be the constant 1.
inline StrategyReport evaluate_strategies(const StackedDataset& blend, const StackedDataset& test,
                                          const BlendConfig& cfg) {
  require(blend.mapping() == test.mapping(), "benchmark: blend and test layouts differ");
  const std::size_t L = blend.n_models(), M = blend.n_features();
  StrategyReport rep;

  // (a) best single model, chosen on the blend split.
  std::size_t best = 0;
  std::vector<double> single_blend(L);
  for (std::size_t i = 0; i < L; ++i) {
    single_blend[i] = cv::rmse(detail::column(blend, i), blend.targets());
    if (single_blend[i] < single_blend[best]) best = i;
  }
  rep.strategies.push_back({"best_single:" + blend.model_names()[best], single_blend[best],
                            cv::rmse(detail::column(test, best), test.targets())});

  // (b) uniform average.
  auto average = [L](const StackedDataset& ds) {
    std::vector<double> out(ds.n_rows());
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
      const auto g = ds.g(r);
      out[r] = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(L);
    }
    return out;
  };
  rep.strategies.push_back({"uniform_average", cv::rmse(average(blend), blend.targets()),
                            cv::rmse(average(test), test.targets())});

  const cv::FoldPlan plan = cv::make_folds(blend.n_rows(), cfg.folds, cfg.cv_seed);
  const cv::FoldStatistics stats(blend, plan);

  // (c) standard stacking: the constant feature alone.
  const std::vector<std::size_t> constant{0};
  rep.strategies.push_back({"stacking", stats.rmse(constant, cfg.lambda),
                            detail::fit_and_score(blend, test, constant, cfg.lambda)});

  // (d) meta-features as extra additive inputs.
  for (std::size_t j = 1; j < M; ++j) rep.merged_features.push_back(j);
  {
    const StackedDataset mb = cv::merged_inputs(blend, rep.merged_features);
    const StackedDataset mt = cv::merged_inputs(test, rep.merged_features);
    rep.strategies.push_back({"merged_baseline", cv::FoldStatistics(mb, plan).rmse(constant, cfg.lambda),
                              detail::fit_and_score(mb, mt, constant, cfg.lambda)});
  }

  // (e) FWLS over forward-selected meta-features, tried in configured order.
  rep.forward = cv::forward_select(stats, rep.merged_features, cfg.lambda);
  rep.strategies.push_back({"fwls_forward", rep.forward.final_rmse(),
                            detail::fit_and_score(blend, test, rep.forward.selected, cfg.lambda)});

  std::vector<std::size_t> all(M);
  std::iota(all.begin(), all.end(), 0);
  rep.strategies.push_back({"fwls_all", stats.rmse(all, cfg.lambda),
                            detail::fit_and_score(blend, test, all, cfg.lambda)});
  return rep;
}

struct ReliabilityCorrelation {
  std::string pair;       // "a-b": squared error of a minus that of b
  double user_support;    // Pearson rho against log user support
  double item_support;    // ... against log item support
};

struct BaseModelScore {
  std::string name;
  double blend_rmse;
  double test_rmse;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::size_t n_ratings[3] = {0, 0, 0};  // train, blend, test
  std::size_t min_user_ratings = 0, max_user_ratings = 0;
  std::vector<BaseModelScore> models;
  StrategyReport result;
  std::vector<ReliabilityCorrelation> reliability;
  double seconds = 0.0;

  double fwls_gain() const {
    return result.get("stacking").blend_oos_rmse - result.get("fwls_forward").blend_oos_rmse;
  }
  double merged_gain() const {
    return result.get("stacking").blend_oos_rmse - result.get("merged_baseline").blend_oos_rmse;
  }

  void write_csv(std::ostream& out) const {
    out << "strategy,blend_oos_rmse,test_rmse\n";
    for (const auto& s : result.strategies)
      out << fmt::format("{},{:.9f},{:.9f}\n", s.name, s.blend_oos_rmse, s.test_rmse);
  }

  /// Deterministic text summary; wall-clock time is left out on purpose.
  void write_table(std::ostream& out) const {
    const auto& g = config.generator;
    out << fmt::format("# {} users x {} items, seed {}: {} train / {} blend / {} test ratings\n",
                       g.n_users, g.n_items, g.seed, n_ratings[0], n_ratings[1], n_ratings[2]);
    out << fmt::format("# ratings per user: {} .. {}\n\n", min_user_ratings, max_user_ratings);
    out << fmt::format("{:<16}  {:>10}  {:>10}\n", "base model", "blend RMSE", "test RMSE");
    for (const auto& m : models)
      out << fmt::format("{:<16}  {:>10.6f}  {:>10.6f}\n", m.name, m.blend_rmse, m.test_rmse);
    out << '\n'
        << fmt::format("{:<24}  {:>14}  {:>10}\n", "strategy", "blend OOS RMSE", "test RMSE");
    for (const auto& s : result.strategies)
      out << fmt::format("{:<24}  {:>14.6f}  {:>10.6f}\n", s.name, s.blend_oos_rmse, s.test_rmse);
    const double fg = fwls_gain(), mg = merged_gain();
    out << '\n'
        << fmt::format("fwls gain over stacking:   {:.6f}\n", fg)
        << fmt::format("merged gain over stacking: {:.6f} ({:.1f}% of fwls gain)\n", mg,
                       fg != 0.0 ? 100.0 * mg / fg : 0.0);
    out << '\n' << fmt::format("{:<24}  {:>14}  {:>14}\n", "sq-err difference", "rho(user sup)", "rho(item sup)");
    for (const auto& r : reliability)
      out << fmt::format("{:<24}  {:>14.4f}  {:>14.4f}\n", r.pair, r.user_support, r.item_support);
    out << '\n';
    result.forward.write_table(out);
  }
};

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  return sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

/// Base-model predictions (L = 3) and meta-features for one split.
inline StackedDataset assemble(const RatingDataset& data, Split split,
                               const std::vector<std::vector<double>>& preds,
                               const std::vector<std::string>& model_names,
                               const TrainSplit& train,
                               const std::vector<MetaFeatureSpec>& specs) {
  const auto pairs = data.pairs(split);
  std::vector<double> p;
  p.reserve(pairs.size() * preds.size());
  for (std::size_t r = 0; r < pairs.size(); ++r)
    for (const auto& col : preds) p.push_back(col[r]);
  std::vector<std::string> names, ids;
  for (const auto& s : specs) names.push_back(s.name);
  for (const auto& pr : pairs) ids.push_back(fmt::format("{}:{}", pr.user, pr.item));
  return {data.targets(split), std::move(p), compute_meta_features(train, specs, pairs),
          preds.size(), specs.size(), model_names, std::move(names), std::move(ids)};
}

/// Base models trained on train, scored on blend and test.
struct BlendSplits {
  StackedDataset blend, test;
  std::vector<std::vector<double>> blend_preds, test_preds;  // per model
  std::vector<std::string> model_names;
};

inline BlendSplits build_blend_splits(const RatingDataset& data, const BenchmarkConfig& cfg) {
  const TrainSplit train = data.train();
  const GlobalEffects ge(train, cfg.global_effects);
  const MatrixFactorization mf(train, cfg.mf);
  const ItemKnn knn(train, cfg.knn, cfg.global_effects);
  BlendSplits out;
  out.model_names = {"global_effects", "mf", "item_knn"};
  for (Split s : {Split::Blend, Split::Test}) {
    const auto pairs = data.pairs(s);
    auto& preds = s == Split::Blend ? out.blend_preds : out.test_preds;
    preds = {predict_all(ge, pairs), predict_all(mf, pairs), predict_all(knn, pairs)};
  }
  out.blend = assemble(data, Split::Blend, out.blend_preds, out.model_names, train, cfg.features);
  out.test = assemble(data, Split::Test, out.test_preds, out.model_names, train, cfg.features);
  return out;
}

inline BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  BenchmarkReport rep;
  rep.config = cfg;
  const RatingDataset data = generate(cfg.generator);
  data.validate();
  rep.n_ratings[0] = data.count(Split::Train);
  rep.n_ratings[1] = data.count(Split::Blend);
  rep.n_ratings[2] = data.count(Split::Test);
  std::vector<std::size_t> per_user(data.n_users, 0);
  for (const auto& r : data.ratings) ++per_user[r.user];
  rep.min_user_ratings = *std::min_element(per_user.begin(), per_user.end());
  rep.max_user_ratings = *std::max_element(per_user.begin(), per_user.end());

  const BlendSplits splits = build_blend_splits(data, cfg);
  const StackedDataset& blend = splits.blend;
  const auto& names = splits.model_names;
  for (std::size_t i = 0; i < names.size(); ++i)
    rep.models.push_back({names[i], cv::rmse(splits.blend_preds[i], blend.targets()),
                          cv::rmse(splits.test_preds[i], splits.test.targets())});

  rep.result = evaluate_strategies(blend, splits.test, cfg.blend);

  // Does each model pair's relative accuracy drift with support?
  const SupportStatistics support(data.train());
  const auto pairs = data.pairs(Split::Blend);
  std::vector<double> lu, li;
  for (const auto& p : pairs) {
    lu.push_back(support.value(MetaFeatureId::LogUserSupport, p.user, p.item));
    li.push_back(support.value(MetaFeatureId::LogItemSupport, p.user, p.item));
  }
  for (std::size_t a = 0; a < names.size(); ++a)
    for (std::size_t b = a + 1; b < names.size(); ++b) {
      std::vector<double> d(pairs.size());
      for (std::size_t r = 0; r < pairs.size(); ++r) {
        const double ea = splits.blend_preds[a][r] - blend.y(r);
        const double eb = splits.blend_preds[b][r] - blend.y(r);
        d[r] = ea * ea - eb * eb;
      }
      rep.reliability.push_back({names[a] + "-" + names[b], pearson(d, lu), pearson(d, li)});
    }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace fwls::cf

#endif  // FWLS_CF_BENCHMARK_HPP
