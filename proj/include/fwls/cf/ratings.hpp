#ifndef FWLS_CF_RATINGS_HPP
#define FWLS_CF_RATINGS_HPP

// Rating data for the collaborative-filtering benchmark: a seeded
// latent-factor generator with heavy-tailed user activity and item
// popularity, the train/blend/test split, and a plain CSV reader.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "fwls/csv.hpp"
#include "fwls/cv.hpp"
#include "fwls/error.hpp"

namespace fwls::cf {

/// mt19937_64 with distribution transforms written out, so a seed yields the
/// same stream with every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform in (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t below(std::uint64_t bound) { return cv::uniform_below(engine_, bound); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class Split : std::uint8_t { Train = 0, Blend = 1, Test = 2 };

struct Rating {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double value = 0.0;
  Split split = Split::Train;
};

struct UserItem {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
};

/// The only view of the data base models and meta-features are given: train
/// ratings and the id ranges. Blend and test targets never reach them.
struct TrainSplit {
  std::uint32_t n_users = 0;
  std::uint32_t n_items = 0;
  std::vector<Rating> ratings;
};

struct RatingDataset {
  std::uint32_t n_users = 0;
  std::uint32_t n_items = 0;
  std::vector<Rating> ratings;

  TrainSplit train() const {
    TrainSplit t{n_users, n_items, {}};
    for (const auto& r : ratings)
      if (r.split == Split::Train) t.ratings.push_back(r);
    return t;
  }

  std::vector<UserItem> pairs(Split s) const {
    std::vector<UserItem> out;
    for (const auto& r : ratings)
      if (r.split == s) out.push_back({r.user, r.item});
    return out;
  }

  std::vector<double> targets(Split s) const {
    std::vector<double> out;
    for (const auto& r : ratings)
      if (r.split == s) out.push_back(r.value);
    return out;
  }

  std::size_t count(Split s) const {
    return static_cast<std::size_t>(std::count_if(
        ratings.begin(), ratings.end(), [s](const Rating& r) { return r.split == s; }));
  }

  /// Throws ContractViolation if a (user, item) pair repeats, an id is out of
  /// range, a value leaves [1, 5], or some user or item has no train rating.
  void validate() const {
    std::unordered_set<std::uint64_t> seen;
    std::vector<bool> user_train(n_users, false), item_train(n_items, false);
    for (const auto& r : ratings) {
      if (r.user >= n_users || r.item >= n_items)
        throw ContractViolation("ratings: id out of range");
      if (!(r.value >= 1.0 && r.value <= 5.0))
        throw ContractViolation("ratings: value outside [1, 5]");
      if (!seen.insert((std::uint64_t(r.user) << 32) | r.item).second)
        throw ContractViolation("ratings: duplicate (user " + std::to_string(r.user) +
                                ", item " + std::to_string(r.item) + ")");
      if (r.split == Split::Train) {
        user_train[r.user] = true;
        item_train[r.item] = true;
      }
    }
    for (std::uint32_t u = 0; u < n_users; ++u)
      if (!user_train[u]) throw ContractViolation("ratings: user " + std::to_string(u) + " has no train rating");
    for (std::uint32_t i = 0; i < n_items; ++i)
      if (!item_train[i]) throw ContractViolation("ratings: item " + std::to_string(i) + " has no train rating");
  }
};

struct GeneratorConfig {
  std::uint32_t n_users = 2000;
  std::uint32_t n_items = 500;
  std::uint32_t n_factors = 8;
  double noise_sd = 0.5;
  double global_mean = 3.6;
  double user_bias_sd = 0.35;
  double item_bias_sd = 0.3;
  double interaction_sd = 0.6;  // sd of p_u . q_i
  // Sparsity pattern: per-user counts ~ Pareto(user_count_alpha) rescaled to
  // the requested mean and clamped; item popularity ~ (rank + 10)^-exponent.
  double mean_ratings_per_user = 50.0;
  std::uint32_t min_ratings_per_user = 3;
  std::uint32_t max_ratings_per_user = 400;
  double user_count_alpha = 1.1;
  double item_popularity_exponent = 0.9;
  // Items share latent vectors within clusters when > 0.
  std::uint32_t item_clusters = 0;
  double cluster_spread = 0.1;
  double train_fraction = 0.8;
  double blend_fraction = 0.1;
  std::uint64_t seed = 1;
};

namespace detail {

/// Ratings per user: min * x^s for Pareto draws x >= 1, with the exponent s
/// tuned so the clamped counts average close to the requested mean. The
/// minimum stays put, so the spread is as wide as the clamp allows.
inline std::vector<std::uint32_t> user_counts(const GeneratorConfig& c, Rng& rng) {
  const std::uint32_t hi = std::min(c.max_ratings_per_user, c.n_items);
  const std::uint32_t lo = std::max<std::uint32_t>(1, std::min(c.min_ratings_per_user, hi));
  std::vector<double> raw(c.n_users);
  for (double& x : raw) x = std::pow(rng.uniform(), -1.0 / c.user_count_alpha);
  auto counts_for = [&](double s) {
    std::vector<std::uint32_t> out(raw.size());
    for (std::size_t u = 0; u < raw.size(); ++u)
      out[u] = static_cast<std::uint32_t>(
          std::clamp(std::round(lo * std::pow(raw[u], s)), double(lo), double(hi)));
    return out;
  };
  auto mean_of = [&](double s) {
    double sum = 0.0;
    for (auto n : counts_for(s)) sum += n;
    return sum / static_cast<double>(raw.size());
  };
  double a = 0.0, b = 1.0;
  while (mean_of(b) < c.mean_ratings_per_user && b < 64.0) b *= 2.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (a + b);
    (mean_of(mid) < c.mean_ratings_per_user ? a : b) = mid;
  }
  return counts_for(b);
}

}  // namespace detail

/// Ratings r = clip(mu + b_u + b_i + p_u . q_i + eps, 1, 5) over a sparse
/// heavy-tailed pattern, split train/blend/test per user in fixed proportions
/// with every user and item keeping at least one train rating.
inline RatingDataset generate(const GeneratorConfig& c) {
  if (c.n_users == 0 || c.n_items == 0)
    throw ContractViolation("generate: need at least one user and one item");
  if (c.train_fraction <= 0.0 || c.train_fraction + c.blend_fraction > 1.0)
    throw ContractViolation("generate: bad split fractions");
  Rng rng(c.seed);
  const std::uint32_t F = c.n_factors;
  const double factor_sd = F ? std::pow(c.interaction_sd * c.interaction_sd / F, 0.25) : 0.0;

  std::vector<double> bu(c.n_users), bi(c.n_items), p(std::size_t(c.n_users) * F),
      q(std::size_t(c.n_items) * F);
  for (double& x : bu) x = c.user_bias_sd * rng.normal();
  for (double& x : bi) x = c.item_bias_sd * rng.normal();
  for (double& x : p) x = factor_sd * rng.normal();
  if (c.item_clusters > 0) {
    std::vector<double> centers(std::size_t(c.item_clusters) * F);
    for (double& x : centers) x = factor_sd * rng.normal();
    for (std::uint32_t i = 0; i < c.n_items; ++i) {
      const std::size_t k = i % c.item_clusters;
      for (std::uint32_t f = 0; f < F; ++f)
        q[i * F + f] = centers[k * F + f] + c.cluster_spread * factor_sd * rng.normal();
    }
  } else {
    for (double& x : q) x = factor_sd * rng.normal();
  }

  // Popularity by a random rank permutation so item id carries no signal.
  std::vector<std::uint32_t> rank(c.n_items);
  for (std::uint32_t i = 0; i < c.n_items; ++i) rank[i] = i;
  rng.shuffle(rank);
  std::vector<double> log_weight(c.n_items);
  for (std::uint32_t i = 0; i < c.n_items; ++i)
    log_weight[i] = -c.item_popularity_exponent * std::log(rank[i] + 10.0);

  const auto counts = detail::user_counts(c, rng);
  RatingDataset ds{c.n_users, c.n_items, {}};
  std::vector<std::pair<double, std::uint32_t>> keys(c.n_items);
  std::vector<bool> item_has_train(c.n_items, false);
  for (std::uint32_t u = 0; u < c.n_users; ++u) {
    // Weighted sampling without replacement: largest log(U) / w.
    for (std::uint32_t i = 0; i < c.n_items; ++i)
      keys[i] = {std::log(rng.uniform()) / std::exp(log_weight[i]), i};
    const std::uint32_t n = counts[u];
    std::partial_sort(keys.begin(), keys.begin() + n, keys.end(),
                      [](const auto& a, const auto& b) {
                        return a.first > b.first || (a.first == b.first && a.second < b.second);
                      });
    const std::size_t first = ds.ratings.size();
    for (std::uint32_t k = 0; k < n; ++k) {
      const std::uint32_t i = keys[k].second;
      double dotp = 0.0;
      for (std::uint32_t f = 0; f < F; ++f) dotp += p[u * F + f] * q[i * F + f];
      const double eps = c.noise_sd > 0.0 ? c.noise_sd * rng.normal() : 0.0;
      ds.ratings.push_back(
          {u, i, std::clamp(c.global_mean + bu[u] + bi[i] + dotp + eps, 1.0, 5.0), Split::Train});
    }
    // Stratified per user: exact proportions, at least one train rating.
    const auto n_train = std::max<std::size_t>(1, std::lround(c.train_fraction * n));
    const auto n_blend = std::min<std::size_t>(n - n_train, std::lround(c.blend_fraction * n));
    std::vector<Split> labels(n, Split::Test);
    std::fill_n(labels.begin(), n_train, Split::Train);
    std::fill_n(labels.begin() + static_cast<std::ptrdiff_t>(n_train), n_blend, Split::Blend);
    rng.shuffle(labels);
    for (std::uint32_t k = 0; k < n; ++k) {
      ds.ratings[first + k].split = labels[k];
      if (labels[k] == Split::Train) item_has_train[ds.ratings[first + k].item] = true;
    }
  }
  // An item whose ratings all landed outside train gets its first one moved in.
  for (auto& r : ds.ratings) {
    if (item_has_train[r.item]) continue;
    r.split = Split::Train;
    item_has_train[r.item] = true;
  }
  // Items nobody drew get one rating from a random user.
  for (std::uint32_t i = 0; i < c.n_items; ++i) {
    if (item_has_train[i]) continue;
    std::uint32_t u = static_cast<std::uint32_t>(rng.below(c.n_users));
    double dotp = 0.0;
    for (std::uint32_t f = 0; f < F; ++f) dotp += p[u * F + f] * q[i * F + f];
    ds.ratings.push_back(
        {u, i, std::clamp(c.global_mean + bu[u] + bi[i] + dotp, 1.0, 5.0), Split::Train});
    item_has_train[i] = true;
  }
  return ds;
}

/// Reads `user,item,rating[,split]` with a header line. Ids are dense
/// non-negative integers; split is train/blend/test (default train).
inline RatingDataset read_ratings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("ratings csv: empty input", 1);
  const auto header = csv::split(line);
  const bool has_split = header.size() == 4;
  if (header.size() < 3 || header.size() > 4 || csv::trim(header[0]) != "user" ||
      csv::trim(header[1]) != "item" || csv::trim(header[2]) != "rating")
    throw ParseError("ratings csv: header must be 'user,item,rating[,split]'", 1);
  RatingDataset ds;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != header.size())
      throw ParseError("line " + std::to_string(line_no) + ": wrong field count", line_no);
    const double u = csv::parse_number(cells[0], line_no, 1);
    const double i = csv::parse_number(cells[1], line_no, 2);
    if (u < 0 || i < 0 || u != std::floor(u) || i != std::floor(i) || u > 4e9 || i > 4e9)
      throw ParseError("line " + std::to_string(line_no) + ": ids must be non-negative integers",
                       line_no);
    Rating r{static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(i),
             csv::parse_number(cells[2], line_no, 3), Split::Train};
    if (has_split) {
      const auto s = csv::trim(cells[3]);
      if (s == "train") r.split = Split::Train;
      else if (s == "blend") r.split = Split::Blend;
      else if (s == "test") r.split = Split::Test;
      else throw ParseError("line " + std::to_string(line_no) + ": unknown split", line_no, 4);
    }
    ds.n_users = std::max(ds.n_users, r.user + 1);
    ds.n_items = std::max(ds.n_items, r.item + 1);
    ds.ratings.push_back(r);
  }
  return ds;
}

}  // namespace fwls::cf

#endif  // FWLS_CF_RATINGS_HPP
