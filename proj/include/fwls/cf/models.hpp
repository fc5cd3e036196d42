#ifndef FWLS_CF_MODELS_HPP
#define FWLS_CF_MODELS_HPP

// Toy base models for the benchmark. Every trainer takes a TrainSplit, so
// blend and test targets are out of reach by construction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fwls/cf/ratings.hpp"
#include "fwls/error.hpp"

namespace fwls::cf {

inline double clamp_rating(double r) { return std::clamp(r, 1.0, 5.0); }

struct GlobalEffectsConfig {
  double alpha = 25.0;
};

struct MfConfig {
  std::uint32_t n_factors = 24;
  double learn_rate = 0.01;
  double reg = 0.015;
  std::uint32_t epochs = 40;
  double init_sd = 0.1;
  std::uint64_t seed = 7;
};

struct KnnConfig {
  std::uint32_t k = 30;
  std::uint32_t min_overlap = 3;
  double shrink = 100.0;
};

/// mu + shrunken user offset + shrunken item offset (item fit on the residual
/// after the user offset).
class GlobalEffects {
 public:
  using Config = GlobalEffectsConfig;

  GlobalEffects() = default;
  GlobalEffects(const TrainSplit& t, Config cfg = {})
      : user_(t.n_users, 0.0), item_(t.n_items, 0.0) {
    if (t.ratings.empty()) throw ContractViolation("global effects: empty train split");
    if (!(cfg.alpha >= 0.0)) throw ContractViolation("global effects: alpha must be >= 0");
    double s = 0.0;
    for (const auto& r : t.ratings) s += r.value;
    mu_ = s / static_cast<double>(t.ratings.size());

    std::vector<double> sum(t.n_users, 0.0), n(t.n_users, 0.0);
    for (const auto& r : t.ratings) {
      sum[r.user] += r.value - mu_;
      n[r.user] += 1.0;
    }
    for (std::uint32_t u = 0; u < t.n_users; ++u)
      if (n[u] + cfg.alpha > 0.0) user_[u] = sum[u] / (n[u] + cfg.alpha);

    sum.assign(t.n_items, 0.0);
    n.assign(t.n_items, 0.0);
    for (const auto& r : t.ratings) {
      sum[r.item] += r.value - mu_ - user_[r.user];
      n[r.item] += 1.0;
    }
    for (std::uint32_t i = 0; i < t.n_items; ++i)
      if (n[i] + cfg.alpha > 0.0) item_[i] = sum[i] / (n[i] + cfg.alpha);
  }

  double mu() const { return mu_; }
  double user_offset(std::uint32_t u) const { return u < user_.size() ? user_[u] : 0.0; }
  double item_offset(std::uint32_t i) const { return i < item_.size() ? item_[i] : 0.0; }

  double predict(std::uint32_t u, std::uint32_t i) const {
    return clamp_rating(mu_ + user_offset(u) + item_offset(i));
  }

 private:
  double mu_ = 0.0;
  std::vector<double> user_, item_;
};

/// Biased matrix factorization, r ~ mu + b_u + b_i + p_u . q_i, fit by SGD
/// over a per-epoch shuffle drawn from the seed.
class MatrixFactorization {
 public:
  using Config = MfConfig;

  MatrixFactorization(const TrainSplit& t, Config cfg = {})
      : F_(cfg.n_factors),
        bu_(t.n_users, 0.0),
        bi_(t.n_items, 0.0),
        p_(std::size_t(t.n_users) * cfg.n_factors),
        q_(std::size_t(t.n_items) * cfg.n_factors) {
    if (cfg.n_factors < 1) throw ContractViolation("mf: need at least one factor");
    if (t.ratings.empty()) throw ContractViolation("mf: empty train split");
    Rng rng(cfg.seed);
    for (double& x : p_) x = cfg.init_sd * rng.normal();
    for (double& x : q_) x = cfg.init_sd * rng.normal();
    double s = 0.0;
    for (const auto& r : t.ratings) s += r.value;
    mu_ = s / static_cast<double>(t.ratings.size());

    std::vector<std::uint32_t> order(t.ratings.size());
    for (std::uint32_t k = 0; k < order.size(); ++k) order[k] = k;
    const double lr = cfg.learn_rate, reg = cfg.reg;
    for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      rng.shuffle(order);
      for (std::uint32_t k : order) {
        const Rating& r = t.ratings[k];
        double* pu = &p_[std::size_t(r.user) * F_];
        double* qi = &q_[std::size_t(r.item) * F_];
        const double e = r.value - raw(r.user, r.item);
        bu_[r.user] += lr * (e - reg * bu_[r.user]);
        bi_[r.item] += lr * (e - reg * bi_[r.item]);
        for (std::uint32_t f = 0; f < F_; ++f) {
          const double pf = pu[f];
          pu[f] += lr * (e * qi[f] - reg * pf);
          qi[f] += lr * (e * pf - reg * qi[f]);
        }
      }
      if (!finite_parameters())
        throw TrainingDiverged("mf: non-finite parameter after epoch " + std::to_string(epoch),
                               static_cast<int>(epoch));
    }
  }

  std::uint32_t n_factors() const { return F_; }
  std::span<const double> user_vector(std::uint32_t u) const {
    return {p_.data() + std::size_t(u) * F_, F_};
  }
  std::span<const double> item_vector(std::uint32_t i) const {
    return {q_.data() + std::size_t(i) * F_, F_};
  }

  double predict(std::uint32_t u, std::uint32_t i) const { return clamp_rating(raw(u, i)); }

 private:
  double raw(std::uint32_t u, std::uint32_t i) const {
    double s = mu_ + bu_[u] + bi_[i];
    const double* pu = &p_[std::size_t(u) * F_];
    const double* qi = &q_[std::size_t(i) * F_];
    for (std::uint32_t f = 0; f < F_; ++f) s += pu[f] * qi[f];
    return s;
  }

  bool finite_parameters() const {
    auto ok = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return ok(bu_) && ok(bi_) && ok(p_) && ok(q_);
  }

  std::uint32_t F_;
  double mu_ = 0.0;
  std::vector<double> bu_, bi_, p_, q_;
};

/// Item-item neighbourhood model: Pearson correlation of user-mean-centred
/// ratings over co-raters, shrunk by n / (n + beta); prediction is the user
/// mean plus a similarity-weighted average of the user's centred ratings on
/// the k most similar rated items.
class ItemKnn {
 public:
  using Config = KnnConfig;

  ItemKnn(const TrainSplit& t, Config cfg = {}, GlobalEffects::Config ge = {})
      : cfg_(cfg), n_items_(t.n_items), fallback_(t, ge), by_user_(t.n_users),
        user_mean_(t.n_users, 0.0), sim_(std::size_t(t.n_items) * t.n_items, 0.0) {
    if (cfg.k < 1) throw ContractViolation("knn: k must be >= 1");
    for (const auto& r : t.ratings) {
      by_user_[r.user].push_back({r.item, r.value});
      user_mean_[r.user] += r.value;
    }
    for (std::uint32_t u = 0; u < t.n_users; ++u) {
      auto& rated = by_user_[u];
      if (rated.empty()) continue;
      user_mean_[u] /= static_cast<double>(rated.size());
      for (auto& e : rated) e.centred = e.value - user_mean_[u];
      std::sort(rated.begin(), rated.end(), [](const Entry& a, const Entry& b) { return a.item < b.item; });
    }
    build_similarities();
  }

  double similarity(std::uint32_t i, std::uint32_t j) const {
    return sim_[std::size_t(i) * n_items_ + j];
  }

  /// Number of neighbours that would contribute to predict(u, i).
  std::size_t neighbour_count(std::uint32_t u, std::uint32_t i) const {
    return neighbours(u, i).size();
  }

  double predict(std::uint32_t u, std::uint32_t i) const {
    const auto nb = neighbours(u, i);
    if (nb.empty()) return fallback_.predict(u, i);
    double num = 0.0, den = 0.0;
    for (const auto& [s, centred] : nb) {
      num += s * centred;
      den += s;
    }
    return clamp_rating(user_mean_[u] + num / den);
  }

 private:
  struct Entry {
    std::uint32_t item;
    double value;
    double centred = 0.0;
  };

  std::vector<std::pair<double, double>> neighbours(std::uint32_t u, std::uint32_t i) const {
    std::vector<std::pair<double, double>> nb;
    if (u >= by_user_.size() || i >= n_items_) return nb;
    for (const auto& e : by_user_[u]) {
      if (e.item == i) continue;
      const double s = similarity(i, e.item);
      if (s > 0.0) nb.emplace_back(s, e.centred);
    }
    if (nb.size() > cfg_.k) {
      std::partial_sort(nb.begin(), nb.begin() + cfg_.k, nb.end(),
                        [](const auto& a, const auto& b) { return a.first > b.first; });
      nb.resize(cfg_.k);
    }
    return nb;
  }

  void build_similarities() {
    const std::size_t n = n_items_;
    // Upper triangle sums over co-raters: xy, xx, yy, count.
    std::vector<double> sxy(n * n, 0.0), sxx(n * n, 0.0), syy(n * n, 0.0);
    std::vector<std::uint32_t> cnt(n * n, 0);
    for (const auto& rated : by_user_)
      for (std::size_t a = 0; a < rated.size(); ++a)
        for (std::size_t b = a + 1; b < rated.size(); ++b) {
          const std::size_t idx = std::size_t(rated[a].item) * n + rated[b].item;
          const double x = rated[a].centred, y = rated[b].centred;
          sxy[idx] += x * y;
          sxx[idx] += x * x;
          syy[idx] += y * y;
          ++cnt[idx];
        }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const std::size_t idx = i * n + j;
        double s = 0.0;
        if (cnt[idx] >= cfg_.min_overlap && sxx[idx] > 0.0 && syy[idx] > 0.0) {
          const double c = cnt[idx];
          s = sxy[idx] / std::sqrt(sxx[idx] * syy[idx]) * c / (c + cfg_.shrink);
        }
        sim_[idx] = s;
        sim_[j * n + i] = s;
      }
  }

  Config cfg_;
  std::uint32_t n_items_;
  GlobalEffects fallback_;
  std::vector<std::vector<Entry>> by_user_;
  std::vector<double> user_mean_;
  std::vector<double> sim_;
};

template <typename Model>
std::vector<double> predict_all(const Model& m, std::span<const UserItem> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(m.predict(p.user, p.item));
  return out;
}

}  // namespace fwls::cf

#endif  // FWLS_CF_MODELS_HPP
