#ifndef FWLS_CF_META_FEATURES_HPP
#define FWLS_CF_META_FEATURES_HPP

// Support and spread meta-features computed from train ratings only.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fwls/cf/ratings.hpp"
#include "fwls/error.hpp"

namespace fwls::cf {

enum class MetaFeatureId : int {
  Constant = 1,
  LogItemSupport = 2,
  LogUserSupport = 3,
  SupportProduct = 4,  // LogItemSupport * LogUserSupport
  UserStdev = 5,
  ItemStdev = 6,
  UserAvgItemSupport = 7,  // mean log item support over the user's items
};

struct MetaFeatureSpec {
  std::string name;
  MetaFeatureId id;
};

inline constexpr std::array<std::string_view, 7> kMetaFeatureNames = {
    "const",      "log_item_support", "log_user_support",     "support_product",
    "user_stdev", "item_stdev",       "user_avg_item_support"};

inline MetaFeatureSpec meta_feature(int id) {
  if (id < 1 || id > 7)
    throw ContractViolation("meta-feature: unknown id " + std::to_string(id));
  return {std::string(kMetaFeatureNames[id - 1]), static_cast<MetaFeatureId>(id)};
}

/// Accepts an id ("3") or a name ("log_user_support").
inline MetaFeatureSpec meta_feature(std::string_view key) {
  for (int id = 1; id <= 7; ++id)
    if (key == kMetaFeatureNames[id - 1] || key == std::to_string(id)) return meta_feature(id);
  throw ContractViolation("meta-feature: unknown spec '" + std::string(key) + "'");
}

inline std::vector<MetaFeatureSpec> all_meta_features() {
  std::vector<MetaFeatureSpec> out;
  for (int id = 1; id <= 7; ++id) out.push_back(meta_feature(id));
  return out;
}

/// Per-user and per-item train statistics behind the features.
class SupportStatistics {
 public:
  explicit SupportStatistics(const TrainSplit& t)
      : user_log_n_(t.n_users, 0.0), item_log_n_(t.n_items, 0.0),
        user_sd_(t.n_users, 0.0), item_sd_(t.n_items, 0.0), user_avg_item_(t.n_users, 0.0) {
    std::vector<double> un(t.n_users, 0.0), us(t.n_users, 0.0), uss(t.n_users, 0.0);
    std::vector<double> in(t.n_items, 0.0), is(t.n_items, 0.0), iss(t.n_items, 0.0);
    for (const auto& r : t.ratings) {
      un[r.user] += 1;
      us[r.user] += r.value;
      in[r.item] += 1;
      is[r.item] += r.value;
    }
    // Two-pass variance about the mean.
    for (const auto& r : t.ratings) {
      const double du = r.value - us[r.user] / un[r.user];
      const double di = r.value - is[r.item] / in[r.item];
      uss[r.user] += du * du;
      iss[r.item] += di * di;
    }
    for (std::uint32_t u = 0; u < t.n_users; ++u) {
      user_log_n_[u] = std::log(un[u] + 1.0);
      if (un[u] >= 2) user_sd_[u] = std::sqrt(uss[u] / (un[u] - 1));
    }
    for (std::uint32_t i = 0; i < t.n_items; ++i) {
      item_log_n_[i] = std::log(in[i] + 1.0);
      if (in[i] >= 2) item_sd_[i] = std::sqrt(iss[i] / (in[i] - 1));
    }
    for (const auto& r : t.ratings) user_avg_item_[r.user] += item_log_n_[r.item];
    for (std::uint32_t u = 0; u < t.n_users; ++u)
      if (un[u] > 0) user_avg_item_[u] /= un[u];
  }

  double value(MetaFeatureId id, std::uint32_t u, std::uint32_t i) const {
    const double lu = u < user_log_n_.size() ? user_log_n_[u] : 0.0;
    const double li = i < item_log_n_.size() ? item_log_n_[i] : 0.0;
    switch (id) {
      case MetaFeatureId::Constant: return 1.0;
      case MetaFeatureId::LogItemSupport: return li;
      case MetaFeatureId::LogUserSupport: return lu;
      case MetaFeatureId::SupportProduct: return li * lu;
      case MetaFeatureId::UserStdev: return u < user_sd_.size() ? user_sd_[u] : 0.0;
      case MetaFeatureId::ItemStdev: return i < item_sd_.size() ? item_sd_[i] : 0.0;
      case MetaFeatureId::UserAvgItemSupport:
        return u < user_avg_item_.size() ? user_avg_item_[u] : 0.0;
    }
    throw ContractViolation("meta-feature: unknown id " + std::to_string(static_cast<int>(id)));
  }

 private:
  std::vector<double> user_log_n_, item_log_n_, user_sd_, item_sd_, user_avg_item_;
};

/// Row-major (pairs x specs) matrix.
inline std::vector<double> compute_meta_features(const TrainSplit& train,
                                                 std::span<const MetaFeatureSpec> specs,
                                                 std::span<const UserItem> pairs) {
  const SupportStatistics stats(train);
  std::vector<double> out;
  out.reserve(pairs.size() * specs.size());
  for (const auto& p : pairs)
    for (const auto& s : specs) out.push_back(stats.value(s.id, p.user, p.item));
  return out;
}

}  // namespace fwls::cf

#endif  // FWLS_CF_META_FEATURES_HPP
