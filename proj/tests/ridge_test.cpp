#include <gtest/gtest.h>

#include "fwls/gram.hpp"
#include "fwls/ridge.hpp"
#include "oracle.hpp"

namespace fwls {
namespace {

using testing::random_dataset;

GramState state_from(std::vector<double> lower, std::vector<double> xty, std::size_t L,
                     std::size_t M, double yty = 0.0, std::uint64_t n = 1) {
  GramState gs(DesignMapping(L, M));
  gs.lower = std::move(lower);
  gs.xty = std::move(xty);
  gs.yty = yty;
  gs.n_rows = n;
  return gs;
}

TEST(Solve, ScalarNormalEquation) {
  const auto s = solve(state_from({4.0}, {8.0}, 1, 1, 16.0), 0.0);
  EXPECT_DOUBLE_EQ(s.coeffs.flat()[0], 2.0);
  EXPECT_FALSE(s.jittered());
}

TEST(Solve, DiagonalTwoByTwoByHand) {
  // (2 + 2) v = (2, 4)
  const auto s = solve(state_from({2.0, 0.0, 2.0}, {2.0, 4.0}, 2, 1, 10.0, 3), 2.0);
  EXPECT_DOUBLE_EQ(s.coeffs.flat()[0], 0.5);
  EXPECT_DOUBLE_EQ(s.coeffs.flat()[1], 1.0);
  EXPECT_EQ(s.coeffs.lambda(), 2.0);
}

TEST(Solve, MatchesDenseQrOracle) {
  auto ds = random_dataset({.n = 500, .models = 4, .features = 3}, 21);
  const GramState gs = accumulate(ds);
  for (double lambda : {0.0, 1e-3, 1.0, 50.0}) {
    const auto s = solve(gs, lambda);
    EXPECT_LE(testing::relative_l2(s.coeffs.flat(), testing::ridge_qr(ds, lambda)), 1e-8)
        << "lambda " << lambda;
    EXPECT_LE(s.relative_residual, 1e-8);
  }
}

TEST(Solve, RejectsBadInput) {
  auto gs = state_from({1.0}, {1.0}, 1, 1);
  EXPECT_THROW(solve(gs, -1.0), ContractViolation);
  gs.n_rows = 0;
  EXPECT_THROW(solve(gs, 1.0), ContractViolation);
}

TEST(Solve, JitterRescuesExactCollinearityAtZeroLambda) {
  // Two identical models: A^T A is singular.
  std::vector<double> p;
  auto base = random_dataset({.n = 50, .models = 1, .features = 2}, 22);
  for (std::size_t r = 0; r < base.n_rows(); ++r) {
    p.push_back(base.g(r)[0]);
    p.push_back(base.g(r)[0]);
  }
  StackedDataset dup({base.targets().begin(), base.targets().end()}, p,
                     {base.meta_feats().begin(), base.meta_feats().end()}, 2, 2);
  const GramState gs = accumulate(dup);
  const auto s = solve(gs, 0.0);
  EXPECT_TRUE(s.jittered());
  EXPECT_GT(s.effective_lambda, 0.0);
  EXPECT_EQ(s.coeffs.lambda(), s.effective_lambda);
  // The duplicated pair shares the weight of the single model.
  const auto single = solve(accumulate(base), 0.0);
  EXPECT_NEAR(s.coeffs.weight(0, 0) + s.coeffs.weight(1, 0), single.coeffs.weight(0, 0), 1e-4);
}

TEST(Solve, SingularAfterJitterNamesLambda) {
  const GramState zero = state_from({0.0}, {0.0}, 1, 1, 1.0, 1);
  try {
    solve(zero, 0.0);
    FAIL();
  } catch (const SingularSystem& e) {
    EXPECT_EQ(e.lambda(), 0.0);
    EXPECT_NE(std::string(e.what()).find("lambda"), std::string::npos);
  }
}

TEST(TrainingRmse, PerfectFitIsZero) {
  // y = 2 g0 - g1 exactly.
  auto ds = random_dataset({.n = 30, .models = 2, .features = 1}, 23);
  std::vector<double> y;
  for (std::size_t r = 0; r < ds.n_rows(); ++r) y.push_back(2 * ds.g(r)[0] - ds.g(r)[1]);
  StackedDataset exact(y, {ds.model_preds().begin(), ds.model_preds().end()},
                       {ds.meta_feats().begin(), ds.meta_feats().end()}, 2, 1);
  const auto s = solve(accumulate(exact), 0.0);
  EXPECT_LE(s.train_rmse, 1e-7);
}

TEST(TrainingRmse, ZeroCoefficientsGiveTargetRms) {
  auto ds = random_dataset({.n = 40, .models = 2, .features = 2}, 24);
  const GramState gs = accumulate(ds);
  BlendCoefficients zero(gs.mapping, std::vector<double>(4, 0.0), 0.0);
  EXPECT_NEAR(training_rmse(gs, zero), testing::targets(ds).norm() / std::sqrt(40.0), 1e-12);
  BlendCoefficients wrong(DesignMapping(1, 1), {0.0}, 0.0);
  EXPECT_THROW(training_rmse(gs, wrong), ContractViolation);
}

TEST(TrainingRmse, MatchesRowWiseResiduals) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto ds = random_dataset({.n = 300, .models = 3, .features = 3}, 100 + seed);
    const GramState gs = accumulate(ds);
    const auto s = solve(gs, 0.1);
    double ss = 0.0;
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
      const double e = blend_predict(s.coeffs, ds.g(r), ds.f(r)) - ds.y(r);
      ss += e * e;
    }
    const double direct = std::sqrt(ss / 300.0);
    EXPECT_NEAR(s.train_rmse, direct, 1e-10 * direct);
  }
}

TEST(Invariants, ShrinkageAndLambdaBound) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GramState gs = accumulate(random_dataset({.n = 200, .models = 3, .features = 3}, 200 + seed));
    const double xty_norm = linalg::norm2(gs.xty);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 1e-3, 1e-1, 1.0, 10.0, 1e3, 1e6}) {
      const double norm = linalg::norm2(solve(gs, lambda).coeffs.flat());
      EXPECT_LE(norm, prev * (1 + 1e-12));
      if (lambda > 0) {
        EXPECT_LE(norm, xty_norm / lambda);
      }
      prev = norm;
    }
  }
}

TEST(Invariants, ConstantFeatureOnlyEqualsStandardStacking) {
  auto ds = random_dataset({.n = 400, .models = 5, .features = 1}, 25);
  const auto s = solve(accumulate(ds), 1e-3);
  // Plain ridge of y on (g_1..g_L).
  Eigen::MatrixXd g(400, 5);
  for (Eigen::Index r = 0; r < 400; ++r)
    for (Eigen::Index i = 0; i < 5; ++i) g(r, i) = ds.g(r)[i];
  EXPECT_LE(testing::relative_l2(s.coeffs.flat(), testing::ridge_qr(g, testing::targets(ds), 1e-3)), 1e-8);
}

// ----- Sherman-Morrison

TEST(AddDatapoint, ScalarByHand) {
  InverseState s{linalg::Matrix(1), {8.0}, 0.0, 1, DesignMapping(1, 1)};
  s.inv(0, 0) = 1.0 / 4.0;
  const auto t = add_datapoint(s, std::vector{2.0}, std::vector{1.0}, 3.0);
  // 1/4 - (1/2)^2 / (1 + 1) = 1/8 = 1/(4 + 2^2)
  EXPECT_DOUBLE_EQ(t.inv(0, 0), 1.0 / 8.0);
  EXPECT_DOUBLE_EQ(t.xty[0], 14.0);
  EXPECT_EQ(t.n_rows, 2u);
}

TEST(AddDatapoint, ZeroRowChangesNothing) {
  auto ds = random_dataset({.n = 60, .models = 2, .features = 2}, 26);
  const auto s = make_inverse_state(accumulate(ds), 0.1);
  const auto t = add_datapoint(s, std::vector{0.0, 0.0}, std::vector{1.0, 3.0}, 5.0);
  EXPECT_EQ(t.inv.a, s.inv.a);
  EXPECT_EQ(t.xty, s.xty);
}

TEST(AddDatapoint, InverseIsInverse) {
  auto ds = random_dataset({.n = 100, .models = 3, .features = 2}, 27);
  const GramState gs = accumulate(ds);
  const auto s = make_inverse_state(gs, 0.5);
  linalg::Matrix h = gs.dense();
  for (std::size_t i = 0; i < h.n; ++i) h(i, i) += 0.5;
  for (std::size_t r = 0; r < h.n; ++r)
    for (std::size_t c = 0; c < h.n; ++c) {
      double x = 0.0;
      for (std::size_t k = 0; k < h.n; ++k) x += s.inv(r, k) * h(k, c);
      EXPECT_NEAR(x, r == c ? 1.0 : 0.0, 1e-6);
    }
}

TEST(AddDatapoint, FiftyAddsMatchFromScratch) {
  auto ds = random_dataset({.n = 150, .models = 4, .features = 2}, 28);
  const GramState empty(ds.mapping());
  const GramState first = accumulate(empty, ds.rows(0, 100));
  auto s = make_inverse_state(first, 0.01);
  for (std::size_t r = 100; r < 150; ++r) s = add_datapoint(s, ds.g(r), ds.f(r), ds.y(r));
  const auto v = s.coefficients();
  const auto full = solve(accumulate(ds), 0.01);
  EXPECT_LE(testing::relative_l2(v, testing::to_eigen(full.coeffs.flat())), 1e-8);
  EXPECT_EQ(s.n_rows, 150u);
}

TEST(AddDatapoint, DegenerateDenominator) {
  InverseState s{linalg::Matrix(1), {0.0}, 0.0, 1, DesignMapping(1, 1)};
  s.inv(0, 0) = -0.25;
  EXPECT_THROW(add_datapoint(s, std::vector{2.0}, std::vector{1.0}, 1.0), DegenerateUpdate);
}

// ----- Column extension

// Dense oracle for the blocks: cross = A_old^T A_new, corner = A_new^T A_new.
ColumnBlocks dense_blocks(const StackedDataset& old_ds, const StackedDataset& new_ds,
                          ExtensionKind kind) {
  const Eigen::MatrixXd a_old = testing::dense_design(old_ds);
  const Eigen::MatrixXd a_full = testing::dense_design(new_ds);
  const DesignMapping m = old_ds.mapping();
  const std::size_t d_new = new_column_count(m, kind);
  Eigen::MatrixXd a_new(a_full.rows(), static_cast<Eigen::Index>(d_new));
  for (std::size_t k = 0; k < d_new; ++k)
    a_new.col(static_cast<Eigen::Index>(k)) = a_full.col(static_cast<Eigen::Index>(new_column(m, kind, k)));
  ColumnBlocks b;
  b.kind = kind;
  b.d_old = m.dim();
  b.d_new = d_new;
  b.n_rows = old_ds.n_rows();
  const Eigen::MatrixXd cross = a_old.transpose() * a_new;
  const Eigen::MatrixXd corner = a_new.transpose() * a_new;
  const Eigen::VectorXd nxty = a_new.transpose() * testing::targets(old_ds);
  for (Eigen::Index r = 0; r < cross.rows(); ++r)
    for (Eigen::Index c = 0; c < cross.cols(); ++c) b.cross.push_back(cross(r, c));
  for (Eigen::Index r = 0; r < corner.rows(); ++r)
    for (Eigen::Index c = 0; c < corner.cols(); ++c) b.corner.push_back(corner(r, c));
  b.new_xty.assign(nxty.data(), nxty.data() + nxty.size());
  return b;
}

StackedDataset drop_last_model(const StackedDataset& ds) {
  std::vector<double> p;
  for (std::size_t r = 0; r < ds.n_rows(); ++r)
    p.insert(p.end(), ds.g(r).begin(), ds.g(r).end() - 1);
  return {{ds.targets().begin(), ds.targets().end()}, p,
          {ds.meta_feats().begin(), ds.meta_feats().end()}, ds.n_models() - 1, ds.n_features(),
          {}, {}, ds.row_ids()};
}

TEST(ExtendColumns, NewModelMatchesFreshAccumulation) {
  auto full = random_dataset({.n = 100, .models = 3, .features = 2}, 29);
  auto old = drop_last_model(full);
  const GramState ext =
      extend_columns(accumulate(old), dense_blocks(old, full, ExtensionKind::NewModel));
  const GramState fresh = accumulate(full);
  EXPECT_EQ(ext.mapping, fresh.mapping);
  EXPECT_LE(testing::max_abs_diff(ext, fresh), 1e-12 * fresh.max_abs());
  for (std::size_t c = 0; c < fresh.dim(); ++c)
    EXPECT_NEAR(ext.xty[c], fresh.xty[c], 1e-12 * std::abs(fresh.xty[c]) + 1e-12);
  EXPECT_EQ(ext.n_rows, fresh.n_rows);
  EXPECT_EQ(ext.yty, fresh.yty);
}

TEST(ExtendColumns, NewFeatureMatchesFreshAccumulation) {
  auto full = random_dataset({.n = 100, .models = 2, .features = 3}, 30);
  auto old = full.select_features(std::vector<std::size_t>{0, 1});
  const GramState ext =
      extend_columns(accumulate(old), dense_blocks(old, full, ExtensionKind::NewFeature));
  const GramState fresh = accumulate(full);
  EXPECT_LE(testing::max_abs_diff(ext, fresh), 1e-12 * fresh.max_abs());
}

TEST(ExtendColumns, RowCountAndShapeMismatch) {
  auto full = random_dataset({.n = 20, .models = 4, .features = 2}, 31);
  auto old = drop_last_model(full);
  auto blocks = dense_blocks(old, full, ExtensionKind::NewModel);
  const GramState gs = accumulate(old);
  auto wrong_n = blocks;
  wrong_n.n_rows = 19;
  EXPECT_THROW(extend_columns(gs, wrong_n), AlignmentMismatch);
  auto wrong_kind = blocks;
  wrong_kind.kind = ExtensionKind::NewFeature;  // would need L=3 new columns
  EXPECT_THROW(extend_columns(gs, wrong_kind), ContractViolation);
}

TEST(ExtendColumns, DuplicateModelStillSolvesWithRidge) {
  auto old = random_dataset({.n = 80, .models = 2, .features = 2}, 32);
  std::vector<double> p;
  for (std::size_t r = 0; r < old.n_rows(); ++r) {
    p.insert(p.end(), old.g(r).begin(), old.g(r).end());
    p.push_back(old.g(r)[0]);
  }
  StackedDataset full({old.targets().begin(), old.targets().end()}, p,
                      {old.meta_feats().begin(), old.meta_feats().end()}, 3, 2);
  const GramState ext =
      extend_columns(accumulate(old), dense_blocks(old, full, ExtensionKind::NewModel));
  const auto s = solve(ext, 0.1);
  EXPECT_FALSE(s.jittered());
  // Duplicated columns split their weight evenly.
  EXPECT_NEAR(s.coeffs.weight(0, 1), s.coeffs.weight(2, 1), 1e-9);
}

TEST(ExtendSolve, BorderedFactorMatchesFreshSolve) {
  for (auto kind : {ExtensionKind::NewModel, ExtensionKind::NewFeature}) {
    auto full = random_dataset({.n = 300, .models = 4, .features = 3}, 33);
    auto old = kind == ExtensionKind::NewModel
                   ? drop_last_model(full)
                   : full.select_features(std::vector<std::size_t>{0, 1});
    const auto prev = solve(accumulate(old), 0.05);
    const GramState ext = extend_columns(accumulate(old), dense_blocks(old, full, kind));
    const auto bordered = extend_solve(prev, ext, kind);
    const auto fresh = solve(accumulate(full), 0.05);
    EXPECT_LE(testing::relative_l2(bordered.coeffs.flat(), testing::to_eigen(fresh.coeffs.flat())), 1e-10);
    EXPECT_LE(bordered.relative_residual, 1e-8);
    // The extended factor can be extended again.
    ASSERT_TRUE(bordered.factor_cache.has_value());
    EXPECT_EQ(bordered.factor_cache->order.size(), ext.dim());
  }
}

}  // namespace
}  // namespace fwls
