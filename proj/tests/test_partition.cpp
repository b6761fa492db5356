#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "csddp/errors.hpp"
#include "csddp/partition.hpp"

using namespace csddp;

namespace {

Eigen::MatrixXd column(std::initializer_list<double> values) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

double at(const LocalAffineModel& model, double x) { return model.evaluate(std::span<const double>(&x, 1)); }

}  // namespace

TEST(Partition, EightPointsFourStrips) {
  // Shuffled on purpose: assignment must not depend on input order.
  const Eigen::MatrixXd pts = column({5, 1, 8, 3, 2, 7, 4, 6});
  const Partition p = Partition::build(pts, {4});
  ASSERT_EQ(p.cell_count(), 4u);
  ASSERT_EQ(p.breakpoints().size(), 1u);
  EXPECT_EQ(p.breakpoints()[0], (std::vector<double>{2.5, 4.5, 6.5}));
  const std::vector<std::size_t> expected = {2, 0, 3, 1, 0, 3, 1, 2};
  EXPECT_EQ(p.sample_cells(), expected);
  for (const auto& members : p.cell_members()) EXPECT_EQ(members.size(), 2u);
}

TEST(Partition, LocateFollowsBreakpointConvention) {
  const Partition p = Partition::build(column({1, 2, 3, 4, 5, 6, 7, 8}), {4});
  const auto loc = [&](double x) { return p.locate(std::span<const double>(&x, 1)); };
  EXPECT_EQ(loc(4.5), 1u);   // on a breakpoint: lower cell
  EXPECT_EQ(loc(4.5000001), 2u);
  EXPECT_EQ(loc(-100.0), 0u);
  EXPECT_EQ(loc(100.0), 3u);
  for (std::size_t s = 0; s < 8; ++s) EXPECT_EQ(loc(double(s + 1)), p.sample_cells()[s]);
}

TEST(Partition, UnitSplitsGiveSingleCell) {
  Eigen::MatrixXd pts(5, 2);
  pts << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  const Partition p = Partition::build(pts, {1, 1});
  EXPECT_EQ(p.cell_count(), 1u);
  for (std::size_t c : p.sample_cells()) EXPECT_EQ(c, 0u);
}

TEST(Partition, GridOfSixteenOnePerCell) {
  Eigen::MatrixXd pts(16, 2);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) pts.row(a * 4 + b) << a, b;
  const Partition p = Partition::build(pts, {4, 4});
  ASSERT_EQ(p.cell_count(), 16u);
  for (const auto& m : p.cell_members()) EXPECT_EQ(m.size(), 1u);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) EXPECT_EQ(p.sample_cells()[a * 4 + b], static_cast<std::size_t>(a * 4 + b));
}

TEST(Partition, EqualCountOnRandomCloud) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Eigen::MatrixXd pts(8000, 2);
  for (Eigen::Index s = 0; s < pts.rows(); ++s) {
    const double a = n(rng);
    pts.row(s) << a, 0.6 * a + n(rng);
  }
  const Partition p = Partition::build(pts, {8, 4});
  for (const auto& m : p.cell_members()) EXPECT_EQ(m.size(), 250u);
  for (Eigen::Index s = 0; s < pts.rows(); ++s) {
    const double q[2] = {pts(s, 0), pts(s, 1)};
    EXPECT_EQ(p.locate(q), p.sample_cells()[static_cast<std::size_t>(s)]);
  }
}

TEST(Partition, UnevenRemainderGoesToEarlyStrips) {
  const Partition p = Partition::build(column({1, 2, 3, 4, 5, 6, 7}), {3});
  EXPECT_EQ(p.cell_members()[0].size(), 3u);
  EXPECT_EQ(p.cell_members()[1].size(), 2u);
  EXPECT_EQ(p.cell_members()[2].size(), 2u);
}

TEST(Partition, InsufficientSamples) {
  EXPECT_THROW(Partition::build(column({1, 2, 3}), {4}), ConfigError);
}

TEST(Partition, RebuildFromBreakpoints) {
  Eigen::MatrixXd pts(64, 2);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  for (Eigen::Index s = 0; s < 64; ++s) pts.row(s) << u(rng), u(rng);
  const Partition p = Partition::build(pts, {4, 2});
  const Partition q(p.splits(), p.breakpoints());
  for (Eigen::Index s = 0; s < 64; ++s) {
    const double x[2] = {pts(s, 0), pts(s, 1)};
    EXPECT_EQ(q.locate(x), p.sample_cells()[static_cast<std::size_t>(s)]);
  }
}

TEST(Regression, TwoPointsByHand) {
  const auto f = fit_affine(column({1, 2}), column({5, 9}), RegressionMode::affine);
  EXPECT_FALSE(f.degenerate);
  EXPECT_NEAR(f.coefficients(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(f.coefficients(0, 1), 4.0, 1e-10);
}

TEST(Regression, ConstantResponses) {
  const Eigen::MatrixXd pts = column({1, 2, 3, 4, 5, 6, 7, 8});
  auto part = std::make_shared<const Partition>(Partition::build(pts, {4}));
  const LocalAffineModel m = fit(part, pts, Eigen::VectorXd::Constant(8, 3.5), RegressionMode::affine);
  for (Eigen::Index l = 0; l < 4; ++l) {
    EXPECT_NEAR(m.coefficients()(l, 0), 3.5, 1e-12);
    EXPECT_NEAR(m.coefficients()(l, 1), 0.0, 1e-12);
  }
}

TEST(Regression, ExactAffineRecovery) {
  const Eigen::MatrixXd pts = column({1, 2, 3, 4, 5, 6, 7, 8});
  auto part = std::make_shared<const Partition>(Partition::build(pts, {4}));
  const Eigen::VectorXd y = (3.0 + 2.0 * pts.col(0).array()).matrix();
  const LocalAffineModel m = fit(part, pts, y, RegressionMode::affine);
  for (Eigen::Index l = 0; l < 4; ++l) {
    EXPECT_NEAR(m.coefficients()(l, 0), 3.0, 1e-10);
    EXPECT_NEAR(m.coefficients()(l, 1), 2.0, 1e-10);
  }
  EXPECT_NEAR(at(m, 7.0), 17.0, 1e-10);
  // Outside the box: the boundary cell's affine function at the raw point.
  EXPECT_NEAR(at(m, 20.0), 43.0, 1e-9);
}

TEST(Regression, ExactAffineRecoveryMultivariate) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 10.0);
  Eigen::MatrixXd pts(4000, 2);
  for (Eigen::Index s = 0; s < pts.rows(); ++s) pts.row(s) << 50.0 + n(rng), 22000.0 + 100.0 * n(rng);
  auto part = std::make_shared<const Partition>(Partition::build(pts, {8, 4}));
  const Eigen::VectorXd y = (1e6 - 3.0 * pts.col(0).array() + 0.25 * pts.col(1).array()).matrix();
  const LocalAffineModel m = fit(part, pts, y, RegressionMode::affine);
  for (Eigen::Index s = 0; s < pts.rows(); ++s) {
    const double q[2] = {pts(s, 0), pts(s, 1)};
    EXPECT_NEAR(m.evaluate(q), y(s), 1e-8 * std::abs(y(s)));
  }
}

TEST(Regression, ResidualsOrthogonalWithinCells) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n;
  Eigen::MatrixXd pts(600, 1);
  Eigen::VectorXd y(600);
  for (Eigen::Index s = 0; s < 600; ++s) {
    pts(s, 0) = n(rng);
    y(s) = std::exp(pts(s, 0)) + 0.1 * n(rng);
  }
  auto part = std::make_shared<const Partition>(Partition::build(pts, {6}));
  const LocalAffineModel m = fit(part, pts, y, RegressionMode::affine);
  for (std::size_t l = 0; l < 6; ++l) {
    double r1 = 0.0, rx = 0.0;
    for (std::size_t s : part->cell_members()[l]) {
      const double r = y(s) - at(m, pts(s, 0));
      r1 += r;
      rx += r * pts(s, 0);
    }
    EXPECT_NEAR(r1, 0.0, 1e-8 * 600);
    EXPECT_NEAR(rx, 0.0, 1e-8 * 600);
  }
}

TEST(Regression, ConstantModePreservesMean) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n;
  Eigen::MatrixXd pts(1000, 1);
  Eigen::VectorXd y(1000);
  for (Eigen::Index s = 0; s < 1000; ++s) {
    pts(s, 0) = n(rng);
    y(s) = 5.0 + pts(s, 0) * pts(s, 0);
  }
  auto part = std::make_shared<const Partition>(Partition::build(pts, {7}));
  const LocalAffineModel m = fit(part, pts, y, RegressionMode::constant);
  ASSERT_EQ(m.coefficients().cols(), 1);
  double weighted = 0.0;
  for (std::size_t l = 0; l < 7; ++l) {
    double mean = 0.0;
    for (std::size_t s : part->cell_members()[l]) mean += y(s);
    mean /= part->cell_members()[l].size();
    EXPECT_NEAR(m.coefficients()(l, 0), mean, 1e-12 * std::abs(mean));
    weighted += m.coefficients()(l, 0) * part->cell_members()[l].size();
  }
  EXPECT_NEAR(weighted / 1000.0, y.mean(), 1e-12 * std::abs(y.mean()));
}

TEST(Regression, DegenerateCellFallsBackToMean) {
  const auto f = fit_affine(column({2, 2, 2}), column({1, 2, 6}), RegressionMode::affine);
  EXPECT_TRUE(f.degenerate);
  EXPECT_NEAR(f.coefficients(0, 0), 3.0, 1e-12);
  EXPECT_EQ(f.coefficients(0, 1), 0.0);
  const auto single = fit_affine(column({4}), column({7}), RegressionMode::affine);
  EXPECT_TRUE(single.degenerate);
  EXPECT_EQ(single.coefficients(0, 0), 7.0);
}

TEST(Regression, FitIsOrderIndependent) {
  Eigen::MatrixXd a(6, 1), b(6, 1);
  Eigen::MatrixXd ya(6, 1), yb(6, 1);
  a << 1, 2, 3, 4, 5, 6;
  ya << 2, 3, 7, 4, 9, 1;
  const int perm[6] = {3, 0, 5, 1, 4, 2};
  for (int i = 0; i < 6; ++i) {
    b(i, 0) = a(perm[i], 0);
    yb(i, 0) = ya(perm[i], 0);
  }
  const auto fa = fit_affine(a, ya, RegressionMode::affine);
  const auto fb = fit_affine(b, yb, RegressionMode::affine);
  EXPECT_NEAR(fa.coefficients(0, 0), fb.coefficients(0, 0), 1e-12);
  EXPECT_NEAR(fa.coefficients(0, 1), fb.coefficients(0, 1), 1e-12);
}
