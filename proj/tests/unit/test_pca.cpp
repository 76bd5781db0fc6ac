#include <gtest/gtest.h>

#include <Eigen/QR>

#include "../oracles.hpp"
#include "tmon/error.hpp"
#include "tmon/pca.hpp"
#include "tmon/rng.hpp"

using namespace tmon;

namespace {

Eigen::MatrixXd random_matrix(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
  return m;
}

oracle::Matrix rows_of(const Eigen::MatrixXd& m) {
  oracle::Matrix out(static_cast<std::size_t>(m.rows()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out[i].push_back(m(i, j));
  return out;
}

}  // namespace

TEST(Fit, MatchesJacobiOracle) {
  const Eigen::MatrixXd x = random_matrix(50, 20, 1);
  const PcaModel m = fit(x, RetainCount{10});
  const auto [vals, vecs] = oracle::jacobi_eigen(oracle::covariance(rows_of(x)));
  double total = 0.0;
  for (double v : vals) total += v;
  for (int c = 0; c < 10; ++c) {
    EXPECT_NEAR(m.eigenvalues()(c), vals[c], 1e-6 * vals[c]);
    EXPECT_NEAR(m.explained_variance_ratio()(c), vals[c] / total, 1e-9);
    double dot = 0.0;
    for (int j = 0; j < 20; ++j) dot += m.components()(c, j) * vecs[c][j];
    EXPECT_NEAR(std::abs(dot), 1.0, 1e-6);
  }
}

TEST(Fit, LineDataRankOne) {
  Eigen::MatrixXd x(6, 2);
  for (int i = 0; i < 6; ++i) {
    x(i, 0) = 1.0 + 2.0 * i;
    x(i, 1) = -3.0 + 1.0 * i;
  }
  const PcaModel m = fit(x, RetainCount{1});
  const Eigen::Vector2d dir = Eigen::Vector2d(2.0, 1.0).normalized();
  EXPECT_NEAR(std::abs(m.components().row(0).dot(dir)), 1.0, 1e-12);
  for (int i = 0; i < 6; ++i) {
    EXPECT_LE((m.reconstruct(x.row(i).transpose()) - x.row(i).transpose()).norm(), 1e-9);
  }
}

TEST(Fit, SignConventionAndOrthonormality) {
  const PcaModel m = fit(random_matrix(40, 12, 2), RetainCount{5});
  const Eigen::MatrixXd g = m.components() * m.components().transpose();
  EXPECT_LE((g - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-6);
  for (int c = 0; c < 5; ++c) {
    Eigen::Index idx = 0;
    m.components().row(c).cwiseAbs().maxCoeff(&idx);
    EXPECT_GT(m.components()(c, idx), 0.0);
  }
  for (int c = 1; c < 5; ++c) {
    EXPECT_LE(m.explained_variance_ratio()(c), m.explained_variance_ratio()(c - 1));
  }
  EXPECT_LE(m.explained_variance_ratio().sum(), 1.0 + 1e-9);
}

TEST(Fit, FullVarianceCappedBelowDim) {
  const PcaModel m = fit(random_matrix(30, 8, 3), RetainVariance{1.0});
  EXPECT_EQ(m.n_components(), 7);
}

TEST(Fit, Errors) {
  EXPECT_THROW((void)fit(random_matrix(1, 5, 4), RetainCount{1}), InsufficientDataError);
  EXPECT_THROW((void)fit(random_matrix(10, 5, 4), RetainCount{5}), ValidationError);
  Eigen::MatrixXd rank1 = random_matrix(10, 1, 5) * Eigen::RowVectorXd::Ones(6);
  EXPECT_THROW((void)fit(rank1, RetainCount{3}), RankError);
}

TEST(Fit, Deterministic) {
  const Eigen::MatrixXd x = random_matrix(25, 9, 6);
  const PcaModel a = fit(x, RetainCount{4});
  const PcaModel b = fit(x, RetainCount{4});
  EXPECT_EQ(a.components(), b.components());
  EXPECT_EQ(a.mean(), b.mean());
}

TEST(Transform, Laws) {
  const PcaModel m = fit(random_matrix(40, 10, 7), RetainCount{3});
  EXPECT_LE(m.transform(m.mean()).norm(), 1e-12);
  const Eigen::VectorXd e1 = m.transform(m.mean() + m.components().row(0).transpose());
  EXPECT_NEAR(e1(0), 1.0, 1e-12);
  EXPECT_NEAR(e1.tail(2).norm(), 0.0, 1e-12);
  EXPECT_LE((m.inverse_transform(Eigen::VectorXd::Zero(3)) - m.mean()).norm(), 1e-12);

  Rng rng(8);
  Eigen::VectorXd f(10);
  for (int i = 0; i < 10; ++i) f(i) = rng.normal();
  const Eigen::VectorXd t = m.transform(f);
  for (int c = 0; c < 3; ++c) {
    double dot = 0.0;
    for (int j = 0; j < 10; ++j) dot += m.components()(c, j) * (f(j) - m.mean()(j));
    EXPECT_NEAR(t(c), dot, 1e-9);
  }
  const Eigen::VectorXd r = m.reconstruct(f);
  EXPECT_LE((m.reconstruct(r) - r).norm(), 1e-9);

  // Orthogonal part of a vector is lost.
  Eigen::VectorXd w = f;
  for (int c = 0; c < 3; ++c) w -= m.components().row(c).dot(w) * m.components().row(c).transpose();
  EXPECT_LE((m.reconstruct(m.mean() + w) - m.mean()).norm(), 1e-9);
  EXPECT_THROW((void)m.transform(Eigen::VectorXd::Zero(4)), ShapeError);
}

TEST(Fit, ReconstructionBeatsRandomSubspaces) {
  const int n = 60, d = 12, k = 3;
  Eigen::MatrixXd x = random_matrix(n, k, 9) * random_matrix(k, d, 10) + 1e-3 * random_matrix(n, d, 11);
  const PcaModel m = fit(x, RetainCount{k});
  auto err = [&](const Eigen::MatrixXd& basis) {
    double e = 0.0;
    const Eigen::RowVectorXd mu = x.colwise().mean();
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd c = (x.row(i) - mu).transpose();
      e += (c - basis.transpose() * (basis * c)).norm();
    }
    return e;
  };
  const double best = err(m.components());
  for (int t = 0; t < 100; ++t) {
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(d, k, 100 + t))
                                  .householderQ() * Eigen::MatrixXd::Identity(d, k);
    EXPECT_LE(best, err(q.transpose()) + 1e-12);
  }
}

TEST(FitBank, ModesAndSerialization) {
  Rng rng(12);
  std::vector<FeatureTensor> ts;
  for (int i = 0; i < 6; ++i) {
    FeatureTensor t(3, 4, 4);
    for (auto& v : t.data()) v = static_cast<float>(rng.uniform());
    ts.push_back(t);
  }
  const PcaBank full = fit_bank(ts, BankMode::Full, RetainCount{2});
  EXPECT_EQ(full.size(), 1u);
  EXPECT_EQ(full.model(0).dim(), 48);
  const PcaBank one = fit_bank(ts, BankMode::PerFeature, RetainCount{2}, {0});
  EXPECT_EQ(one.size(), 1u);
  EXPECT_EQ(one.model(0).dim(), 16);
  EXPECT_EQ(one.model_label(0), "ch0");
  EXPECT_THROW((void)fit_bank(ts, BankMode::PerFeature, RetainCount{2}, {1, 1}), ValidationError);

  const PcaBank back = parse_bank(serialize_bank(one));
  EXPECT_EQ(back.selected(), one.selected());
  const auto r1 = back.roundtrip(ts[0], 0);
  const auto r2 = one.roundtrip(ts[0], 0);
  for (std::size_t i = 0; i < r1.size(); ++i) EXPECT_NEAR(r1.data()[i], r2.data()[i], 1e-5);
  // Uncovered channels are copied through.
  for (int c = 1; c < 3; ++c)
    for (int j = 0; j < 16; ++j) EXPECT_EQ(r2.channel(c)[j], ts[0].channel(c)[j]);

  std::vector<FeatureTensor> mixed = ts;
  mixed.emplace_back(3, 2, 2);
  EXPECT_THROW((void)fit_bank(mixed, BankMode::Full, RetainCount{1}), ShapeError);
  auto bytes = serialize_bank(full);
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW((void)parse_bank(bytes), FormatError);
}
