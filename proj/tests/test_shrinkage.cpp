#include <gtest/gtest.h>

#include <cmath>

#include "eows/shrinkage.hpp"
#include "scenarios.hpp"
#include "test_util.hpp"

using namespace eows;
using eows::testing::random_mat;

namespace {

SpikeEstimates one_spike(double d, double a1, double a2) {
  SpikeEstimates est;
  est.r_hat = 1;
  Spike s;
  s.d_hat = d;
  s.a1_hat = a1;
  s.a2_hat = a2;
  est.spikes.push_back(s);
  return est;
}

// Direct evaluation of the four-term variance formula from explicit sums.
double variance_oracle(const Mat& z, const Vec& w_row, const Vec& w_col, const SpikeEstimates& est) {
  const double p = static_cast<double>(z.rows()), n = static_cast<double>(z.cols());
  double s1 = 0, s2 = 0, s3 = 0;
  for (Index a = 0; a < z.rows(); ++a)
    for (Index b = 0; b < z.rows(); ++b)
      for (Index l = 0; l < z.cols(); ++l) s1 += z(a, l) * z(b, l) * w_row(a) * w_row(b);
  for (Index a = 0; a < z.cols(); ++a)
    for (Index b = 0; b < z.cols(); ++b)
      for (Index k = 0; k < z.rows(); ++k) s2 += z(k, a) * z(k, b) * w_col(a) * w_col(b);
  for (Index i = 0; i < z.size(); ++i) s3 += z.data()[i] * z.data()[i];
  double f = 0;
  for (const Spike& s : est.spikes) {
    f += s1 / (s.a1_hat * n * n) + s2 / (s.a2_hat * p * p) + (1 / (s.a1_hat * p * n * n) + 1 / (s.a2_hat * p * p * n)) * s3 +
         (s1 / n + s3 / (p * n)) * (s2 / p + s3 / (p * n)) / (s.d_hat * s.d_hat * s.a1_hat * s.a2_hat);
  }
  return f;
}

}  // namespace

TEST(SoftThreshold, Cases) {
  EXPECT_EQ(soft_threshold(5, 2), 3);
  EXPECT_EQ(soft_threshold(-1, 2), 0);
  EXPECT_EQ(soft_threshold(-7.5, 2.5), -5);
  EXPECT_EQ(soft_threshold(2, 0), 2);
  EXPECT_THROW(soft_threshold(1, -1), InputError);
}

TEST(SoftThreshold, LipschitzAndMonotoneOnGrid) {
  for (double t : {0.0, 0.3, 1.0, 2.5})
    for (double x = -5; x <= 5; x += 0.01) {
      const double y = x + 0.0137;
      EXPECT_LE(std::abs(soft_threshold(y, t) - soft_threshold(x, t)), std::abs(y - x) + 1e-15);
      EXPECT_GE(soft_threshold(y, t), soft_threshold(x, t));
      EXPECT_EQ(std::abs(soft_threshold(x, t)), std::max(std::abs(x) - t, 0.0));
    }
}

TEST(ClassicWs, ZeroAndConstant) {
  const TensorGhwt t(balanced_tree(8), balanced_tree(6));
  EXPECT_EQ(classic_ws(Mat::Zero(8, 6), t, 1.0).norm(), 0.0);
  const Mat c = Mat::Constant(8, 6, 3.25);
  EXPECT_LE((classic_ws(c, t, 5.0) - c).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(classic_ws(c, t, 0.0), InputError);
}

TEST(ClassicWs, ThresholdValue) {
  EXPECT_NEAR(ws_threshold(64, 128, 2.0), std::sqrt(2 * std::log(64.0 * 128.0)) * 2 / std::sqrt(128.0), 1e-15);
}

TEST(ClassicWs, MedianMseDecreasesWithSize) {
  const auto med = eows::testing::ws_consistency({128, 256, 512}, 10, 1.0, 7);
  EXPECT_GT(med[0], med[1]);
  EXPECT_GT(med[1], med[2]);
}

TEST(CoeffVariance, ZeroResidualGivesZero) {
  const TensorGhwt t(balanced_tree(4), balanced_tree(4));
  EXPECT_EQ(coeff_variance(Mat::Zero(4, 4), t, {0, 0, 0}, {1, 0, 1}, one_spike(2, 0.5, 0.5)), 0.0);
}

TEST(CoeffVariance, HandEvaluatedTwoByTwo) {
  // Z = I, root atoms (1/sqrt2, 1/sqrt2): S1 = S2 = 1, S3 = 2, so the terms are
  // 1/4, 1/4, (1/8 + 1/8) * 2 and (1/2 + 1/2)(1/2 + 1/2); total 2.
  const TensorGhwt t(balanced_tree(2), balanced_tree(2));
  const SpikeEstimates est = one_spike(1, 1, 1);
  const VarTable vt(Mat::Identity(2, 2), t, est);
  const auto terms = vt.terms(1, 1, 2);
  EXPECT_DOUBLE_EQ(terms[0], 0.25);
  EXPECT_DOUBLE_EQ(terms[1], 0.25);
  EXPECT_DOUBLE_EQ(terms[2], 0.5);
  EXPECT_DOUBLE_EQ(terms[3], 1.0);
  EXPECT_DOUBLE_EQ(coeff_variance(Mat::Identity(2, 2), t, {0, 0, 0}, {0, 0, 0}, est), 2.0);
}

TEST(CoeffVariance, MatchesExplicitQuarticSums) {
  const TensorGhwt t(eows::build_tree(gaussian_affinity(random_mat(9, 2, 1))), balanced_tree(7));
  const Mat z = random_mat(9, 7, 2);
  SpikeEstimates est = one_spike(3.0, 0.7, 0.4);
  est.spikes.push_back(est.spikes[0]);
  est.spikes[1].d_hat = 1.5;
  est.spikes[1].a1_hat = 0.2;
  est.r_hat = 2;
  for (Index r = 0; r < t.rows().size(); r += 5)
    for (Index c = 0; c < t.cols().size(); c += 3) {
      const AtomId ra = t.rows().atom_at(r), ca = t.cols().atom_at(c);
      const double want = variance_oracle(z, t.rows().atom_vector(ra), t.cols().atom_vector(ca), est);
      EXPECT_NEAR(coeff_variance(z, t, ra, ca, est), want, 1e-12 * want);
    }
}

TEST(CoeffVariance, ScalingSplitsByTerm) {
  const TensorGhwt t(balanced_tree(8), balanced_tree(8));
  const Mat z = random_mat(8, 8, 3);
  const SpikeEstimates est = one_spike(2.0, 0.6, 0.8);
  const VarTable a(z, t, est), b(3.0 * z, t, est);
  for (Index r : {0, 5, 17})
    for (Index c : {1, 9, 30}) {
      const auto ta = a.terms(a.row_energy(r), a.col_energy(c), a.total_energy());
      const auto tb = b.terms(b.row_energy(r), b.col_energy(c), b.total_energy());
      for (int k = 0; k < 3; ++k) EXPECT_NEAR(tb[k], 9.0 * ta[k], 1e-12 * std::max(1.0, tb[k]));
      EXPECT_NEAR(tb[3], 81.0 * ta[3], 1e-12 * std::max(1.0, tb[3]));
    }
}

TEST(CoeffVariance, SignFlipInvariant) {
  // Flipping an atom's sign leaves the squared projections unchanged; check on
  // the formula level with the negated atom vector.
  const TensorGhwt t(balanced_tree(6), balanced_tree(5));
  const Mat z = random_mat(6, 5, 4);
  const SpikeEstimates est = one_spike(2.0, 0.6, 0.8);
  const Vec wr = t.rows().atom_vector({1, 0, 1}), wc = t.cols().atom_vector({0, 0, 2});
  EXPECT_NEAR(variance_oracle(z, -wr, wc, est), coeff_variance(z, t, {1, 0, 1}, {0, 0, 2}, est), 1e-12);
  EXPECT_NEAR(variance_oracle(z, wr, -wc, est), coeff_variance(z, t, {1, 0, 1}, {0, 0, 2}, est), 1e-12);
}

TEST(CoeffVariance, NeedsASpike) {
  const TensorGhwt t(balanced_tree(4), balanced_tree(4));
  EXPECT_THROW(VarTable(Mat::Ones(4, 4), t, SpikeEstimates{}), InputError);
}

TEST(CoeffVariance, MonteCarloWithinFactorTwo) {
  const auto chk = eows::testing::mc_variance(256, 200, 10, 11);
  ASSERT_GE(chk.draws_used, 180);
  for (std::size_t a = 0; a < chk.empirical.size(); ++a)
    std::cout << "atom " << a << " empirical " << chk.empirical[a] << " predicted " << chk.predicted[a] << '\n';
  EXPECT_GE(chk.within_factor(2.0), 8);
}

TEST(TauStar, EqualMagnitudes) {
  Mat z(3, 4);
  z << 2, -2, 2, 2, -2, 2, 2, -2, 2, 2, 2, -2;
  double q = 0;
  EXPECT_DOUBLE_EQ(tau_star(z, &q), 1.0);
  EXPECT_DOUBLE_EQ(q, 2.0);
}

TEST(TauStar, ZeroIsDegenerate) { EXPECT_EQ(tau_star(Mat::Zero(3, 3)), 0.0); }

TEST(TauStar, GaussianQuantile) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Mat z(250, 400);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = g(rng);
  EXPECT_NEAR(tau_star(z), 2.5758, 0.1);
}

TEST(TauStar, NearestRankIgnoresOutlierValue) {
  // 99 entries of 1 and one outlier: rank ceil(0.99*100) = 99 picks a 1.
  Mat z = Mat::Ones(10, 10);
  z(3, 3) = 1000;
  double q = 0;
  const double tau = tau_star(z, &q);
  EXPECT_EQ(q, 1.0);
  EXPECT_NEAR(tau, 1.0 / std::sqrt((99.0 + 1e6) / 100.0), 1e-15);
  z(3, 3) = 50;
  tau_star(z, &q);
  EXPECT_EQ(q, 1.0);
  // two outliers push the rank-99 entry onto an outlier
  z(4, 4) = 50;
  tau_star(z, &q);
  EXPECT_EQ(q, 50.0);
}

TEST(AdaptiveShrink, IdentityCases) {
  CoeffMap cm;
  cm.tiles = {{AtomId{0, 0, 1}, AtomId{0, 0, 0}}, {AtomId{0, 0, 0}, AtomId{0, 0, 0}}};
  cm.values = {-2.5, 4.0};
  EXPECT_EQ(adaptive_shrink(cm, {0.0, 0.0}, 3.0).values, cm.values);
  EXPECT_EQ(adaptive_shrink(cm, {5.0, 5.0}, 0.0).values, cm.values);
  EXPECT_THROW(adaptive_shrink(cm, {1.0}, 1.0), InputError);
  EXPECT_THROW(adaptive_shrink(cm, {1.0, 1.0}, -1.0), InputError);
}

TEST(AdaptiveShrink, SingleCoefficientAndPassthrough) {
  CoeffMap cm;
  cm.tiles = {{AtomId{1, 0, 0}, AtomId{0, 0, 1}}, {AtomId{0, 0, 0}, AtomId{0, 0, 0}}};
  cm.values = {3.0, 0.5};
  const CoeffMap out = adaptive_shrink(cm, {1.0, 100.0}, 2.0);
  EXPECT_EQ(out.values[0], 1.0);
  EXPECT_EQ(out.values[1], 0.5);
}

TEST(AdaptiveShrink, NonExpansive) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0, 2);
  CoeffMap cm;
  std::vector<double> var;
  for (int i = 0; i < 200; ++i) {
    cm.tiles.push_back({AtomId{1, i, 1}, AtomId{0, 0, 1}});
    cm.values.push_back(g(rng));
    var.push_back(u(rng));
  }
  const CoeffMap out = adaptive_shrink(cm, var, 1.3);
  double a = 0, b = 0;
  for (std::size_t i = 0; i < var.size(); ++i) {
    EXPECT_LE(std::abs(out.values[i]), std::abs(cm.values[i]));
    a += out.values[i] * out.values[i];
    b += cm.values[i] * cm.values[i];
  }
  EXPECT_LE(a, b);
}
