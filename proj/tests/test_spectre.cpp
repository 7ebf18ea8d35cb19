#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "eows/simlab.hpp"
#include "eows/spectre.hpp"
#include "test_util.hpp"

using namespace eows;

namespace {

const double kScale = 1.0 / (std::pow(2.0, 2.0 / 3.0) - 1.0);

Vec descending(std::vector<double> v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  return Eigen::Map<Vec>(v.data(), static_cast<Index>(v.size()));
}

// Planted low-rank signal with random unit singular vectors plus white noise.
struct Planted {
  Mat y, s, u, v;
};

Planted planted(const std::vector<double>& d, Index p, Index n, std::uint64_t seed) {
  const Index r = static_cast<Index>(d.size());
  Planted out;
  out.u = eows::testing::random_rotation(p, seed).leftCols(r);
  out.v = eows::testing::random_rotation(n, seed + 7777).leftCols(r);
  out.s = Mat::Zero(p, n);
  for (Index i = 0; i < r; ++i) out.s += d[static_cast<std::size_t>(i)] * out.u.col(i) * out.v.col(i).transpose();
  out.y = out.s + gen_noise(p, n, {NoiseKind::Type1, 10.0, seed});
  return out;
}

}  // namespace

TEST(BulkEdge, ConstantSpectrumGivesTheConstant) {
  const SpectrumView s = make_spectrum(Vec::Constant(100, 4.0), 100, 100);
  EXPECT_DOUBLE_EQ(bulk_edge(s, 0.3), 4.0);
  EXPECT_DOUBLE_EQ(bulk_edge(s, 1.0 / 2.01), 4.0);
}

TEST(BulkEdge, HandEvaluationAtWindow15) {
  // floor(256^(1/2.01)) = 15, so the formula reads entries 16 and 31.
  EXPECT_EQ(edge_window(256, 1.0 / 2.01), 15);
  std::vector<double> e;
  for (int i = 0; i < 256; ++i) e.push_back(10.0 - 0.03 * i);
  const SpectrumView s = make_spectrum(descending(e), 256, 256);
  const double l16 = 10.0 - 0.03 * 15, l31 = 10.0 - 0.03 * 30;
  EXPECT_NEAR(bulk_edge(s, 1.0 / 2.01), l16 + (l16 - l31) * kScale, 1e-12);
  EXPECT_GE(bulk_edge(s, 1.0 / 2.01), l16);
}

TEST(BulkEdge, TooSmallForWindow) {
  const SpectrumView s = make_spectrum(Vec::Constant(5, 1.0), 5, 400);
  EXPECT_THROW(bulk_edge(s, 0.45), InputError);
}

TEST(BulkEdge, NoiseOnlyTracksTopEigenvalue) {
  std::vector<double> ratio;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Mat z = gen_noise(256, 256, {NoiseKind::Type1, 10.0, 500 + seed});
    const GramSpectrum g(z);
    const SpectrumView s{g.eigs(), 256, 256};
    ratio.push_back(std::abs(bulk_edge(s, default_c(256)) / g.eigs()(0) - 1.0));
  }
  EXPECT_LE(median(ratio), 0.10);
}

TEST(BulkEdge, InvariantUnderTrailingZeros) {
  std::vector<double> e;
  for (int i = 0; i < 80; ++i) e.push_back(5.0 / (1 + i));
  const SpectrumView a = make_spectrum(descending(e), 80, 200);
  e.resize(120, 0.0);
  const SpectrumView b = make_spectrum(descending(e), 80, 200);
  EXPECT_EQ(bulk_edge(a, 0.4), bulk_edge(b, 0.4));
  EXPECT_EQ(effective_rank(a, 0.3), effective_rank(b, 0.3));
}

TEST(EffectiveRank, Cases) {
  const SpectrumView low = make_spectrum(Vec::Constant(50, 0.5), 50, 256);
  EXPECT_EQ(effective_rank(low, 1.0), 0);
  Vec e = Vec::Ones(256);
  e(0) = 100;
  const SpectrumView one = make_spectrum(e, 256, 256);
  EXPECT_EQ(effective_rank(one, 1.0), 1);
  EXPECT_EQ(effective_rank(one, bulk_edge(one, default_c(256))), 1);
}

TEST(EffectiveRank, PlantedRankThree) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Planted pl = planted({8, 6, 4}, 256, 256, 40 + seed);
    hits += eoptshrink(pl.y, ShrinkTarget::Frobenius).est.r_hat == 3;
  }
  EXPECT_GE(hits, 9);
}

TEST(Impute, BoundaryAndInteriorIndices) {
  std::vector<double> e;
  for (int i = 0; i < 200; ++i) e.push_back(std::exp(-0.02 * i) + (i < 2 ? 5.0 : 0.0));
  const SpectrumView s = make_spectrum(descending(e), 200, 300);
  const double c = 0.4;
  const Index k = edge_window(300, c), r = 2;
  const BulkModel b = impute_and_cdf(s, r, c);
  ASSERT_EQ(static_cast<Index>(b.imputed.size()), k);
  const double anchor = s.at(k + r + 1), gap = anchor - s.at(2 * k + r + 1);
  EXPECT_NEAR(b.imputed.front(), anchor + gap * kScale, 1e-14);
  const double frac = static_cast<double>(k - 1) / static_cast<double>(k);
  EXPECT_NEAR(b.imputed.back(), anchor + (1 - std::pow(frac, 2.0 / 3.0)) * kScale * gap, 1e-14);
  EXPECT_EQ(static_cast<Index>(b.points.size()), 200 - r);
  EXPECT_DOUBLE_EQ(b.cdf(std::numeric_limits<double>::infinity()), 1.0);
  EXPECT_DOUBLE_EQ(b.cdf(-1.0), 0.0);
  // r = 0 boundary value is the bulk edge itself
  EXPECT_NEAR(impute_and_cdf(s, 0, c).imputed.front(), bulk_edge(s, c), 1e-14);
}

TEST(Stieltjes, OnePointBulk) {
  BulkModel b;
  b.points = {1.0};
  const StieltjesValues a = stieltjes_at(b, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(a.m1, -1.0);
  EXPECT_DOUBLE_EQ(a.m2, -1.0);
  EXPECT_DOUBLE_EQ(a.m1p, 1.0);
  // half of the companion mass sits at zero: 0.5 / (0 - 2) + 0.5 * (-1)
  const StieltjesValues h = stieltjes_at(b, 0.5, 2.0);
  EXPECT_DOUBLE_EQ(h.m2, -0.75);
  EXPECT_DOUBLE_EQ(h.m2p, 0.5 / 4 + 0.5 * 1.0);
  EXPECT_THROW(stieltjes_at(b, 1.0, 1.0 + 1e-14), NumericError);
}

TEST(Stieltjes, SecondTransformIdentity) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    BulkModel b;
    for (int i = 0; i < 30; ++i) b.points.push_back(u(g));
    const double beta = 0.1 + 0.9 * u(g) / 2.0, lam = 2.5 + u(g);
    const StieltjesValues s = stieltjes_at(b, beta, lam);
    EXPECT_NEAR(s.m2 - beta * s.m1, -(1 - beta) / lam, 1e-12);
    EXPECT_LT(s.m1, 0);
    EXPECT_LT(s.m2, 0);
    EXPECT_GT(s.m1p, 0);
  }
}

TEST(Spikes, NoSpikesNoError) {
  const Mat z = gen_noise(120, 200, {NoiseKind::Type1, 10.0, 9});
  const GramSpectrum g(z);
  const SpikeEstimates est = estimate_spikes({g.eigs(), 120, 200});
  if (est.r_hat == 0) {
    EXPECT_TRUE(est.spikes.empty());
  }
  EXPECT_LE(est.r_hat, 1);
}

TEST(Spikes, DerivativeOfTransformIsAnalytic) {
  const Planted pl = planted({5, 3}, 150, 300, 77);
  const GramSpectrum g(pl.y);
  const SpectrumView s{g.eigs(), 150, 300};
  const SpikeEstimates est = estimate_spikes(s);
  ASSERT_GE(est.r_hat, 1);
  const BulkModel b = impute_and_cdf(s, est.r_hat, est.c_exp);
  const double lam = s.eigs(0), h = 1e-5;
  auto transform = [&](double x) {
    const StieltjesValues v = stieltjes_at(b, s.beta(), x);
    return x * v.m1 * v.m2;
  };
  const double fd = (transform(lam + h) - transform(lam - h)) / (2 * h);
  EXPECT_NEAR(est.spikes[0].tp_hat, fd, 1e-6 * std::abs(fd));
  EXPECT_NEAR(est.spikes[0].d_hat, 1.0 / std::sqrt(transform(lam)), 1e-12);
}

TEST(Spikes, MonotoneAndValid) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Planted pl = planted({9, 7, 5, 3.5}, 200, 400, 90 + seed);
    const SpikeEstimates est = eoptshrink(pl.y, ShrinkTarget::Frobenius).est;
    ASSERT_GE(est.r_hat, 2);
    for (std::size_t i = 0; i < est.spikes.size(); ++i) {
      const Spike& s = est.spikes[i];
      EXPECT_GT(s.t_hat, 0);
      EXPECT_GT(s.d_hat, 0);
      EXPECT_GT(s.a1_hat, 0);
      EXPECT_LE(s.a1_hat, 1);
      EXPECT_GT(s.a2_hat, 0);
      EXPECT_LE(s.a2_hat, 1);
      if (i > 0 && est.spikes[i - 1].lambda > s.lambda) {
        EXPECT_GT(est.spikes[i - 1].d_hat, s.d_hat);
      }
      EXPECT_LE(shrinker_value(s, ShrinkTarget::Frobenius), amplitude_value(s) + 1e-12);
    }
  }
}

TEST(Spikes, RankOneRecovery) {
  std::vector<double> dev, a1dev, a2dev;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Planted pl = planted({5}, 300, 300, 300 + seed);
    const EoptResult r = eoptshrink(pl.y, ShrinkTarget::Frobenius);
    ASSERT_GE(r.est.r_hat, 1);
    dev.push_back(std::abs(r.est.spikes[0].d_hat - 5));
    const double ou = pl.u.col(0).dot(r.top.U.col(0)), ov = pl.v.col(0).dot(r.top.V.col(0));
    a1dev.push_back(std::abs(r.est.spikes[0].a1_hat - ou * ou));
    a2dev.push_back(std::abs(r.est.spikes[0].a2_hat - ov * ov));
  }
  EXPECT_LE(median(dev), 0.2);
  EXPECT_LE(median(a1dev), 0.1);
  EXPECT_LE(median(a2dev), 0.1);
}

TEST(Spikes, RectangularRecovery) {
  // beta = 1/2: the zero eigenvalues of the larger Gram matrix matter here
  std::vector<double> dev, a2dev;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Planted pl = planted({4}, 200, 400, 600 + seed);
    const EoptResult r = eoptshrink(pl.y, ShrinkTarget::Frobenius);
    ASSERT_GE(r.est.r_hat, 1);
    dev.push_back(std::abs(r.est.spikes[0].d_hat - 4));
    const double ov = pl.v.col(0).dot(r.top.V.col(0));
    a2dev.push_back(std::abs(r.est.spikes[0].a2_hat - ov * ov));
  }
  EXPECT_LE(median(dev), 0.25);
  EXPECT_LE(median(a2dev), 0.1);
}

TEST(Shrinkers, HandValues) {
  Spike s;
  s.d_hat = 3;
  s.a1_hat = s.a2_hat = 1;
  for (auto t : {ShrinkTarget::Frobenius, ShrinkTarget::Operator, ShrinkTarget::Nuclear})
    EXPECT_DOUBLE_EQ(shrinker_value(s, t), 3.0);
  s.d_hat = 2;
  s.a1_hat = s.a2_hat = 0.5;
  EXPECT_NEAR(shrinker_value(s, ShrinkTarget::Frobenius), 1.0, 1e-15);
  EXPECT_NEAR(shrinker_value(s, ShrinkTarget::Operator), 2.0, 1e-15);
  EXPECT_NEAR(shrinker_value(s, ShrinkTarget::Nuclear), 0.0, 1e-15);
  s.d_hat = 1;
  s.a1_hat = 0.9;
  s.a2_hat = 0.4;
  EXPECT_NEAR(shrinker_value(s, ShrinkTarget::Operator), std::sqrt(0.4 / 0.9), 1e-15);
  EXPECT_NEAR(shrinker_value(s, ShrinkTarget::Operator), 0.6667, 1e-4);
  s.a1_hat = 0.2;
  s.a2_hat = 0.3;
  EXPECT_EQ(shrinker_value(s, ShrinkTarget::Nuclear), 0.0);
  EXPECT_EQ(parse_target("op"), ShrinkTarget::Operator);
  EXPECT_THROW(parse_target("max"), InputError);
}

TEST(EOptShrink, PureNoise) {
  const Mat z = gen_noise(64, 128, {NoiseKind::Type1, 10.0, 1234});
  const EoptResult r = eoptshrink(z, ShrinkTarget::Frobenius);
  if (r.est.r_hat == 0) {
    EXPECT_EQ(r.s_os, Mat::Zero(64, 128));
    EXPECT_EQ(r.z_hat, z);
  }
  EXPECT_LE(r.est.r_hat, 1);
}

TEST(EOptShrink, NearCleanRankOne) {
  const Mat u = eows::testing::random_rotation(100, 5).leftCols(1);
  const Mat v = eows::testing::random_rotation(160, 6).leftCols(1);
  const Mat s = 10.0 * u * v.transpose();
  const Mat y = s + 1e-8 * eows::testing::random_mat(100, 160, 7);
  const EoptResult r = eoptshrink(y, ShrinkTarget::Frobenius);
  ASSERT_EQ(r.est.r_hat, 1);
  EXPECT_LE(mse(r.s_os, y), 1e-6);
}

TEST(EOptShrink, RankAndOrientation) {
  const Planted pl = planted({6, 4}, 90, 180, 55);
  const EoptResult r = eoptshrink(pl.y, ShrinkTarget::Frobenius);
  const Mat yt = pl.y.transpose();
  const EoptResult t = eoptshrink(yt, ShrinkTarget::Frobenius);
  ASSERT_EQ(r.est.r_hat, t.est.r_hat);
  EXPECT_LE((r.s_os - t.s_os.transpose()).norm(), 1e-9 * r.s_os.norm());
  for (std::size_t i = 0; i < r.est.spikes.size(); ++i) {
    EXPECT_NEAR(r.est.spikes[i].a1_hat, t.est.spikes[i].a2_hat, 1e-10);
    EXPECT_NEAR(r.est.spikes[i].d_hat, t.est.spikes[i].d_hat, 1e-10);
  }
  const Vec sv = Eigen::BDCSVD<Mat>(r.s_os).singularValues();
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) rank += sv(i) > 1e-10 * std::max(1.0, sv(0));
  EXPECT_EQ(rank, r.est.r_hat);
  EXPECT_LE((r.z_hat - (pl.y - r.s_os)).norm(), 0.0);
}

TEST(EOptShrink, ImprovesOnSinusoidSignal) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Signal sig = gen_sinusoid(512, seed);
    const Mat y = sig.s + gen_noise(512, 1024, {NoiseKind::Type1, 10.0, 1000 + seed});
    wins += mse(eoptshrink(y, ShrinkTarget::Frobenius).s_os, sig.s) < mse(y, sig.s);
  }
  EXPECT_GE(wins, 9);
}
