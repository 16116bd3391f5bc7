#include <cmath>
#include <numbers>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "twincher/forward_models.hpp"
#include "twincher/rng.hpp"

namespace twincher {
namespace {

Vec random_box(CounterRng& rng, int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
  return v;
}

TEST(Squash, KnownValues) {
  EXPECT_EQ(squash(0.0), 0.0);
  EXPECT_NEAR(squash(1.0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(unsquash(squash(3.7)), 3.7, 1e-12);
  EXPECT_THROW(unsquash(1.0), DomainError);
}

TEST(HarmonicOperator, ZeroCoefficientsGiveZero) {
  const Vec x = Vec::LinSpaced(2, -0.3, 0.8);
  const Vec out = harmonic_operator(Mat::Zero(2, 2), Mat::Zero(2, 2), x);
  EXPECT_EQ(out, Vec::Zero(2));
}

TEST(HarmonicOperator, QuarterPhaseGivesOne) {
  const Mat B = Mat::Constant(2, 2, std::numbers::pi / 2.0);
  const Vec out = harmonic_operator(Mat::Zero(2, 2), B, Vec::Constant(2, 0.4));
  EXPECT_NEAR(out(0), 1.0, 1e-15);
  EXPECT_NEAR(out(1), 1.0, 1e-15);
}

TEST(HarmonicOperator, MatchesDirectSum) {
  auto rng = CounterRng::from(11, 900);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 1 + static_cast<int>(rng.below(4));
    Mat W(h, h), B(h, h);
    for (int j = 0; j < h; ++j) {
      for (int k = 0; k < h; ++k) {
        W(j, k) = rng.uniform(-5.0, 5.0);
        B(j, k) = rng.uniform(-3.0, 3.0);
      }
    }
    const Vec x = random_box(rng, h);
    const Vec out = harmonic_operator(W, B, x);
    for (int j = 0; j < h; ++j) {
      double sum = 0.0;
      for (int k = 0; k < h; ++k) sum += std::sin(W(j, k) * x(k) + B(j, k));
      EXPECT_NEAR(out(j), sum * 2.0 / (2.0 * h), 1e-12);
    }
  }
}

TEST(HarmonicEntangler, SeedDeterminism) {
  const HarmonicEntangler a(7, 2, 4, 3, 1.0);
  const HarmonicEntangler b(7, 2, 4, 3, 1.0);
  const HarmonicEntangler c(8, 2, 4, 3, 1.0);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_NE(a.layers()[0].w[0], c.layers()[0].w[0]);
  EXPECT_NE(a.s_pad(), c.s_pad());
}

TEST(HarmonicEntangler, AmplitudeBoundsFrequencies) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const HarmonicEntangler e(seed, 2, 4, 3, 1.5);
    for (const auto& layer : e.layers()) {
      for (const auto& w : layer.w) EXPECT_LT(w.cwiseAbs().maxCoeff(), 1.5 * std::numbers::pi);
    }
    for (int i = 0; i < e.s_pad().size(); ++i) EXPECT_LT(std::abs(e.s_pad()(i)), 1.0);
  }
}

TEST(HarmonicEntangler, SquashOnlyLayersMatchHandComposition) {
  std::vector<EntanglerLayer> layers(2);
  layers[0].perm = {2, 0, 3, 1};
  layers[1].perm = {1, 3, 0, 2};
  for (auto& layer : layers) {
    for (int op = 0; op < 4; ++op) {
      layer.w[op] = Mat::Zero(2, 2);
      layer.b[op] = Mat::Zero(2, 2);
    }
  }
  Vec pad(2);
  pad << 0.25, -0.6;
  const auto e = HarmonicEntangler::from_coefficients(2, layers, pad);
  Vec p(2);
  p << 0.3, -0.9;

  double s[4] = {0.3, -0.9, 0.25, -0.6};
  for (const auto& layer : layers) {
    double next[4];
    for (int i = 0; i < 4; ++i) {
      const double z = s[layer.perm[i]];
      next[i] = z / std::sqrt(1.0 + z * z);
    }
    std::copy(next, next + 4, s);
  }
  const Vec y = e.evaluate(p);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y(i), s[i], 1e-15);
  EXPECT_NEAR((e.inverse(y) - p).norm(), 0.0, 1e-12);
}

TEST(HarmonicEntangler, DefaultDimsAndRoundTrip) {
  auto rng = CounterRng::from(5, 901);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const HarmonicEntangler e(seed, 2, 4, 3, 1.0);
    EXPECT_EQ(e.evaluate(Vec::Zero(2)).size(), 4);
    EXPECT_NEAR(e.inverse(e.evaluate(Vec::Zero(2))).norm(), 0.0, 1e-9);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Vec p = random_box(rng, 2);
      worst = std::max(worst, (e.inverse(e.evaluate(p)) - p).lpNorm<Eigen::Infinity>());
    }
    EXPECT_LT(worst, 1e-9);
  }
}

TEST(HarmonicEntangler, BoundaryAndImageErrors) {
  const HarmonicEntangler e(3, 2, 4, 3, 1.0);
  Vec y = e.evaluate(Vec::Zero(2));
  Vec edge = y;
  edge(0) = 1.0;
  EXPECT_THROW(e.inverse(edge), DomainError);
  y(3) += 0.05;
  EXPECT_THROW(e.inverse(y), ImageMembershipError);
  EXPECT_THROW(e.evaluate(Vec::Constant(2, 1.5)), ContractViolation);
  EXPECT_THROW(HarmonicEntangler(1, 2, 5, 3, 1.0), ContractViolation);
}

TEST(HarmonicEntangler, JsonRoundTrip) {
  const HarmonicEntangler e(9, 2, 4, 3, 0.75);
  const auto back = HarmonicEntangler::from_json(e.to_json());
  Vec p(2);
  p << -0.2, 0.7;
  EXPECT_EQ(back.evaluate(p), e.evaluate(p));
}

TEST(SpiralProcess, Parametrization) {
  const SpiralProcess spiral;
  const Vec y0 = spiral.evaluate(Vec::Zero(1));
  EXPECT_DOUBLE_EQ(y0(0), 0.4);
  EXPECT_DOUBLE_EQ(y0(1), 0.0);
  EXPECT_NEAR(spiral.evaluate(Vec::Ones(1)).norm(), 0.75, 1e-15);
}

TEST(SpiralProcess, InjectiveOnGrid) {
  const SpiralProcess spiral;
  std::vector<Vec> ys;
  for (int i = 0; i < 512; ++i) ys.push_back(spiral.evaluate(Vec::Constant(1, -1.0 + 2.0 * i / 511.0)));
  double min_dist = 1.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    for (std::size_t j = i + 1; j < ys.size(); ++j) min_dist = std::min(min_dist, (ys[i] - ys[j]).norm());
  }
  EXPECT_GT(min_dist, 0.0);
}

TEST(NoiseChannel, IdentityAndAmplitude) {
  const Vec y = Vec::LinSpaced(6, -0.5, 0.5);
  NoiseChannel identity(0.0, 0.0, 1);
  EXPECT_EQ(identity.apply(y), y);
  NoiseChannel noisy(0.5, 0.0, 2);
  for (int k = 0; k < 1000; ++k) EXPECT_LE((noisy.apply(y) - y).lpNorm<Eigen::Infinity>(), 0.5);
}

TEST(NoiseChannel, SwapFrequency) {
  NoiseChannel channel(0.0, 0.2, 3);
  const Vec y = Vec::LinSpaced(10, 0.0, 1.0);
  std::size_t swaps = 0;
  for (int k = 0; k < 10000; ++k) {
    std::size_t s = 0;
    channel.apply(y, &s);
    swaps += s;
  }
  EXPECT_NEAR(static_cast<double>(swaps) / 1e5, 0.2, 0.01);
}

TEST(QueryLedger, ExactBudget) {
  const FunctionForward f(1, 1, [](const Vec& p) { return p; });
  QueryLedger ledger(3);
  for (int i = 0; i < 3; ++i) ledger.query(f, Vec::Zero(1));
  EXPECT_EQ(ledger.used(), 3u);
  EXPECT_TRUE(ledger.exhausted());
  try {
    ledger.query(f, Vec::Zero(1));
    FAIL() << "expected BudgetError";
  } catch (const BudgetError& e) {
    EXPECT_EQ(e.used(), 3u);
    EXPECT_EQ(e.budget(), 3u);
  }
}

TEST(QueryLedger, LargeBudget) {
  const HarmonicEntangler e(1, 2, 4, 3, 1.0);
  QueryLedger ledger(8192);
  const Vec y = ledger.query(e, Vec::Zero(2));
  EXPECT_EQ(y, e.evaluate(Vec::Zero(2)));
  EXPECT_EQ(ledger.remaining(), 8191u);
}

}  // namespace
}  // namespace twincher
