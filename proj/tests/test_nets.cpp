#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "twincher/gradcheck.hpp"
#include "twincher/nets.hpp"

namespace twincher {
namespace {

TEST(Mlp, ParameterCountOfProposalArchitecture) {
  const Mlp net(1, {4, 16, 16, 16, 16, 2}, 1.5);
  EXPECT_EQ(net.parameter_count(), 4u * 16 + 16 + 3 * (16 * 16 + 16) + 16 * 2 + 2);
  EXPECT_EQ(net.parameter_count(), 930u);
}

TEST(Mlp, SeedDeterminism) {
  EXPECT_EQ(Mlp(3, {2, 5, 1}, 1.0).theta(), Mlp(3, {2, 5, 1}, 1.0).theta());
  EXPECT_NE(Mlp(3, {2, 5, 1}, 1.0).theta(), Mlp(4, {2, 5, 1}, 1.0).theta());
}

TEST(Mlp, OutputsBoundedByScale) {
  Mlp net(2, {3, 8, 2}, 1.5);
  net.set_theta(net.theta() * 50.0);
  CounterRng rng(7);
  for (int k = 0; k < 200; ++k) {
    Vec x(3);
    for (int i = 0; i < 3; ++i) x(i) = rng.uniform(-10.0, 10.0);
    const Vec out = net.forward(x);
    EXPECT_LE(out.cwiseAbs().maxCoeff(), 1.5);
  }
}

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  Mlp net(2, {3, 8, 2}, 1.5);
  net.set_theta(Vec::Zero(static_cast<Eigen::Index>(net.parameter_count())));
  EXPECT_EQ(net.forward(Vec::Constant(3, 0.7)), Vec::Zero(2));
}

TEST(Mlp, BackpropMatchesFiniteDifferences) {
  const Mlp net(5, {3, 7, 6, 2}, 1.5);
  const Vec x = Vec::LinSpaced(3, -0.8, 0.6);
  const Vec v = Vec::LinSpaced(2, 0.3, -1.1);
  const auto g = net.backprop(x, v);
  const Vec numeric = central_gradient(
      [&](const Vec& th) {
        Mlp copy = net;
        copy.set_theta(th);
        return v.dot(copy.forward(x));
      },
      net.theta(), 1e-6);
  EXPECT_LT(relative_error(g.theta, numeric), 1e-4);
  const auto zero = net.backprop(x, Vec::Zero(2));
  EXPECT_EQ(zero.theta.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(zero.x.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Mlp, JsonRoundTrip) {
  const Mlp net(8, {2, 4, 1}, 1.5);
  const Mlp back = Mlp::from_json(net.to_json());
  EXPECT_EQ(back.theta(), net.theta());
  EXPECT_EQ(back.widths(), net.widths());
}

TEST(Adam, ZeroGradientLeavesThetaUnchanged) {
  AdamState state;
  const Vec theta = Vec::LinSpaced(4, -1.0, 1.0);
  EXPECT_EQ(adam_step(state, theta, Vec::Zero(4)), theta);
}

TEST(Adam, FirstStepHasMagnitudeLr) {
  AdamState state;
  state.lr = 1e-2;
  const Vec theta = Vec::Zero(3);
  Vec g(3);
  g << 2.0, -0.5, 1e3;
  const Vec next = adam_step(state, theta, g);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(next(i), -state.lr * std::copysign(1.0, g(i)), 1e-8);

  AdamState other;
  other.lr = 1e-2;
  const Vec again = adam_step(other, theta, g);
  EXPECT_EQ(again, next);
}

TEST(TrainSupervised, FitsLinearTarget) {
  CounterRng data_rng(1);
  Mat x(100, 2), y(100, 2);
  for (int i = 0; i < 100; ++i) {
    x(i, 0) = data_rng.uniform(-1.0, 1.0);
    x(i, 1) = data_rng.uniform(-1.0, 1.0);
  }
  y = x;
  Mlp net(2, {2, 16, 16, 2}, 1.5);
  SupervisedOptions opts;
  opts.max_epochs = 3000;
  opts.patience = 200;
  opts.lr = 1e-2;
  auto rng = CounterRng::from(3, tags::kTrainSplit);
  const auto result = train_supervised(net, x, y, opts, rng);
  EXPECT_LT(net.mse(x, y), 1e-3);
  EXPECT_FALSE(result.val_loss.empty());
  EXPECT_GE(result.best_epoch, 0);
}

TEST(TrainSupervised, SmallDatasetRunsAllEpochsWithoutSplit) {
  Mat x = Mat::Random(10, 2) * 0.5;
  Mat y = Mat::Constant(10, 1, 0.3);
  Mlp net(2, {2, 4, 1}, 1.5);
  SupervisedOptions opts;
  opts.max_epochs = 500;
  opts.lr = 1e-2;
  CounterRng rng(5);
  const auto result = train_supervised(net, x, y, opts, rng);
  EXPECT_EQ(result.epochs_run, 500);
  EXPECT_TRUE(result.val_loss.empty());
  EXPECT_FALSE(result.early_stopped);
  EXPECT_LT(net.mse(x, y), 1e-4);
}

TEST(TrainSupervised, EarlyStoppingKeepsBestParameters) {
  CounterRng data_rng(2);
  Mat x(40, 1), y(40, 1);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = data_rng.uniform(-1.0, 1.0);
    y(i, 0) = data_rng.uniform(-1.0, 1.0);
  }
  Mlp net(4, {1, 32, 32, 1}, 1.5);
  SupervisedOptions opts;
  opts.max_epochs = 5000;
  opts.patience = 10;
  opts.lr = 1e-2;
  CounterRng rng(9);
  const auto result = train_supervised(net, x, y, opts, rng);
  ASSERT_TRUE(result.early_stopped);
  ASSERT_FALSE(result.val_loss.empty());
  const double best = *std::min_element(result.val_loss.begin(), result.val_loss.end());
  EXPECT_EQ(result.val_loss[static_cast<std::size_t>(result.best_epoch)], best);
  EXPECT_EQ(result.epochs_run, result.best_epoch + 1 + opts.patience);
}

TEST(TrainSupervised, Deterministic) {
  Mat x = Mat::Random(30, 2);
  Mat y = x.rowwise().sum();
  SupervisedOptions opts;
  opts.max_epochs = 50;
  Mlp a(1, {2, 4, 1}, 1.5), b(1, {2, 4, 1}, 1.5);
  CounterRng ra(3), rb(3);
  train_supervised(a, x, y, opts, ra);
  train_supervised(b, x, y, opts, rb);
  EXPECT_EQ(a.theta(), b.theta());
}

}  // namespace
}  // namespace twincher
