#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "twincher/bench.hpp"

namespace twincher {
namespace {

TrialRecord make_record(LearnerKind learner, std::uint64_t n_calls, double C, bool success) {
  TrialRecord r;
  r.learner = learner;
  r.n_calls = n_calls;
  r.C = C;
  r.success = success;
  r.worst_residuals = {1.0, 0.5, 0.25, 0.1, 0.05, success ? 1e-3 : 0.5};
  return r;
}

TEST(Complexity, IdentityForwardIsZeroExactly) {
  const FunctionForward id(2, 2, [](const Vec& p) { return p; });
  CounterRng rng(1);
  const auto est = estimate_complexity(id, 200, GnConfig{}, 50, 1e-2, rng);
  EXPECT_EQ(est.successes, 200);
  EXPECT_EQ(est.C, 0.0);
}

TEST(Complexity, NearAffineEntanglerIsNearZero) {
  const HarmonicEntangler e(3, 2, 4, 3, 0.01);
  const auto est = estimate_complexity(e, {400, 50, 1e-2});
  EXPECT_LT(est.C, 0.05);
}

TEST(Complexity, SameSeedExactlyReproducible) {
  const HarmonicEntangler e(4, 2, 4, 3, 1.0);
  const auto a = estimate_complexity(e, {300, 50, 1e-2});
  const auto b = estimate_complexity(e, {300, 50, 1e-2});
  EXPECT_EQ(a.C, b.C);
  EXPECT_EQ(a.successes, b.successes);
  EXPECT_EQ(a.entangler_seed, 4u);
  EXPECT_NEAR(a.C, -std::log(std::max(a.successes, 1) / 300.0), 1e-15);
}

TEST(Trial, DefaultsAndEasyBaselineSuccess) {
  const TrialOptions defaults;
  EXPECT_EQ(defaults.n_test, 1000);
  EXPECT_EQ(defaults.n_refine, 5);
  EXPECT_EQ(defaults.success_tol, 1e-2);

  TrialOptions opts;
  opts.w_amp = 0.01;
  opts.n_test = 200;
  opts.complexity.n_trials = 200;
  const auto rec = run_trial(5, LearnerKind::kBaseline, 1024, 5, opts);
  ASSERT_TRUE(rec.error.empty()) << rec.error;
  ASSERT_EQ(rec.worst_residuals.size(), 6u);
  EXPECT_TRUE(rec.success);
  EXPECT_EQ(rec.success, rec.worst_residuals.back() < opts.success_tol);
}

TEST(Trial, KnownComplexitySkipsEstimate) {
  TrialOptions opts;
  opts.w_amp = 0.5;
  opts.n_test = 10;
  const auto rec = run_trial(6, LearnerKind::kBaseline, 128, 6, opts, 0.125);
  EXPECT_EQ(rec.C, 0.125);
  EXPECT_EQ(rec.success, rec.worst_residuals.back() < opts.success_tol);
}

TEST(LearnerKind, Names) {
  EXPECT_EQ(parse_learner_kind("baseline"), LearnerKind::kBaseline);
  EXPECT_EQ(parse_learner_kind(to_string(LearnerKind::kTwincher)), LearnerKind::kTwincher);
  EXPECT_THROW(parse_learner_kind("other"), ContractViolation);
}

TEST(TransitionBands, AllSuccessHasNoLeftEdge) {
  const auto bands = transition_bands({make_record(LearnerKind::kBaseline, 512, 0.2, true),
                                       make_record(LearnerKind::kBaseline, 512, 0.7, true)});
  ASSERT_EQ(bands.size(), 1u);
  EXPECT_FALSE(bands[0].left.has_value());
  EXPECT_EQ(bands[0].right, 0.7);
}

TEST(TransitionBands, SingleTrial) {
  auto bands = transition_bands({make_record(LearnerKind::kTwincher, 64, 0.4, false)});
  ASSERT_EQ(bands.size(), 1u);
  EXPECT_EQ(bands[0].left, 0.4);
  EXPECT_FALSE(bands[0].right.has_value());
}

TEST(TransitionBands, MatchesBruteForce) {
  CounterRng rng(9);
  std::vector<TrialRecord> records;
  for (int i = 0; i < 200; ++i) {
    const auto learner = rng.below(2) ? LearnerKind::kTwincher : LearnerKind::kBaseline;
    const std::uint64_t n_calls = 512u << rng.below(3);
    records.push_back(make_record(learner, n_calls, rng.uniform(0.0, 3.0), rng.below(2) == 0));
  }
  const auto bands = transition_bands(records);
  EXPECT_EQ(bands.size(), 6u);
  for (const auto& band : bands) {
    std::optional<double> left, right;
    for (const auto& r : records) {
      if (r.learner != band.learner || r.n_calls != band.n_calls) continue;
      if (r.success) {
        right = std::max(right.value_or(-1.0), r.C);
      } else {
        left = std::min(left.value_or(1e9), r.C);
      }
    }
    EXPECT_EQ(band.left, left);
    EXPECT_EQ(band.right, right);
  }
}

TEST(ResidualCurves, FilterAndProjection) {
  std::vector<TrialRecord> records{make_record(LearnerKind::kTwincher, 8192, 0.5, true),
                                   make_record(LearnerKind::kBaseline, 8192, 1.5, true),
                                   make_record(LearnerKind::kBaseline, 4096, 0.2, false),
                                   make_record(LearnerKind::kBaseline, 16384, 0.9, false)};
  const auto rows = residual_curves(records, 1.0, 8192);
  ASSERT_EQ(rows.size(), 12u);
  for (const auto& row : rows) {
    ASSERT_TRUE(row.trial_id == 0 || row.trial_id == 3);
    EXPECT_EQ(row.learner, records[row.trial_id].learner);
    EXPECT_EQ(row.residual, records[row.trial_id].worst_residuals[static_cast<std::size_t>(row.step)]);
  }
}

TEST(FitThroughOrigin, MatchesClosedForm) {
  std::vector<EtaScanRecord> recs{{0.0, 0.0, 0.0, 0.0}, {1e-3, 0.6e-3, 1.1e-3, 0.0}, {1e-2, 5.9e-3, 1.3e-2, 0.0}};
  const auto [slope, r2] = fit_through_origin(recs);
  const double sxy = 0.6e-3 * 1.1e-3 + 5.9e-3 * 1.3e-2;
  const double sxx = 0.6e-3 * 0.6e-3 + 5.9e-3 * 5.9e-3;
  const double expected = sxy / sxx;
  EXPECT_NEAR(slope, expected, 1e-10);
  const double ssr = std::pow(1.1e-3 - expected * 0.6e-3, 2) + std::pow(1.3e-2 - expected * 5.9e-3, 2);
  const double syy = 1.1e-3 * 1.1e-3 + 1.3e-2 * 1.3e-2;
  EXPECT_NEAR(r2, 1.0 - ssr / syy, 1e-12);
}

TwincherLearner easy_learner() {
  static const FunctionForward f(2, 4, [](const Vec& p) {
    Vec y = Vec::Zero(4);
    y.head(2) = 0.5 * p;
    y(2) = 0.1 * p(0) * p(1);
    return y;
  });
  CounterRng rng(1);
  const Dataset data = explore_static(f, 600, rng, true);
  TrainConfig cfg;
  cfg.n_layers = 4;
  cfg.epochs = 30;
  auto train_rng = CounterRng::from(1, tags::kTrainSeed);
  return train_twincher(data, cfg, train_rng);
}

TEST(EtaScan, SortedRecordsAndNoiselessRecovery) {
  static const FunctionForward f(2, 4, [](const Vec& p) {
    Vec y = Vec::Zero(4);
    y.head(2) = 0.5 * p;
    y(2) = 0.1 * p(0) * p(1);
    return y;
  });
  const auto learner = easy_learner();
  CounterRng rng(2);
  const auto scan = eta_scan(learner, f, {0.01, 0.0, 0.001}, {50, 5, 0.0}, rng);
  ASSERT_EQ(scan.records.size(), 3u);
  EXPECT_TRUE(std::is_sorted(scan.records.begin(), scan.records.end(),
                             [](const auto& a, const auto& b) { return a.amplitude < b.amplitude; }));
  EXPECT_EQ(scan.records[0].dy_rms, 0.0);
  EXPECT_LT(scan.records[0].dp_rms, 1e-4);
  const auto [slope, r2] = fit_through_origin(scan.records);
  EXPECT_EQ(slope, scan.slope);
  EXPECT_EQ(r2, scan.r_squared);
  EXPECT_TRUE(std::isfinite(scan.max_ratio));
}

TEST(Monotone, Definition) {
  EXPECT_TRUE(strictly_monotone({1.0, 2.0, 3.0}));
  EXPECT_TRUE(strictly_monotone({3.0, 2.0, -1.0}));
  EXPECT_FALSE(strictly_monotone({1.0, 1.0, 2.0}));
  EXPECT_FALSE(strictly_monotone({1.0, 3.0, 2.0}));
}

TEST(SpiralDemo, OutputShapesAndInitialFold) {
  SpiralDemoOptions opts;
  opts.grid_resolution = 16;
  opts.path_points = 128;
  opts.train.epochs = 3;
  CounterRng rng(1);
  const auto result = spiral_demo(SpiralProcess{}, opts, rng);
  ASSERT_TRUE(result.error.empty()) << result.error;
  EXPECT_EQ(result.grid.size(), 256u);
  EXPECT_EQ(result.path.size(), 128u);
  EXPECT_EQ(result.loss_history.size(), 3u);
  EXPECT_FALSE(result.initial_monotone);
  EXPECT_EQ(result.path.front().p, -1.0);
  EXPECT_EQ(result.path.back().p, 1.0);
}

TEST(Sweep, SeedsAreDistinct) {
  std::set<std::uint64_t> seeds;
  for (std::size_t w = 0; w < 5; ++w) {
    for (int s = 0; s < 3; ++s) seeds.insert(sweep_entangler_seed(1, w, s));
  }
  EXPECT_EQ(seeds.size(), 15u);
  EXPECT_NE(sweep_train_seed(1, 0), sweep_train_seed(1, 1));
}

TEST(Sweep, ParallelMatchesSerial) {
  SweepGrid grid;
  grid.w_amps = {0.5, 1.0};
  grid.n_calls = {48, 96};
  grid.seeds_per_cell = 1;
  grid.learners = {LearnerKind::kBaseline};
  TrialOptions opts;
  opts.n_test = 5;
  opts.complexity.n_trials = 20;
  opts.proposal.max_epochs = 20;
  const auto serial = sweep(grid, opts, 7, 1);
  const auto parallel = sweep(grid, opts, 7, 3);
  ASSERT_EQ(serial.records.size(), 4u);
  ASSERT_EQ(parallel.records.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(serial.records[i].entangler_seed, parallel.records[i].entangler_seed);
    EXPECT_EQ(serial.records[i].worst_residuals, parallel.records[i].worst_residuals);
    EXPECT_EQ(serial.records[i].C, parallel.records[i].C);
  }
  EXPECT_EQ(serial.bands.size(), 2u);
}

}  // namespace
}  // namespace twincher
