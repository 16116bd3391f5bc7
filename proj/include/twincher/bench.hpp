#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "twincher/forward_models.hpp"
#include "twincher/learners.hpp"
#include "twincher/solve.hpp"

namespace twincher {

// ---------------------------------------------------------------------------
// Problem complexity

struct ComplexityEstimate {
  double C = 0.0;  // -log(success fraction), nats
  int n_trials = 0;
  int successes = 0;
  std::uint64_t entangler_seed = 0;
};

struct ComplexityOptions {
  int n_trials = 4000;
  int max_descent_steps = 50;
  double tol = 1e-2;
};

/// Fraction of random (start, target) pairs for which observation-space
/// Gauss-Newton from the start reaches the target observation within tol.
/// C = -log(max(successes, 1) / n_trials).
ComplexityEstimate estimate_complexity(const ForwardProcess& forward, int n_trials, const GnConfig& gn,
                                       int max_descent_steps, double tol, CounterRng& rng);

/// Complexity of an entangler with its seed-derived stream.
ComplexityEstimate estimate_complexity(const HarmonicEntangler& entangler, const ComplexityOptions& opts,
                                       const GnConfig& gn = {});

// ---------------------------------------------------------------------------
// Trials

enum class LearnerKind { kBaseline, kTwincher };

std::string to_string(LearnerKind kind);
LearnerKind parse_learner_kind(const std::string& name);

struct EntanglerShape {
  int n_p = 2;
  int n_s = 4;
  int e_n = 3;
};

struct TrialOptions {
  EntanglerShape shape;
  double w_amp = 1.0;
  int n_test = 1000;
  int n_refine = 5;
  double success_tol = 1e-2;
  ComplexityOptions complexity;
  GnConfig gn;
  TrainConfig twincher;
  SupervisedOptions proposal = default_proposal_options();
};

struct TrialRecord {
  std::uint64_t entangler_seed = 0;
  LearnerKind learner = LearnerKind::kBaseline;
  std::uint64_t n_calls = 0;
  std::uint64_t train_seed = 0;
  double C = 0.0;
  // Worst observation residual over the test batch at refinement steps 0..n_refine.
  std::vector<double> worst_residuals;
  // Mean observation residual over the test batch at the final step.
  double mean_final_residual = 0.0;
  bool success = false;
  double w_amp = 0.0;
  std::string error;  // non-empty when the trial aborted
};

/// Build the entangler, estimate C (unless given), explore under the ledger,
/// train the learner, then solve n_test inverse tasks y* = E(p*).
TrialRecord run_trial(std::uint64_t entangler_seed, LearnerKind learner, std::uint64_t n_calls,
                      std::uint64_t train_seed, const TrialOptions& opts,
                      std::optional<double> known_complexity = std::nullopt);

struct TestBatchResult {
  std::vector<double> worst_residuals;
  double mean_final_residual = 0.0;
};

/// Worst and mean observation residuals of a trained learner on a test batch.
template <class Learner>
TestBatchResult evaluate_learner(const Learner& learner, const ForwardProcess& forward,
                                 const std::vector<Vec>& p_true, int n_refine) {
  TestBatchResult out;
  out.worst_residuals.assign(static_cast<std::size_t>(n_refine) + 1, 0.0);
  for (const auto& p : p_true) {
    const Vec y = forward.evaluate(p);
    const RefinementTrace trace = solve_inverse(learner, forward, y, n_refine);
    for (std::size_t t = 0; t < out.worst_residuals.size(); ++t) {
      out.worst_residuals[t] = std::max(out.worst_residuals[t], trace.observation_residuals[t]);
    }
    out.mean_final_residual += trace.observation_residuals.back();
  }
  if (!p_true.empty()) out.mean_final_residual /= static_cast<double>(p_true.size());
  return out;
}

/// Test parameters drawn from the entangler seed's test stream.
std::vector<Vec> test_parameters(std::uint64_t entangler_seed, int n_p, int n_test);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepGrid {
  std::vector<double> w_amps{0.5, 0.75, 1.0, 1.25, 1.5};
  std::vector<std::uint64_t> n_calls{512, 1024, 2048, 4096, 8192};
  int seeds_per_cell = 3;
  std::vector<LearnerKind> learners{LearnerKind::kBaseline, LearnerKind::kTwincher};
};

struct TransitionBand {
  LearnerKind learner;
  std::uint64_t n_calls;
  std::optional<double> left;   // smallest C with a failure
  std::optional<double> right;  // largest C with a success
};

struct SweepResult {
  std::vector<TrialRecord> records;
  std::vector<TransitionBand> bands;
};

/// Entangler seed of grid cell (w_amp index, seed index) under a master seed.
std::uint64_t sweep_entangler_seed(std::uint64_t master_seed, std::size_t w_index, int seed_index);
std::uint64_t sweep_train_seed(std::uint64_t master_seed, int seed_index);

/// Runs every (w_amp, seed, n_calls, learner) trial. Results are ordered by
/// grid position regardless of `jobs`.
SweepResult sweep(const SweepGrid& grid, const TrialOptions& opts, std::uint64_t master_seed, int jobs = 1);

std::vector<TransitionBand> transition_bands(const std::vector<TrialRecord>& records);

struct CurveRow {
  std::size_t trial_id;
  LearnerKind learner;
  int step;
  double residual;
};

/// Step-indexed worst residuals of records with C < c_max and n_calls >= n_min.
std::vector<CurveRow> residual_curves(const std::vector<TrialRecord>& records, double c_max, std::uint64_t n_min);

// ---------------------------------------------------------------------------
// Noise robustness

struct EtaScanRecord {
  double amplitude = 0.0;
  double dy_rms = 0.0;
  double dp_rms = 0.0;
  double ratio = 0.0;
};

struct EtaScanResult {
  std::vector<EtaScanRecord> records;  // ascending amplitude
  double slope = 0.0;                  // through-origin least squares dp ~ slope * dy
  double r_squared = 0.0;              // uncentered, matching the zero-intercept model
  double max_ratio = 0.0;
};

struct EtaScanOptions {
  int n_samples = 200;
  int n_refine = 5;
  double swap_prob = 0.0;
};

EtaScanResult eta_scan(const TwincherLearner& learner, const ForwardProcess& forward,
                       const std::vector<double>& amplitudes, const EtaScanOptions& opts, CounterRng& rng);

/// Through-origin slope sum(dy dp) / sum(dy^2) and its uncentered R^2, over
/// records with dy_rms > 0.
std::pair<double, double> fit_through_origin(const std::vector<EtaScanRecord>& records);

// ---------------------------------------------------------------------------
// Spiral demo

struct SpiralGridRow {
  double y1, y2, u1;
};
struct SpiralPathRow {
  double p, u1;
};

struct SpiralDemoResult {
  std::vector<SpiralGridRow> grid;
  std::vector<SpiralPathRow> path;
  bool monotone = false;
  bool initial_monotone = false;
  std::vector<LossRecord> loss_history;
  std::string error;
};

struct SpiralDemoOptions {
  std::uint64_t train_budget = 512;
  int grid_resolution = 64;
  int path_points = 512;
  TrainConfig train = spiral_train_config();

  static TrainConfig spiral_train_config();
};

/// True when the sequence is strictly increasing or strictly decreasing.
bool strictly_monotone(const std::vector<double>& values);

/// u_1 along the spiral path for a given model.
std::vector<SpiralPathRow> spiral_path(const TwincherModel& model, const SpiralProcess& spiral, int n_points);

SpiralDemoResult spiral_demo(const SpiralProcess& spiral, const SpiralDemoOptions& opts, CounterRng& rng);

}  // namespace twincher
