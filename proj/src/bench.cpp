#include "twincher/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

namespace twincher {

namespace {

Vec uniform_point(CounterRng& rng, int n) {
  Vec p(n);
  for (int i = 0; i < n; ++i) p(i) = rng.uniform(-1.0, 1.0);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Complexity

ComplexityEstimate estimate_complexity(const ForwardProcess& forward, int n_trials, const GnConfig& gn,
                                       int max_descent_steps, double tol, CounterRng& rng) {
  if (n_trials < 1) throw ContractViolation("estimate_complexity: n_trials must be >= 1");
  const VecFn f = [&](const Vec& p) { return forward.evaluate(p); };
  ComplexityEstimate est;
  est.n_trials = n_trials;
  for (int trial = 0; trial < n_trials; ++trial) {
    const Vec p_star = uniform_point(rng, forward.n_p());
    const Vec p_in = uniform_point(rng, forward.n_p());
    const Vec y_star = forward.evaluate(p_star);
    const RefinementTrace trace = refine(f, y_star, p_in, gn, max_descent_steps);
    if (trace.residual_norms.back() < tol) ++est.successes;
  }
  est.C = -std::log(static_cast<double>(std::max(est.successes, 1)) / n_trials);
  if (est.successes == n_trials) est.C = 0.0;
  return est;
}

ComplexityEstimate estimate_complexity(const HarmonicEntangler& entangler, const ComplexityOptions& opts,
                                       const GnConfig& gn) {
  auto rng = CounterRng::from(entangler.seed(), tags::kComplexity);
  auto est = estimate_complexity(entangler, opts.n_trials, gn, opts.max_descent_steps, opts.tol, rng);
  est.entangler_seed = entangler.seed();
  return est;
}

// ---------------------------------------------------------------------------
// Trials

std::string to_string(LearnerKind kind) { return kind == LearnerKind::kBaseline ? "baseline" : "twincher"; }

LearnerKind parse_learner_kind(const std::string& name) {
  if (name == "baseline") return LearnerKind::kBaseline;
  if (name == "twincher") return LearnerKind::kTwincher;
  throw ContractViolation("unknown learner '" + name + "' (expected baseline or twincher)");
}

std::vector<Vec> test_parameters(std::uint64_t entangler_seed, int n_p, int n_test) {
  auto rng = CounterRng::from(entangler_seed, tags::kTestTasks);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(std::max(n_test, 0)));
  for (int i = 0; i < n_test; ++i) out.push_back(uniform_point(rng, n_p));
  return out;
}

TrialRecord run_trial(std::uint64_t entangler_seed, LearnerKind learner, std::uint64_t n_calls,
                      std::uint64_t train_seed, const TrialOptions& opts, std::optional<double> known_complexity) {
  if (opts.n_test < 1) throw ContractViolation("run_trial: n_test must be >= 1");
  if (opts.n_refine < 0) throw ContractViolation("run_trial: n_refine must be >= 0");
  TrialRecord rec;
  rec.entangler_seed = entangler_seed;
  rec.learner = learner;
  rec.n_calls = n_calls;
  rec.train_seed = train_seed;
  rec.w_amp = opts.w_amp;
  rec.worst_residuals.assign(static_cast<std::size_t>(opts.n_refine) + 1,
                             std::numeric_limits<double>::quiet_NaN());
  rec.mean_final_residual = std::numeric_limits<double>::quiet_NaN();

  const HarmonicEntangler entangler(entangler_seed, opts.shape.n_p, opts.shape.n_s, opts.shape.e_n, opts.w_amp);
  rec.C = known_complexity ? *known_complexity : estimate_complexity(entangler, opts.complexity, opts.gn).C;

  const auto p_true = test_parameters(entangler_seed, opts.shape.n_p, opts.n_test);
  auto explore_rng = CounterRng::from(train_seed, tags::kExplore);
  auto train_rng = CounterRng::from(train_seed, tags::kTrainSeed);
  try {
    TestBatchResult result;
    if (learner == LearnerKind::kBaseline) {
      const Dataset data = explore_static(entangler, n_calls, explore_rng, false, opts.gn.fd_step);
      BaselineLearner trained = train_baseline(data, train_rng, opts.proposal);
      trained.gn = opts.gn;
      result = evaluate_learner(trained, entangler, p_true, opts.n_refine);
    } else {
      const Dataset data = explore_static(entangler, n_calls, explore_rng, true, opts.gn.fd_step);
      TwincherLearner trained = train_twincher(data, opts.twincher, train_rng, opts.proposal);
      trained.gn = opts.gn;
      result = evaluate_learner(trained, entangler, p_true, opts.n_refine);
    }
    rec.worst_residuals = std::move(result.worst_residuals);
    rec.mean_final_residual = result.mean_final_residual;
    rec.success = rec.worst_residuals.back() < opts.success_tol;
  } catch (const std::exception& e) {
    rec.error = e.what();
    rec.success = false;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Sweeps

std::uint64_t sweep_entangler_seed(std::uint64_t master_seed, std::size_t w_index, int seed_index) {
  return derive_key(master_seed, tags::kEntanglerSeed, (static_cast<std::uint64_t>(w_index) << 32) |
                                                           static_cast<std::uint32_t>(seed_index));
}

std::uint64_t sweep_train_seed(std::uint64_t master_seed, int seed_index) {
  return derive_key(master_seed, tags::kTrainSeed, static_cast<std::uint64_t>(seed_index));
}

std::vector<TransitionBand> transition_bands(const std::vector<TrialRecord>& records) {
  std::map<std::pair<int, std::uint64_t>, TransitionBand> bands;
  for (const auto& r : records) {
    const auto key = std::make_pair(static_cast<int>(r.learner), r.n_calls);
    auto [it, inserted] = bands.try_emplace(key, TransitionBand{r.learner, r.n_calls, std::nullopt, std::nullopt});
    auto& band = it->second;
    if (r.success) {
      band.right = band.right ? std::max(*band.right, r.C) : r.C;
    } else {
      band.left = band.left ? std::min(*band.left, r.C) : r.C;
    }
  }
  std::vector<TransitionBand> out;
  out.reserve(bands.size());
  for (auto& [key, band] : bands) out.push_back(band);
  return out;
}

SweepResult sweep(const SweepGrid& grid, const TrialOptions& opts, std::uint64_t master_seed, int jobs) {
  if (grid.w_amps.empty() || grid.n_calls.empty() || grid.learners.empty() || grid.seeds_per_cell < 1) {
    throw ContractViolation("sweep: empty grid");
  }
  struct Cell {
    std::size_t w_index;
    int seed_index;
  };
  std::vector<Cell> cells;
  for (std::size_t w = 0; w < grid.w_amps.size(); ++w) {
    for (int s = 0; s < grid.seeds_per_cell; ++s) cells.push_back({w, s});
  }

  // Complexity once per entangler.
  std::vector<double> complexity(cells.size());
  struct Task {
    std::size_t cell;
    std::uint64_t n_calls;
    LearnerKind learner;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (auto n_calls : grid.n_calls) {
      for (auto learner : grid.learners) tasks.push_back({c, n_calls, learner});
    }
  }

  auto run_parallel = [jobs](std::size_t count, const auto& work) {
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || count <= 1) {
      for (std::size_t i = 0; i < count; ++i) work(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(workers, count); ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) work(i);
      });
    }
    for (auto& th : pool) th.join();
  };

  run_parallel(cells.size(), [&](std::size_t c) {
    TrialOptions o = opts;
    o.w_amp = grid.w_amps[cells[c].w_index];
    const HarmonicEntangler e(sweep_entangler_seed(master_seed, cells[c].w_index, cells[c].seed_index), o.shape.n_p,
                              o.shape.n_s, o.shape.e_n, o.w_amp);
    complexity[c] = estimate_complexity(e, o.complexity, o.gn).C;
  });

  SweepResult result;
  result.records.resize(tasks.size());
  run_parallel(tasks.size(), [&](std::size_t i) {
    const auto& task = tasks[i];
    const auto& cell = cells[task.cell];
    TrialOptions o = opts;
    o.w_amp = grid.w_amps[cell.w_index];
    result.records[i] = run_trial(sweep_entangler_seed(master_seed, cell.w_index, cell.seed_index), task.learner,
                                  task.n_calls, sweep_train_seed(master_seed, cell.seed_index), o,
                                  complexity[task.cell]);
  });
  result.bands = transition_bands(result.records);
  return result;
}

std::vector<CurveRow> residual_curves(const std::vector<TrialRecord>& records, double c_max, std::uint64_t n_min) {
  std::vector<CurveRow> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!(r.C < c_max) || r.n_calls < n_min) continue;
    for (std::size_t t = 0; t < r.worst_residuals.size(); ++t) {
      rows.push_back({i, r.learner, static_cast<int>(t), r.worst_residuals[t]});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Eta scan

std::pair<double, double> fit_through_origin(const std::vector<EtaScanRecord>& records) {
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& r : records) {
    if (!(r.dy_rms > 0.0)) continue;
    sxy += r.dy_rms * r.dp_rms;
    sxx += r.dy_rms * r.dy_rms;
    syy += r.dp_rms * r.dp_rms;
  }
  if (sxx == 0.0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double slope = sxy / sxx;
  double ssr = 0.0;
  for (const auto& r : records) {
    if (!(r.dy_rms > 0.0)) continue;
    const double res = r.dp_rms - slope * r.dy_rms;
    ssr += res * res;
  }
  const double r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return {slope, r2};
}

EtaScanResult eta_scan(const TwincherLearner& learner, const ForwardProcess& forward,
                       const std::vector<double>& amplitudes, const EtaScanOptions& opts, CounterRng& rng) {
  if (opts.n_samples < 1) throw ContractViolation("eta_scan: n_samples must be >= 1");
  std::vector<double> amps = amplitudes;
  for (double a : amps) {
    if (!(a >= 0.0)) throw ContractViolation("eta_scan: amplitudes must be >= 0");
  }
  std::sort(amps.begin(), amps.end());
  EtaScanResult result;
  for (std::size_t k = 0; k < amps.size(); ++k) {
    auto sample_rng = rng.split(tags::kEtaSamples, k);
    NoiseChannel channel(amps[k], opts.swap_prob, rng.split(tags::kNoise, k).next_u64());
    double dy2 = 0.0, dp2 = 0.0;
    std::size_t ny = 0, np = 0;
    for (int s = 0; s < opts.n_samples; ++s) {
      const Vec p_true = uniform_point(sample_rng, forward.n_p());
      const Vec y_clean = forward.evaluate(p_true);
      const Vec y_noisy = channel.apply(y_clean);
      const RefinementTrace trace = solve_inverse(learner, forward, y_noisy, opts.n_refine);
      dy2 += (y_noisy - y_clean).squaredNorm();
      dp2 += (trace.iterates.back() - p_true).squaredNorm();
      ny += static_cast<std::size_t>(y_clean.size());
      np += static_cast<std::size_t>(p_true.size());
    }
    EtaScanRecord rec;
    rec.amplitude = amps[k];
    rec.dy_rms = std::sqrt(dy2 / static_cast<double>(ny));
    rec.dp_rms = std::sqrt(dp2 / static_cast<double>(np));
    rec.ratio = rec.dy_rms > 0.0 ? rec.dp_rms / rec.dy_rms : std::numeric_limits<double>::quiet_NaN();
    if (rec.dy_rms > 0.0) result.max_ratio = std::max(result.max_ratio, rec.ratio);
    result.records.push_back(rec);
  }
  std::tie(result.slope, result.r_squared) = fit_through_origin(result.records);
  return result;
}

// ---------------------------------------------------------------------------
// Spiral demo

TrainConfig SpiralDemoOptions::spiral_train_config() {
  TrainConfig cfg;
  cfg.n_layers = 32;
  cfg.epochs = 1500;
  cfg.lr = 3e-3;
  cfg.rob_weight = 0.0;
  cfg.jacobian_batch = 0;
  return cfg;
}

bool strictly_monotone(const std::vector<double>& values) {
  if (values.size() < 2) return true;
  bool inc = true, dec = true;
  for (std::size_t i = 1; i < values.size(); ++i) {
    inc = inc && values[i] > values[i - 1];
    dec = dec && values[i] < values[i - 1];
  }
  return inc || dec;
}

std::vector<SpiralPathRow> spiral_path(const TwincherModel& model, const SpiralProcess& spiral, int n_points) {
  if (n_points < 2) throw ContractViolation("spiral_path: need at least two points");
  std::vector<SpiralPathRow> rows;
  rows.reserve(static_cast<std::size_t>(n_points));
  Vec p(1);
  for (int i = 0; i < n_points; ++i) {
    p(0) = -1.0 + 2.0 * i / (n_points - 1);
    rows.push_back({p(0), model.latent(spiral.evaluate(p))(0)});
  }
  return rows;
}

SpiralDemoResult spiral_demo(const SpiralProcess& spiral, const SpiralDemoOptions& opts, CounterRng& rng) {
  if (opts.grid_resolution < 16) throw ContractViolation("spiral_demo: grid_resolution must be >= 16");
  SpiralDemoResult result;
  auto values = [](const std::vector<SpiralPathRow>& rows) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.u1);
    return v;
  };

  auto explore_rng = rng.split(tags::kExplore);
  auto train_rng = rng.split(tags::kTrainSeed);
  const Dataset data = explore_static(spiral, opts.train_budget, explore_rng, true);

  // Same architecture seed as training draws first, with the initial parameters.
  {
    auto peek = train_rng;
    const TwincherModel initial(peek.next_u64(), 2, 1, opts.train.n_layers, opts.train.s_max, opts.train.init_scale,
                                 opts.train.shift_features);
    result.initial_monotone = strictly_monotone(values(spiral_path(initial, spiral, opts.path_points)));
  }

  std::optional<TwincherModel> model;
  try {
    TrainConfig cfg = opts.train;
    TwincherLearner learner = train_twincher(data, cfg, train_rng);
    result.loss_history = learner.loss_history;
    model.emplace(std::move(learner.model));
  } catch (const std::exception& e) {
    result.error = e.what();
    return result;
  }
  for (const auto& rec : result.loss_history) {
    if (!std::isfinite(rec.total)) {
      result.error = "training diverged";
      return result;
    }
  }

  const int res = opts.grid_resolution;
  Vec y(2);
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      y << -0.95 + 1.9 * i / (res - 1), -0.95 + 1.9 * j / (res - 1);
      result.grid.push_back({y(0), y(1), model->latent(y)(0)});
    }
  }
  result.path = spiral_path(*model, spiral, opts.path_points);
  result.monotone = strictly_monotone(values(result.path));
  return result;
}

}  // namespace twincher
