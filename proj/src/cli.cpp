#include "twincher/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "twincher/bench.hpp"
#include "twincher/config.hpp"
#include "twincher/csv.hpp"
#include "twincher/gradcheck.hpp"

#ifndef TWINCHER_VERSION
#define TWINCHER_VERSION "0.0.0"
#endif

namespace twincher::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Flags {
  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> learner;
  std::optional<double> w_amp;
  std::optional<std::uint64_t> n_calls;
  std::optional<std::uint64_t> entangler_seed;
  std::optional<std::uint64_t> train_seed;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path, "JSON config file");
  sub->add_option("--set", f.sets, "Override a config key (key=value), repeatable");
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--seed", f.seed, "Master seed");
  sub->add_option("--jobs", f.jobs, "Parallel trials (default 1)");
}

void add_entangler(CLI::App* sub, Flags& f) {
  sub->add_option("--w-amp", f.w_amp, "Entangler frequency amplitude");
  sub->add_option("--entangler-seed", f.entangler_seed, "Entangler seed (default: --seed)");
}

void add_trial(CLI::App* sub, Flags& f) {
  sub->add_option("--learner", f.learner, "baseline or twincher");
  sub->add_option("--n-calls", f.n_calls, "Exploration query budget");
  sub->add_option("--train-seed", f.train_seed, "Training seed (default: --seed)");
}

json flag_overrides(const Flags& f) {
  json o = json::object();
  for (const auto& text : f.sets) {
    auto [key, value] = parse_assignment(text);
    o[key] = value;
  }
  if (f.out) o["out_dir"] = *f.out;
  if (f.seed) o["seed"] = *f.seed;
  if (f.jobs) o["jobs"] = *f.jobs;
  if (f.learner) o["learner"] = *f.learner;
  if (f.w_amp) o["w_amp"] = *f.w_amp;
  if (f.n_calls) o["n_calls"] = *f.n_calls;
  if (f.entangler_seed) o["entangler_seed"] = *f.entangler_seed;
  if (f.train_seed) o["train_seed"] = *f.train_seed;
  return o;
}

void write_json(const fs::path& path, const json& doc) {
  write_file(path, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
}

json versions() {
  return {{"twincher", TWINCHER_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION},
          {"compiler", __VERSION__}};
}

// Each command returns an exit code and lists the files it wrote.
struct Outcome {
  int code = kExitOk;
  std::vector<std::string> files;
};

Outcome cmd_gen_entangler(const RunConfig& c, const fs::path& dir, std::ostream& out) {
  const HarmonicEntangler e(c.resolved_entangler_seed(), c.n_p, c.n_s, c.e_n, c.w_amp);
  write_json(dir / "entangler.json", e.to_json());
  out << "entangler seed " << e.seed() << " written\n";
  return {kExitOk, {"entangler.json"}};
}

Outcome cmd_complexity(const RunConfig& c, const fs::path& dir, std::ostream& out) {
  const HarmonicEntangler e(c.resolved_entangler_seed(), c.n_p, c.n_s, c.e_n, c.w_amp);
  const auto est = estimate_complexity(e, {c.complexity_trials, c.complexity_steps, c.complexity_tol}, c.gn());
  write_json(dir / "complexity.json", {{"entangler_seed", est.entangler_seed},
                                       {"w_amp", c.w_amp},
                                       {"C", est.C},
                                       {"successes", est.successes},
                                       {"n_trials", est.n_trials}});
  out << "C = " << format_double(est.C) << " (" << est.successes << "/" << est.n_trials << ")\n";
  return {kExitOk, {"complexity.json"}};
}

Outcome cmd_trial(const RunConfig& c, const fs::path& dir, std::ostream& out, std::ostream& err) {
  const TrialRecord rec = run_trial(c.resolved_entangler_seed(), parse_learner_kind(c.learner), c.n_calls,
                                    c.resolved_train_seed(), c.trial_options());
  write_file(dir / "trials.csv", [&](std::ostream& os) { write_trials_csv(os, {rec}); });
  if (!rec.error.empty()) {
    err << "trial aborted: " << rec.error << '\n';
    return {kExitProtocolFailure, {"trials.csv"}};
  }
  out << to_string(rec.learner) << " C=" << format_double(rec.C)
      << " r_final=" << format_double(rec.worst_residuals.back()) << " success=" << rec.success << '\n';
  return {kExitOk, {"trials.csv"}};
}

Outcome cmd_sweep(const RunConfig& c, const fs::path& dir, std::ostream& out, std::ostream& err) {
  const SweepResult result = sweep(c.sweep_grid(), c.trial_options(), c.seed, c.jobs);
  write_file(dir / "trials.csv", [&](std::ostream& os) { write_trials_csv(os, result.records); });
  write_file(dir / "bands.csv", [&](std::ostream& os) { write_bands_csv(os, result.bands); });
  write_file(dir / "residual_curves.csv", [&](std::ostream& os) {
    write_residual_curves_csv(os, residual_curves(result.records, c.curve_c_max, c.curve_n_min));
  });
  std::size_t aborted = 0;
  for (const auto& r : result.records) {
    if (!r.error.empty()) {
      ++aborted;
      err << "trial " << r.entangler_seed << "/" << to_string(r.learner) << "/" << r.n_calls
          << " aborted: " << r.error << '\n';
    }
  }
  out << result.records.size() << " trials, " << aborted << " aborted\n";
  return {aborted == 0 ? kExitOk : kExitProtocolFailure, {"trials.csv", "bands.csv", "residual_curves.csv"}};
}

Outcome cmd_eta_scan(const RunConfig& c, const fs::path& dir, std::ostream& out) {
  const HarmonicEntangler e(c.resolved_entangler_seed(), c.n_p, c.n_s, c.e_n, c.w_amp);
  auto explore_rng = CounterRng::from(c.resolved_train_seed(), tags::kExplore);
  auto train_rng = CounterRng::from(c.resolved_train_seed(), tags::kTrainSeed);
  const Dataset data = explore_static(e, c.n_calls, explore_rng, true, c.fd_step);
  TwincherLearner learner = train_twincher(data, c.twincher, train_rng, c.proposal());
  learner.gn = c.gn();
  auto scan_rng = CounterRng::from(c.seed, tags::kEtaSamples);
  const EtaScanResult scan = eta_scan(learner, e, c.amplitudes, {c.eta_samples, c.n_refine, c.swap_prob}, scan_rng);
  write_file(dir / "eta.csv", [&](std::ostream& os) { write_eta_csv(os, scan.records); });
  write_json(dir / "eta_fit.json", {{"slope", scan.slope}, {"r_squared", scan.r_squared}, {"max_ratio", scan.max_ratio}});
  out << "eta = " << format_double(scan.slope) << " R^2 = " << format_double(scan.r_squared) << '\n';
  return {kExitOk, {"eta.csv", "eta_fit.json"}};
}

Outcome cmd_spiral_demo(const RunConfig& c, const fs::path& dir, std::ostream& out, std::ostream& err) {
  SpiralDemoOptions opts;
  opts.train_budget = c.spiral_budget;
  opts.grid_resolution = c.grid_resolution;
  opts.path_points = c.path_points;
  opts.train = c.spiral;
  auto rng = CounterRng::from(c.seed, tags::kExplore);
  const SpiralDemoResult r = spiral_demo(SpiralProcess{}, opts, rng);
  write_file(dir / "spiral_grid.csv", [&](std::ostream& os) { write_spiral_grid_csv(os, r.grid); });
  write_file(dir / "spiral_path.csv", [&](std::ostream& os) { write_spiral_path_csv(os, r.path); });
  json losses = json::array();
  for (const auto& l : r.loss_history) losses.push_back(l.total);
  write_json(dir / "spiral_report.json", {{"monotone", r.monotone},
                                          {"initial_monotone", r.initial_monotone},
                                          {"error", r.error},
                                          {"loss_history", losses}});
  const std::vector<std::string> files{"spiral_grid.csv", "spiral_path.csv", "spiral_report.json"};
  if (!r.error.empty()) {
    err << "spiral demo failed: " << r.error << '\n';
    return {kExitProtocolFailure, files};
  }
  out << "monotone = " << (r.monotone ? "true" : "false") << '\n';
  return {kExitOk, files};
}

Outcome cmd_check_gradients(const RunConfig& c, const fs::path& dir, std::ostream& out, std::ostream& err) {
  const GradientReport report = run_gradient_checks(c.seed, c.gradient_configs);
  write_file(dir / "gradients.csv", [&](std::ostream& os) {
    os << "check,config,max_rel_error,passed\n";
    for (const auto& g : report.checks) {
      os << g.name << ',' << g.config << ',' << format_double(g.max_rel_error) << ',' << (g.passed ? 1 : 0) << '\n';
    }
  });
  double worst = 0.0;
  for (const auto& g : report.checks) {
    worst = std::max(worst, g.max_rel_error);
    if (!g.passed) err << "FAIL " << g.name << " config " << g.config << " rel " << format_double(g.max_rel_error) << '\n';
  }
  out << report.checks.size() << " checks, worst relative error " << format_double(worst) << '\n';
  return {report.all_passed() ? kExitOk : kExitProtocolFailure, {"gradients.csv"}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  CLI::App app{"Bijective representation learning benchmarks", "twincher"};
  app.require_subcommand(1);
  app.set_version_flag("--version", TWINCHER_VERSION);
  Flags flags;
  std::vector<std::pair<std::string, CLI::App*>> subs;
  const std::vector<std::pair<std::string, std::string>> descriptions{
      {"gen-entangler", "Write a harmonic entangler's coefficients"},
      {"complexity", "Estimate an entangler's complexity C"},
      {"trial", "Explore, train one learner and solve test tasks"},
      {"sweep", "Run the (w_amp, seed, n_calls, learner) grid"},
      {"eta-scan", "Noise amplitude scan on a trained Twincher"},
      {"spiral-demo", "Train on the spiral and report monotonicity"},
      {"check-gradients", "Finite-difference gradient oracle suite"}};
  for (const auto& [name, help] : descriptions) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, flags);
    if (name != "spiral-demo" && name != "check-gradients") add_entangler(sub, flags);
    if (name == "trial" || name == "eta-scan") add_trial(sub, flags);
    subs.emplace_back(name, sub);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }

  RunConfig cfg;
  try {
    json overrides = flag_overrides(flags);
    if (const char* env = std::getenv("TWINCHER_OUT"); env && *env && !flags.out) {
      overrides["out_dir"] = env;
    }
    std::optional<fs::path> path;
    if (flags.config_path) path = *flags.config_path;
    cfg = parse_config(path, overrides, command);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }

  const fs::path dir = cfg.out_dir;
  Outcome outcome;
  json manifest = {{"command", cfg.command}, {"argv", args}, {"versions", versions()}};
  try {
    fs::create_directories(dir);
    write_json(dir / "resolved_config.json", cfg.to_json());
    if (command == "gen-entangler") {
      outcome = cmd_gen_entangler(cfg, dir, out);
    } else if (command == "complexity") {
      outcome = cmd_complexity(cfg, dir, out);
    } else if (command == "trial") {
      outcome = cmd_trial(cfg, dir, out, err);
    } else if (command == "sweep") {
      outcome = cmd_sweep(cfg, dir, out, err);
    } else if (command == "eta-scan") {
      outcome = cmd_eta_scan(cfg, dir, out);
    } else if (command == "spiral-demo") {
      outcome = cmd_spiral_demo(cfg, dir, out, err);
    } else {
      outcome = cmd_check_gradients(cfg, dir, out, err);
    }
  } catch (const std::exception& e) {
    err << command << " failed: " << e.what() << '\n';
    outcome.code = kExitProtocolFailure;
    manifest["error"] = e.what();
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  manifest["resolved_config"] = cfg.to_json();
  manifest["wall_time_seconds"] = wall;
  manifest["exit_code"] = outcome.code;
  outcome.files.insert(outcome.files.begin(), "resolved_config.json");
  manifest["outputs"] = outcome.files;
  try {
    write_json(dir / "run_manifest.json", manifest);
  } catch (const std::exception& e) {
    err << "cannot write run manifest: " << e.what() << '\n';
    return kExitProtocolFailure;
  }
  return outcome.code;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace twincher::cli
