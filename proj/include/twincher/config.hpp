#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twincher/bench.hpp"

namespace twincher {

/// Invalid configuration: unknown key, type mismatch, bad value or missing command.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> commands{"gen-entangler", "complexity", "trial",        "sweep",
                                                 "eta-scan",      "spiral-demo", "check-gradients"};
  return commands;
}

/// Fully resolved run configuration. Every field has a flat JSON key of the
/// same name.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 1;
  std::string out_dir = "twincher_out";
  int jobs = 1;

  // Entangler.
  int n_p = 2;
  int n_s = 4;
  int e_n = 3;
  double w_amp = 1.0;
  std::optional<std::uint64_t> entangler_seed;  // defaults to seed

  // Trial protocol.
  std::string learner = "baseline";
  std::uint64_t n_calls = 1024;
  std::optional<std::uint64_t> train_seed;  // defaults to seed
  int n_test = 1000;
  int n_refine = 5;
  double success_tol = 1e-2;

  // Complexity estimator.
  int complexity_trials = 4000;
  int complexity_steps = 50;
  double complexity_tol = 1e-2;

  // Gauss-Newton.
  double lambda = 1e-3;
  double delta_max = 0.1;
  double fd_step = 1e-7;

  // Baseline and proposal networks.
  double lr = 1e-3;
  int max_epochs = 1000;
  int patience = 10;
  double val_fraction = 0.1;
  int batch_size = 32;

  // Twincher training.
  TrainConfig twincher;

  // Sweep grid.
  std::vector<double> w_amps;
  std::vector<std::uint64_t> n_calls_grid;
  int seeds_per_cell = 3;
  std::vector<std::string> learners;
  double curve_c_max = 1.0;
  std::uint64_t curve_n_min = 8192;

  // Eta scan.
  std::vector<double> amplitudes;
  int eta_samples = 200;
  double swap_prob = 0.0;

  // Spiral demo.
  std::uint64_t spiral_budget = 512;
  int grid_resolution = 64;
  int path_points = 512;
  TrainConfig spiral;

  // Gradient checks.
  int gradient_configs = 20;

  std::uint64_t resolved_entangler_seed() const { return entangler_seed.value_or(seed); }
  std::uint64_t resolved_train_seed() const { return train_seed.value_or(seed); }

  GnConfig gn() const;
  SupervisedOptions proposal() const;
  TrialOptions trial_options() const;
  SweepGrid sweep_grid() const;
  EntanglerShape shape() const { return {n_p, n_s, e_n}; }

  nlohmann::json to_json() const;
  /// Strict: every key must be known and correctly typed.
  static RunConfig from_json(const nlohmann::json& doc);
};

/// Documented defaults as a flat JSON object (command empty).
nlohmann::json config_defaults();

/// Overlay `overrides` onto `resolved`, rejecting unknown keys and type
/// mismatches with an error naming the key.
void merge_config(nlohmann::json& resolved, const nlohmann::json& overrides, const std::string& source);

/// Parses "key=value" with the value read as JSON when possible, else as a string.
std::pair<std::string, nlohmann::json> parse_assignment(const std::string& text);

/// Defaults, then the optional JSON file, then inline overrides in order.
/// The command comes from `command` when non-empty, else from the file.
RunConfig parse_config(const std::optional<std::filesystem::path>& path, const nlohmann::json& inline_overrides,
                       const std::string& command);

}  // namespace twincher
