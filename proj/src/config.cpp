#include "twincher/config.hpp"

#include <algorithm>
#include <fstream>

namespace twincher {

namespace {

using nlohmann::json;

const char* kTwincherPrefix = "twincher_";
const char* kSpiralPrefix = "spiral_";

void put_train(json& doc, const TrainConfig& cfg, const std::string& prefix) {
  const json inner = cfg.to_json();
  for (const auto& [key, value] : inner.items()) doc[prefix + key] = value;
}

TrainConfig get_train(const json& doc, const std::string& prefix) {
  const json defaults = TrainConfig{}.to_json();
  json inner = json::object();
  for (const auto& [key, value] : defaults.items()) inner[key] = doc.at(prefix + key);
  TrainConfig cfg = TrainConfig::from_json(inner);
  try {
    cfg.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(prefix + "*: " + e.what());
  }
  return cfg;
}

template <class T>
T get_key(const json& doc, const std::string& key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "': wrong type");
  }
}

bool same_kind(const json& def, const json& value) {
  if (def.is_null()) return value.is_null() || value.is_number_unsigned() || (value.is_number_integer() && value >= 0);
  if (def.is_boolean()) return value.is_boolean();
  if (def.is_string()) return value.is_string();
  if (def.is_array()) return value.is_array();
  if (def.is_number_float()) return value.is_number();
  if (def.is_number_unsigned()) return value.is_number_unsigned() || (value.is_number_integer() && value >= 0);
  if (def.is_number_integer()) return value.is_number_integer();
  return false;
}

const char* kind_name(const json& def) {
  if (def.is_null()) return "a non-negative integer or null";
  if (def.is_boolean()) return "a boolean";
  if (def.is_string()) return "a string";
  if (def.is_array()) return "an array";
  if (def.is_number_float()) return "a number";
  return "an integer";
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("config key '" + key + "': " + what);
}

}  // namespace

GnConfig RunConfig::gn() const {
  GnConfig g;
  g.lambda = lambda;
  g.delta_max = delta_max;
  g.fd_step = fd_step;
  g.max_steps = n_refine;
  return g;
}

SupervisedOptions RunConfig::proposal() const {
  SupervisedOptions o = default_proposal_options();
  o.lr = lr;
  o.max_epochs = max_epochs;
  o.patience = patience;
  o.val_fraction = val_fraction;
  o.batch_size = batch_size;
  return o;
}

TrialOptions RunConfig::trial_options() const {
  TrialOptions o;
  o.shape = shape();
  o.w_amp = w_amp;
  o.n_test = n_test;
  o.n_refine = n_refine;
  o.success_tol = success_tol;
  o.complexity = {complexity_trials, complexity_steps, complexity_tol};
  o.gn = gn();
  o.twincher = twincher;
  o.proposal = proposal();
  return o;
}

SweepGrid RunConfig::sweep_grid() const {
  SweepGrid g;
  g.w_amps = w_amps;
  g.n_calls = n_calls_grid;
  g.seeds_per_cell = seeds_per_cell;
  g.learners.clear();
  for (const auto& name : learners) g.learners.push_back(parse_learner_kind(name));
  return g;
}

json RunConfig::to_json() const {
  json doc = {{"command", command},
              {"seed", seed},
              {"out_dir", out_dir},
              {"jobs", jobs},
              {"n_p", n_p},
              {"n_s", n_s},
              {"e_n", e_n},
              {"w_amp", w_amp},
              {"entangler_seed", entangler_seed ? json(*entangler_seed) : json(nullptr)},
              {"learner", learner},
              {"n_calls", n_calls},
              {"train_seed", train_seed ? json(*train_seed) : json(nullptr)},
              {"n_test", n_test},
              {"n_refine", n_refine},
              {"success_tol", success_tol},
              {"complexity_trials", complexity_trials},
              {"complexity_steps", complexity_steps},
              {"complexity_tol", complexity_tol},
              {"lambda", lambda},
              {"delta_max", delta_max},
              {"fd_step", fd_step},
              {"lr", lr},
              {"max_epochs", max_epochs},
              {"patience", patience},
              {"val_fraction", val_fraction},
              {"batch_size", batch_size},
              {"w_amps", w_amps},
              {"n_calls_grid", n_calls_grid},
              {"seeds_per_cell", seeds_per_cell},
              {"learners", learners},
              {"curve_c_max", curve_c_max},
              {"curve_n_min", curve_n_min},
              {"amplitudes", amplitudes},
              {"eta_samples", eta_samples},
              {"swap_prob", swap_prob},
              {"spiral_budget", spiral_budget},
              {"grid_resolution", grid_resolution},
              {"path_points", path_points},
              {"gradient_configs", gradient_configs}};
  put_train(doc, twincher, kTwincherPrefix);
  put_train(doc, spiral, kSpiralPrefix);
  return doc;
}

json config_defaults() {
  RunConfig cfg;
  const SweepGrid grid;
  cfg.w_amps = grid.w_amps;
  cfg.n_calls_grid = grid.n_calls;
  cfg.seeds_per_cell = grid.seeds_per_cell;
  cfg.learners = {"baseline", "twincher"};
  cfg.amplitudes = {0.001, 0.002, 0.005, 0.01};
  cfg.spiral = SpiralDemoOptions::spiral_train_config();
  return cfg.to_json();
}

RunConfig RunConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  const json defaults = config_defaults();
  for (const auto& [key, value] : doc.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  for (const auto& [key, value] : defaults.items()) {
    if (!doc.contains(key)) throw ConfigError("missing config key '" + key + "'");
  }

  RunConfig c;
  c.command = get_key<std::string>(doc, "command");
  c.seed = get_key<std::uint64_t>(doc, "seed");
  c.out_dir = get_key<std::string>(doc, "out_dir");
  c.jobs = get_key<int>(doc, "jobs");
  c.n_p = get_key<int>(doc, "n_p");
  c.n_s = get_key<int>(doc, "n_s");
  c.e_n = get_key<int>(doc, "e_n");
  c.w_amp = get_key<double>(doc, "w_amp");
  if (!doc.at("entangler_seed").is_null()) c.entangler_seed = get_key<std::uint64_t>(doc, "entangler_seed");
  c.learner = get_key<std::string>(doc, "learner");
  c.n_calls = get_key<std::uint64_t>(doc, "n_calls");
  if (!doc.at("train_seed").is_null()) c.train_seed = get_key<std::uint64_t>(doc, "train_seed");
  c.n_test = get_key<int>(doc, "n_test");
  c.n_refine = get_key<int>(doc, "n_refine");
  c.success_tol = get_key<double>(doc, "success_tol");
  c.complexity_trials = get_key<int>(doc, "complexity_trials");
  c.complexity_steps = get_key<int>(doc, "complexity_steps");
  c.complexity_tol = get_key<double>(doc, "complexity_tol");
  c.lambda = get_key<double>(doc, "lambda");
  c.delta_max = get_key<double>(doc, "delta_max");
  c.fd_step = get_key<double>(doc, "fd_step");
  c.lr = get_key<double>(doc, "lr");
  c.max_epochs = get_key<int>(doc, "max_epochs");
  c.patience = get_key<int>(doc, "patience");
  c.val_fraction = get_key<double>(doc, "val_fraction");
  c.batch_size = get_key<int>(doc, "batch_size");
  c.w_amps = get_key<std::vector<double>>(doc, "w_amps");
  c.n_calls_grid = get_key<std::vector<std::uint64_t>>(doc, "n_calls_grid");
  c.seeds_per_cell = get_key<int>(doc, "seeds_per_cell");
  c.learners = get_key<std::vector<std::string>>(doc, "learners");
  c.curve_c_max = get_key<double>(doc, "curve_c_max");
  c.curve_n_min = get_key<std::uint64_t>(doc, "curve_n_min");
  c.amplitudes = get_key<std::vector<double>>(doc, "amplitudes");
  c.eta_samples = get_key<int>(doc, "eta_samples");
  c.swap_prob = get_key<double>(doc, "swap_prob");
  c.spiral_budget = get_key<std::uint64_t>(doc, "spiral_budget");
  c.grid_resolution = get_key<int>(doc, "grid_resolution");
  c.path_points = get_key<int>(doc, "path_points");
  c.gradient_configs = get_key<int>(doc, "gradient_configs");
  c.twincher = get_train(doc, kTwincherPrefix);
  c.spiral = get_train(doc, kSpiralPrefix);

  if (c.command.empty()) throw ConfigError("config key 'command': missing command");
  const auto& commands = known_commands();
  require(std::find(commands.begin(), commands.end(), c.command) != commands.end(), "command",
          "unknown command '" + c.command + "'");
  require(!c.out_dir.empty(), "out_dir", "must not be empty");
  require(c.jobs >= 1, "jobs", "must be >= 1");
  require(c.n_p >= 1 && c.n_p < c.n_s, "n_p", "need 1 <= n_p < n_s");
  require(c.n_s % 2 == 0, "n_s", "must be even");
  require(c.e_n >= 1, "e_n", "must be >= 1");
  require(c.w_amp > 0.0, "w_amp", "must be > 0");
  require(c.learner == "baseline" || c.learner == "twincher", "learner", "must be baseline or twincher");
  require(c.n_test >= 1, "n_test", "must be >= 1");
  require(c.n_refine >= 0, "n_refine", "must be >= 0");
  require(c.success_tol > 0.0, "success_tol", "must be > 0");
  require(c.complexity_trials >= 1, "complexity_trials", "must be >= 1");
  require(c.complexity_steps >= 0, "complexity_steps", "must be >= 0");
  require(c.complexity_tol > 0.0, "complexity_tol", "must be > 0");
  require(c.lambda >= 0.0, "lambda", "must be >= 0");
  require(c.delta_max > 0.0, "delta_max", "must be > 0");
  require(c.fd_step > 0.0, "fd_step", "must be > 0");
  require(c.lr > 0.0, "lr", "must be > 0");
  require(c.max_epochs >= 0, "max_epochs", "must be >= 0");
  require(c.patience >= 1, "patience", "must be >= 1");
  require(c.val_fraction > 0.0 && c.val_fraction < 1.0, "val_fraction", "must be in (0, 1)");
  require(c.batch_size >= 0, "batch_size", "must be >= 0 (0 = full batch)");
  require(!c.w_amps.empty(), "w_amps", "must not be empty");
  for (double w : c.w_amps) require(w > 0.0, "w_amps", "entries must be > 0");
  require(!c.n_calls_grid.empty(), "n_calls_grid", "must not be empty");
  require(c.seeds_per_cell >= 1, "seeds_per_cell", "must be >= 1");
  require(!c.learners.empty(), "learners", "must not be empty");
  for (const auto& l : c.learners) {
    require(l == "baseline" || l == "twincher", "learners", "entries must be baseline or twincher");
  }
  for (double a : c.amplitudes) require(a >= 0.0, "amplitudes", "entries must be >= 0");
  require(c.eta_samples >= 1, "eta_samples", "must be >= 1");
  require(c.swap_prob >= 0.0 && c.swap_prob <= 1.0, "swap_prob", "must be in [0, 1]");
  require(c.grid_resolution >= 16, "grid_resolution", "must be >= 16");
  require(c.path_points >= 2, "path_points", "must be >= 2");
  require(c.gradient_configs >= 1, "gradient_configs", "must be >= 1");
  return c;
}

void merge_config(json& resolved, const json& overrides, const std::string& source) {
  if (!overrides.is_object()) throw ConfigError(source + ": config must be a JSON object");
  const json defaults = config_defaults();
  for (const auto& [key, value] : overrides.items()) {
    if (!resolved.contains(key)) throw ConfigError(source + ": unknown config key '" + key + "'");
    const json& current = defaults.at(key);
    if (!same_kind(current, value)) {
      throw ConfigError(source + ": config key '" + key + "' must be " + kind_name(current));
    }
    resolved[key] = value;
  }
}

std::pair<std::string, json> parse_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + text + "'");
  const std::string key = text.substr(0, eq);
  const std::string raw = text.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  return {key, value};
}

RunConfig parse_config(const std::optional<std::filesystem::path>& path, const json& inline_overrides,
                       const std::string& command) {
  json resolved = config_defaults();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file " + path->string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config file " + path->string() + " is not valid JSON");
    merge_config(resolved, doc, path->string());
  }
  merge_config(resolved, inline_overrides, "overrides");
  if (!command.empty()) resolved["command"] = command;
  return RunConfig::from_json(resolved);
}

}  // namespace twincher
