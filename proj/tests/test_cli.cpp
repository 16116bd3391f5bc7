#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "twincher/cli.hpp"
#include "twincher/config.hpp"
#include "twincher/csv.hpp"

namespace twincher {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("twincher_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST(Config, DefaultsMatchDocumentedConstants) {
  const RunConfig cfg = parse_config(std::nullopt, json::object(), "sweep");
  EXPECT_EQ(cfg.command, "sweep");
  EXPECT_EQ(cfg.lambda, 1e-3);
  EXPECT_EQ(cfg.delta_max, 0.1);
  EXPECT_EQ(cfg.fd_step, 1e-7);
  EXPECT_EQ(cfg.lr, 1e-3);
  EXPECT_EQ(cfg.patience, 10);
  EXPECT_EQ(cfg.batch_size, 32);
  EXPECT_EQ(cfg.n_p, 2);
  EXPECT_EQ(cfg.n_s, 4);
  EXPECT_EQ(cfg.e_n, 3);
  EXPECT_EQ(cfg.success_tol, 1e-2);
  EXPECT_EQ(cfg.n_test, 1000);
  EXPECT_EQ(cfg.jobs, 1);
  EXPECT_EQ(cfg.seeds_per_cell, 3);
  EXPECT_EQ(cfg.n_calls_grid, (std::vector<std::uint64_t>{512, 1024, 2048, 4096, 8192}));
  EXPECT_EQ(cfg.w_amps, (std::vector<double>{0.5, 0.75, 1.0, 1.25, 1.5}));
  EXPECT_EQ(cfg.to_json(), RunConfig::from_json(cfg.to_json()).to_json());
}

TEST(Config, OverrideLambda) {
  const RunConfig cfg = parse_config(std::nullopt, {{"lambda", 0.01}}, "trial");
  EXPECT_EQ(cfg.lambda, 0.01);
  EXPECT_EQ(cfg.gn().lambda, 0.01);
}

TEST(Config, UnknownKeyNamed) {
  try {
    parse_config(std::nullopt, {{"lamda", 0.01}}, "trial");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lamda"), std::string::npos);
  }
}

TEST(Config, TypeMismatchNamed) {
  try {
    parse_config(std::nullopt, {{"n_test", "many"}}, "trial");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("n_test"), std::string::npos);
  }
  EXPECT_THROW(parse_config(std::nullopt, {{"seed", -3}}, "trial"), ConfigError);
}

TEST(Config, MissingCommand) {
  try {
    parse_config(std::nullopt, json::object(), "");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("command"), std::string::npos);
  }
}

TEST(Config, Assignments) {
  EXPECT_EQ(parse_assignment("lambda=0.5").second, json(0.5));
  EXPECT_EQ(parse_assignment("learner=twincher").second, json("twincher"));
  EXPECT_EQ(parse_assignment("w_amps=[0.5,1]").second, json::parse("[0.5,1]"));
  EXPECT_THROW(parse_assignment("novalue"), ConfigError);
}

TEST(Config, TrainConfigKeysArePrefixed) {
  const RunConfig cfg = parse_config(std::nullopt, {{"twincher_epochs", 7}, {"spiral_margin", 0.5}}, "trial");
  EXPECT_EQ(cfg.twincher.epochs, 7);
  EXPECT_EQ(cfg.spiral.margin, 0.5);
  EXPECT_THROW(parse_config(std::nullopt, {{"twincher_margin", -1.0}}, "trial"), ConfigError);
}

TEST_F(TempDir, ConfigFileThenOverrides) {
  std::ofstream(dir_ / "cfg.json") << R"({"command": "complexity", "w_amp": 0.75, "seed": 4})";
  const RunConfig cfg = parse_config(dir_ / "cfg.json", {{"seed", 9}}, "");
  EXPECT_EQ(cfg.command, "complexity");
  EXPECT_EQ(cfg.w_amp, 0.75);
  EXPECT_EQ(cfg.seed, 9u);
  std::ofstream(dir_ / "broken.json") << "{";
  EXPECT_THROW(parse_config(dir_ / "broken.json", json::object(), "trial"), ConfigError);
}

TEST(Csv, FormatDouble) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Csv, TrialsRoundTripAndBandsRecompute) {
  std::vector<TrialRecord> records;
  CounterRng rng(3);
  for (int i = 0; i < 12; ++i) {
    TrialRecord r;
    r.entangler_seed = rng.next_u64();
    r.learner = i % 2 ? LearnerKind::kTwincher : LearnerKind::kBaseline;
    r.n_calls = 512u << (i % 3);
    r.train_seed = static_cast<std::uint64_t>(i);
    r.C = rng.uniform(0.0, 2.0);
    for (int s = 0; s < 6; ++s) r.worst_residuals.push_back(rng.uniform(0.0, 0.1) / (s + 1));
    r.success = r.worst_residuals.back() < 1e-2;
    records.push_back(r);
  }
  std::stringstream ss;
  write_trials_csv(ss, records);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')),
            "entangler_seed,learner,n_calls,train_seed,C,r0,r1,r2,r3,r4,r5,success");
  EXPECT_EQ(ss.str().find('\r'), std::string::npos);
  const auto back = read_trials_csv(ss);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back[i].entangler_seed, records[i].entangler_seed);
    EXPECT_EQ(back[i].C, records[i].C);
    EXPECT_EQ(back[i].worst_residuals, records[i].worst_residuals);
    EXPECT_EQ(back[i].success, records[i].success);
  }
  const auto a = transition_bands(records);
  const auto b = transition_bands(back);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].left, b[i].left);
    EXPECT_EQ(a[i].right, b[i].right);
  }
}

TEST(Csv, BandsWithEmptyEdges) {
  std::stringstream ss;
  write_bands_csv(ss, {{LearnerKind::kBaseline, 512, std::nullopt, 0.5}});
  EXPECT_EQ(ss.str(), "learner,n_calls,C_left,C_right\nbaseline,512,,0.5\n");
}

TEST(Csv, RejectsBadHeader) {
  std::stringstream ss("a,b\n1,2\n");
  EXPECT_THROW(read_trials_csv(ss), CsvError);
}

TEST_F(TempDir, TrialSmokeWritesOneRow) {
  const auto out = (dir_ / "trial").string();
  ASSERT_EQ(run({"trial", "--learner", "baseline", "--w-amp", "0.5", "--n-calls", "1024", "--seed", "1", "--set",
                 "n_test=50", "--set", "complexity_trials=100", "--out", out}),
            cli::kExitOk)
      << err_.str();
  const std::string csv = slurp(fs::path(out) / "trials.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  const json manifest = json::parse(slurp(fs::path(out) / "run_manifest.json"));
  EXPECT_EQ(manifest["command"], "trial");
  EXPECT_EQ(manifest["exit_code"], 0);
  EXPECT_TRUE(manifest.contains("wall_time_seconds"));
  EXPECT_TRUE(manifest["versions"].contains("eigen"));
  EXPECT_EQ(manifest["resolved_config"]["n_test"], 50);
  EXPECT_EQ(json::parse(slurp(fs::path(out) / "resolved_config.json"))["w_amp"], 0.5);
}

TEST_F(TempDir, SameArgvByteIdenticalOutputs) {
  auto once = [&](const std::string& name) {
    const auto out = (dir_ / name).string();
    EXPECT_EQ(run({"trial", "--learner", "baseline", "--w-amp", "1.0", "--n-calls", "256", "--seed", "3", "--set",
                   "n_test=30", "--set", "complexity_trials=50", "--out", out}),
              cli::kExitOk);
    return slurp(fs::path(out) / "trials.csv");
  };
  EXPECT_EQ(once("a"), once("b"));
}

TEST_F(TempDir, CheckGradientsExitsZero) {
  EXPECT_EQ(run({"check-gradients", "--seed", "3", "--out", dir_.string()}), cli::kExitOk) << err_.str();
  const std::string csv = slurp(dir_ / "gradients.csv");
  EXPECT_EQ(csv.find(",0\n"), std::string::npos);
}

TEST_F(TempDir, ConfigErrorsExitTwo) {
  EXPECT_EQ(run({"trial", "--set", "lamda=1", "--out", dir_.string()}), cli::kExitConfigError);
  EXPECT_NE(err_.str().find("lamda"), std::string::npos);
  EXPECT_EQ(run({"no-such-command"}), cli::kExitConfigError);
  EXPECT_EQ(run({}), cli::kExitConfigError);
  EXPECT_EQ(run({"trial", "--seed", "abc"}), cli::kExitConfigError);
}

TEST_F(TempDir, ProtocolFailureExitsOne) {
  EXPECT_EQ(run({"trial", "--set", "twincher_adversarial_refine_steps=1", "--learner", "twincher", "--n-calls", "30",
                 "--set", "n_test=2", "--set", "complexity_trials=10", "--out", dir_.string()}),
            cli::kExitProtocolFailure);
}

TEST_F(TempDir, EnvironmentOutputDirectory) {
  const auto env_dir = dir_ / "from_env";
  ::setenv("TWINCHER_OUT", env_dir.c_str(), 1);
  const int code = run({"gen-entangler", "--seed", "2"});
  const auto flag_dir = dir_ / "from_flag";
  const int code_flag = run({"gen-entangler", "--seed", "2", "--out", flag_dir.string()});
  ::unsetenv("TWINCHER_OUT");
  EXPECT_EQ(code, cli::kExitOk);
  EXPECT_TRUE(fs::exists(env_dir / "entangler.json"));
  EXPECT_EQ(code_flag, cli::kExitOk);
  EXPECT_TRUE(fs::exists(flag_dir / "entangler.json"));
}

}  // namespace
}  // namespace twincher
