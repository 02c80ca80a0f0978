#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cttx/cli.hpp"
#include "cttx/error.hpp"

using namespace cttx;
using nlohmann::json;

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string run_text(const std::string& cmd, const json& cfg, std::optional<std::string> fmt = std::nullopt) {
  return cli::run(cli::load_config(cmd, cfg.dump(), std::nullopt, std::nullopt, fmt)).artifact;
}

json lagged_model() { return {{"name", "lagged-poisson"}, {"params", {{"lambda", 1.0}, {"epsilon", 1.0}}}}; }
json lagged_window() { return {{"t0", 2.0}, {"T", 3.0}, {"s", 0.25}, {"r", 0.5}}; }

// One small config per command.
std::map<std::string, json> small_configs() {
  return {
      {"simulate", {{"seed", 1}, {"n_paths", 2}, {"model", {{"name", "modulated-poisson"}}},
                    {"window", {{"t0", 0.0}, {"T", 1.0}}}}},
      {"dte", {{"seed", 2}, {"n_paths", 500}, {"model", lagged_model()}, {"window", lagged_window()}, {"dt", 0.1}}},
      {"ppp", {{"seed", 3}, {"n_paths", 50}, {"lambda", 1.0}, {"epsilon", 1.0}, {"window", lagged_window()},
               {"schedule", {0.1, 0.01}}}},
      {"girsanov", {{"seed", 4}, {"n_paths", 200}, {"model", {{"name", "modulated-poisson"}}},
                    {"window", {{"t0", 0.0}, {"T", 1.0}}}}},
      {"rate", {{"seed", 5}, {"n_paths", 200}, {"model", {{"name", "modulated-poisson"}}}, {"t", 0.5},
                {"h_schedule", {0.2, 0.1}}}},
      {"converge", {{"seed", 6}, {"n_paths", 50}, {"model", lagged_model()}, {"window", lagged_window()},
                    {"schedule", {0.1, 0.05}}}},
  };
}

int exit_of(const std::string& cmd, const json& cfg) {
  try {
    cli::run(cli::load_config(cmd, cfg.dump(), std::nullopt, std::nullopt, std::nullopt));
  } catch (const std::exception& e) {
    return cli::exit_code_for(e);
  }
  return 0;
}

}  // namespace

TEST(Cli, EveryCommandIsDeterministicInBothFormats) {
  for (const auto& [cmd, cfg] : small_configs()) {
    for (const char* fmt : {"csv", "json"}) {
      const std::string a = run_text(cmd, cfg, fmt);
      const std::string b = run_text(cmd, cfg, fmt);
      EXPECT_EQ(a, b) << cmd << " " << fmt;
      EXPECT_FALSE(a.empty());
    }
  }
}

TEST(Cli, CsvHeaderAndJsonMeta) {
  const auto cfgs = small_configs();
  const std::string csv = run_text("ppp", cfgs.at("ppp"));
  EXPECT_EQ(csv.rfind("# cttx ", 0), 0u);
  EXPECT_NE(csv.find("seed=3"), std::string::npos);
  EXPECT_NE(csv.find("\ndt,tau,S,tauS,analytic_limit,mc_te,mc_stderr\n"), std::string::npos);
  const json j = json::parse(run_text("ppp", cfgs.at("ppp"), "json"));
  EXPECT_EQ(j["meta"]["command"], "ppp");
  EXPECT_EQ(j["rows"].size(), 2u);
  EXPECT_NEAR(j["rows"][0]["S"].get<double>(), 0.0332029733, 1e-10);
}

TEST(Cli, SeedChangesOutputAndOverrides) {
  const json cfg = small_configs().at("girsanov");
  const auto c1 = cli::load_config("girsanov", cfg.dump(), std::nullopt, std::nullopt, std::nullopt);
  const auto c2 = cli::load_config("girsanov", cfg.dump(), 99u, std::nullopt, std::nullopt);
  EXPECT_EQ(c1.seed, 4u);
  EXPECT_EQ(c2.seed, 99u);
  EXPECT_NE(cli::run(c1).artifact, cli::run(c2).artifact);
}

TEST(Cli, OutputResolution) {
  json cfg = small_configs().at("simulate");
  auto c = cli::load_config("simulate", cfg.dump(), std::nullopt, std::nullopt, std::nullopt);
  EXPECT_EQ(c.out_path, "simulate.csv");
  cfg["output"] = {{"path", "x/y.json"}, {"format", "json"}};
  c = cli::load_config("simulate", cfg.dump(), std::nullopt, std::nullopt, std::nullopt);
  EXPECT_EQ(c.out_path, "x/y.json");
  EXPECT_EQ(c.format, "json");
  c = cli::load_config("simulate", cfg.dump(), std::nullopt, std::string("z.csv"), std::string("csv"));
  EXPECT_EQ(c.out_path, "z.csv");
  EXPECT_EQ(c.format, "csv");
}

TEST(Cli, ConfigHashIgnoresFormatting) {
  EXPECT_EQ(cli::load_config("ppp", "{\"a\":1,\"b\":2}", {}, {}, {}).config_hash,
            cli::load_config("ppp", "{ \"b\": 2,\n \"a\": 1 }", {}, {}, {}).config_hash);
  EXPECT_EQ(cli::fnv1a_hex(""), "cbf29ce484222325");
}

TEST(Cli, ExitCodes) {
  auto cfgs = small_configs();
  json bad = cfgs.at("ppp");
  bad["window"]["r"] = 1.5;  // r >= epsilon
  EXPECT_EQ(exit_of("ppp", bad), 2);
  bad = cfgs.at("ppp");
  bad["unknown"] = 1;
  EXPECT_EQ(exit_of("ppp", bad), 2);
  bad = cfgs.at("dte");
  bad["dt"] = 1.5;  // coarser than the window
  EXPECT_EQ(exit_of("dte", bad), 2);
  bad = cfgs.at("dte");
  bad["n_paths"] = 1;
  EXPECT_EQ(exit_of("dte", bad), 5);
  bad = cfgs.at("girsanov");
  bad["model"] = lagged_model();
  EXPECT_EQ(exit_of("girsanov", bad), 2);
  EXPECT_THROW(cli::load_config("ppp", "not json", {}, {}, {}), ConfigError);
  EXPECT_THROW(cli::load_config("frobnicate", "{}", {}, {}, {}), ConfigError);
  EXPECT_EQ(cli::exit_code_for(AbsoluteContinuityError("x")), 3);
  EXPECT_EQ(cli::exit_code_for(NumericalError("x")), 4);
  EXPECT_EQ(cli::exit_code_for(std::runtime_error("x")), 1);
}

#ifdef CTTX_BIN
TEST(CliBinary, RepeatedRunsAreByteIdentical) {
  const fs::path dir = fs::temp_directory_path() / "cttx_cli_test";
  fs::create_directories(dir);
  const fs::path cfg = dir / "ppp.json";
  std::ofstream(cfg) << small_configs().at("ppp").dump();
  std::string outs[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path out = dir / ("run" + std::to_string(k) + ".csv");
    const std::string cmd = std::string(CTTX_BIN) + " ppp --config " + cfg.string() + " --seed 42 --out " +
                            out.string() + " > /dev/null";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    outs[k] = read_file(out);
  }
  EXPECT_EQ(outs[0], outs[1]);
  EXPECT_NE(outs[0].find("seed=42"), std::string::npos);
}

TEST(CliBinary, ExitCodeForBadConfig) {
  const fs::path dir = fs::temp_directory_path() / "cttx_cli_test";
  fs::create_directories(dir);
  const fs::path cfg = dir / "bad.json";
  std::ofstream(cfg) << "{\"lambda\": 1}";
  const std::string cmd = std::string(CTTX_BIN) + " ppp --config " + cfg.string() + " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 2);
  const std::string usage = std::string(CTTX_BIN) + " nonsense --config x 2> /dev/null > /dev/null";
  EXPECT_EQ(WEXITSTATUS(std::system(usage.c_str())), 2);
}
#endif
