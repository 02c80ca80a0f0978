#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

namespace cttx::cli {

/// A validated run: command, its JSON document and the resolved seed/output.
struct RunConfig {
  std::string command;
  nlohmann::json doc;
  std::uint64_t seed = 1;
  std::string out_path;
  std::string format = "csv";
  /// FNV-1a of the canonical config dump, hex.
  std::string config_hash;
};

struct RunOutcome {
  std::string artifact;
  std::string summary;
};

/// Parses and validates a config for `command`. Overrides come from the
/// command line; the output directory may be redirected by CTTX_OUT_DIR.
RunConfig load_config(const std::string& command, const std::string& config_text,
                      std::optional<std::uint64_t> seed, std::optional<std::string> out,
                      std::optional<std::string> format);

/// Runs the command and returns the artifact text; writes nothing.
RunOutcome run(const RunConfig& config);

/// Exit code for an exception escaping run(): 2 config/parameter, 3 absolute
/// continuity, 4 numerical/model, 5 estimation, 1 otherwise.
int exit_code_for(const std::exception& e);

/// Full entry point: argument parsing, run, single write, summary line.
int main_entry(int argc, char** argv);

std::string fnv1a_hex(const std::string& text);

}  // namespace cttx::cli
