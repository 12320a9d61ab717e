#pragma once

#include "ictd/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace ictd::cli {

/// Exit statuses. Experiment divergence is data and still exits with kOk.
inline constexpr int kOk = 0;
inline constexpr int kVerificationFailed = 1;
inline constexpr int kConfigError = 2;

struct CommandResult {
  int exit_code = kOk;
  std::vector<std::filesystem::path> artifacts;  // every file written
  nlohmann::json summary;                        // the metadata document
};

/// Hex digest of the canonical JSON of a resolved config.
std::string config_hash(const RunConfig& config);

/// Runs `config.command`, writing artifacts under `out_dir` (created if
/// missing). Child seeds are hash64(config.seed, tag, index) with the tags
/// listed next to each command in the source.
CommandResult run_command(const RunConfig& config, const std::filesystem::path& out_dir);

/// Whole command-line front end; returns the process exit status.
int run_cli(int argc, char** argv);

}  // namespace ictd::cli
