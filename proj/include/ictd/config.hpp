#pragma once

#include "ictd/kernels.hpp"
#include "ictd/mrp.hpp"
#include "ictd/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ictd::cli {

enum class Command { Verify, Surface, Train, Ablate, Transfer, Baseline };

std::string_view to_string(Command command);
Command command_from_string(std::string_view name);

/// Raised for malformed or invalid configuration; the message names the
/// offending key (and line, for JSON syntax errors).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VerifyConfig {
  int instances = 200;
  int state_dim = 2;
  std::vector<int> context_lengths{1, 2, 8, 16};
  std::vector<int> layer_counts{1, 3, 10};
  std::vector<double> gammas{0.0, 0.5, 0.9};
  std::vector<double> temperatures{1.0, 10.0};
  bool include_linear = true;
  double tolerance = 1e-9;
  // dual-form oracle suite
  std::vector<int> oracle_state_dims{2, 4};
  std::vector<int> oracle_context_lengths{1, 4, 16};
  std::vector<int> oracle_layer_counts{1, 5, 10};
  int oracle_repeats = 3;
  double oracle_tolerance = 1e-10;

  bool operator==(const VerifyConfig&) const = default;
};

/// Alpha is either given or tuned by grid search on the TD loss.
struct AlphaChoice {
  std::optional<double> alpha;
  train::AlphaGrid grid;
  int tune_prompts = 32;
  int eval_transitions = 32;

  bool operator==(const AlphaChoice&) const = default;
};

struct SurfaceConfig {
  std::string domain = "appendixF";
  int n_context = 32;
  int layers = 30;
  int grid_size = 21;
  KernelSpec kernel{KernelFamily::Exponential, 1.0};
  AlphaChoice alpha;

  bool operator==(const SurfaceConfig&) const = default;
};

struct TrainConfig {
  std::vector<std::string> train_domains{"appendixF"};
  std::vector<std::string> eval_domains;
  double alpha_init = 0.1;
  train::Optimizer optimizer = train::Optimizer::Adam;
  double learning_rate = 0.01;
  int steps = 200;
  int batch_size = 32;
  int eval_transitions = 32;
  int eval_prompts = 32;
  int checkpoint_every = 0;
  int n_context = 32;
  int layers = 30;
  KernelSpec kernel{KernelFamily::Exponential, 1.0};
  train::AlphaGrid grid;
  double weight_decay = 1e-6;

  bool operator==(const TrainConfig&) const = default;
};

struct AblateConfig {
  std::string domain = "appendixF";
  std::vector<std::string> axes{"context", "layers"};
  std::vector<int> values{2, 4, 8, 16, 32};
  int fixed_other = 32;
  int grid_size = 21;
  int seeds = 5;
  KernelSpec kernel{KernelFamily::Exponential, 1.0};
  AlphaChoice alpha;
  int tune_layers = 30;  // depth used when tuning alpha

  bool operator==(const AblateConfig&) const = default;
};

struct TransferConfig {
  std::vector<std::string> train_family{"matched_m8", "matched_m4_scale2"};
  std::vector<std::string> eval_family{"matched_m8", "mismatched_delta02"};
  TrainConfig training;

  bool operator==(const TransferConfig&) const = default;
};

struct BaselineConfig {
  std::string domain = "appendixF";
  int grid_size = 21;
  TrainConfig training;

  bool operator==(const BaselineConfig&) const = default;
};

struct RunConfig {
  Command command = Command::Verify;
  std::uint64_t seed = 0;
  std::string output_dir = "results";
  bool precision_report = false;
  std::map<std::string, SyntheticDomain> domains;  // user presets; builtins are implicit

  VerifyConfig verify;
  SurfaceConfig surface;
  TrainConfig train;
  AblateConfig ablate;
  TransferConfig transfer;
  BaselineConfig baseline;

  /// Resolves a preset name against user presets, then builtins.
  SyntheticDomain domain(const std::string& name) const;

  bool operator==(const RunConfig&) const = default;
};

/// Builtin presets: appendixF, matched_m8, matched_m4_scale2,
/// mismatched_delta02, linear_value, zero_reward.
const std::map<std::string, SyntheticDomain>& builtin_domains();

/// Defaults for a command; the transfer and baseline blocks carry their own
/// training defaults.
RunConfig default_config(Command command);

/// Parses a config document for `command`. Top-level keys: seed, output_dir,
/// precision_report, domains, and at most the command blocks (verify,
/// surface, train, ablate, transfer, baseline); only the block of the
/// invoked command is read, the others must still be well-formed objects.
/// Unknown keys anywhere are rejected.
RunConfig parse_config(const nlohmann::json& doc, Command command);
RunConfig parse_config_text(const std::string& text, Command command);
RunConfig load_config(const std::string& path, Command command);

/// Fully resolved config for the active command (all defaults filled in,
/// only that command's block, plus every referenced domain preset).
nlohmann::json to_json(const RunConfig& config);

/// Builds the TrainSpec a TrainConfig describes.
train::TrainSpec to_train_spec(const TrainConfig& cfg, const RunConfig& run, std::uint64_t seed);

}  // namespace ictd::cli
