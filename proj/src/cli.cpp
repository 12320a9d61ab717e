#include "ictd/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace ictd::cli {

namespace {

struct Flags {
  std::string config_path;
  std::string out;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  bool precision_report = false;
};

void apply_preset(RunConfig& cfg, const std::string& preset) {
  (void)cfg.domain(preset);  // must resolve
  switch (cfg.command) {
    case Command::Surface:
      cfg.surface.domain = preset;
      break;
    case Command::Train:
      cfg.train.train_domains = {preset};
      break;
    case Command::Ablate:
      cfg.ablate.domain = preset;
      break;
    case Command::Baseline:
      cfg.baseline.domain = preset;
      break;
    case Command::Verify:
    case Command::Transfer:
      throw ConfigError("--preset does not apply to '" + std::string(to_string(cfg.command)) + "'");
  }
}

int execute(Command command, const Flags& flags) {
  RunConfig cfg = default_config(command);
  bool file_sets_output = false;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + flags.config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    cfg = parse_config_text(text, command);
    file_sets_output = nlohmann::json::parse(text).contains("output_dir");
  }

  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.precision_report) cfg.precision_report = true;
  if (!flags.preset.empty()) apply_preset(cfg, flags.preset);
  if (flags.tolerance) {
    if (command != Command::Verify) throw ConfigError("--tolerance only applies to 'verify'");
    if (*flags.tolerance < 0.0) throw ConfigError("--tolerance must be >= 0");
    cfg.verify.tolerance = *flags.tolerance;
  }
  if (!flags.out.empty()) {
    cfg.output_dir = flags.out;
  } else if (!file_sets_output) {
    if (const char* env = std::getenv("ICTD_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
  }

  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError("output_dir '" + cfg.output_dir + "' is not writable: " + ec.message());

  const CommandResult result = run_command(cfg, cfg.output_dir);
  for (const auto& path : result.artifacts) std::cout << "wrote " << path.string() << '\n';
  if (result.exit_code == kVerificationFailed) {
    std::cerr << "verification failed: deviations exceed tolerance (see verify_report.json)\n";
  }
  return result.exit_code;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"In-context kernel TD: transformer/TD equivalence checks and synthetic experiments"};
  app.require_subcommand(1);
  Flags flags;

  const std::vector<std::pair<Command, std::string>> commands{
      {Command::Verify, "Check the transformer against the TD oracle on random instances"},
      {Command::Surface, "Predicted vs true value on a grid over [-1, 1]^2"},
      {Command::Train, "Tune the step size on the TD loss and record the loss curve"},
      {Command::Ablate, "Sweep context length and depth"},
      {Command::Transfer, "Train on one domain, evaluate on others"},
      {Command::Baseline, "Exponential vs linear kernel at their tuned step sizes"}};
  for (const auto& [command, help] : commands) {
    CLI::App* sub = app.add_subcommand(std::string(to_string(command)), help);
    sub->add_option("--config", flags.config_path, "JSON run config")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed");
    sub->add_option("--out", flags.out, "output directory (default: $ICTD_OUTPUT_DIR, then results)");
    if (command != Command::Verify && command != Command::Transfer) {
      sub->add_option("--preset", flags.preset, "domain preset name, e.g. appendixF");
    }
    if (command == Command::Verify) {
      sub->add_option("--tolerance", flags.tolerance, "max allowed deviation");
      sub->add_flag("--precision-report", flags.precision_report, "include per-layer deviations");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  const Command command = command_from_string(app.get_subcommands().front()->get_name());
  try {
    return execute(command, flags);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace ictd::cli
