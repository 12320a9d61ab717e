#include "ictd/commands.hpp"

#include "ictd/csv.hpp"
#include "ictd/rng.hpp"
#include "ictd/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>

#ifndef ICTD_VERSION
#define ICTD_VERSION "unknown"
#endif

namespace ictd::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using io::format_double;

namespace {

// JSON has no inf/nan; keep them as the same literals the CSVs use.
json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json metadata(const RunConfig& cfg, std::string_view kind) {
  return json{{"kind", std::string(kind)},
              {"config", to_json(cfg)},
              {"config_hash", config_hash(cfg)},
              {"seed", cfg.seed},
              {"timestamp", utc_timestamp()},
              {"code_version", ICTD_VERSION}};
}

void write_json(const fs::path& path, const json& doc, CommandResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  result.artifacts.push_back(path);
}

void write_table(const fs::path& path, const io::CsvTable& table, CommandResult& result) {
  io::write_csv(path, table);
  result.artifacts.push_back(path);
}

std::vector<std::string> curve_row(const train::TdLossReport& r) {
  return {std::to_string(r.step), format_double(r.alpha), format_double(r.mean_sq_td_error)};
}

// Grid search of alpha on the TD loss, used when a command asks for "tuned".
double resolve_alpha(const AlphaChoice& choice, const SyntheticDomain& domain, int n, int layers,
                     const KernelSpec& kernel, std::uint64_t seed, json& meta) {
  if (choice.alpha) {
    meta["alpha_source"] = "config";
    return *choice.alpha;
  }
  train::TrainSpec spec;
  spec.optimizer = train::Optimizer::GridSearch;
  spec.train_domains = {domain};
  spec.n_context = n;
  spec.layers = layers;
  spec.kernel = kernel;
  spec.grid = choice.grid;
  spec.eval_prompts = choice.tune_prompts;
  spec.eval_transitions = choice.eval_transitions;
  spec.seed = seed;
  const train::FitResult fit = train::fit_alpha(spec);
  json grid = json::array();
  for (const auto& r : fit.curve) {
    grid.push_back(json{{"alpha", r.alpha}, {"loss", number(r.mean_sq_td_error)}});
  }
  meta["alpha_source"] = "grid_search";
  meta["alpha_grid"] = grid;
  return fit.alpha_star;
}

json surface_summary(const train::SurfaceResult& s) {
  return json{{"alpha", s.alpha},
              {"pearson", s.pearson_defined ? json(s.pearson) : json("nan")},
              {"centered_rmse", number(s.centered_rmse)},
              {"truth_range", s.truth_range},
              {"centered_rmse_fraction", number(s.centered_rmse / s.truth_range)},
              {"diverged", s.diverged}};
}

// tags: "verify", "dual-form", "heads", "offset"
CommandResult cmd_verify(const RunConfig& cfg, const fs::path& out) {
  const VerifyConfig& v = cfg.verify;
  CommandResult result;
  json meta = metadata(cfg, "EquivalenceReport");

  verify::EquivalenceSweep sweep;
  sweep.instances = v.instances;
  sweep.state_dim = v.state_dim;
  sweep.context_lengths = v.context_lengths;
  sweep.layer_counts = v.layer_counts;
  sweep.gammas = v.gammas;
  sweep.kernels.clear();
  for (double t : v.temperatures) sweep.kernels.push_back(KernelSpec::exponential(t));
  if (v.include_linear) sweep.kernels.push_back(KernelSpec::linear());

  double worst_tf = 0.0;
  json cases = json::array();
  for (const auto& c : verify::equivalence_suite(sweep, cfg.seed)) {
    json jc{{"index", c.index},
            {"n", c.context_length},
            {"layers", c.layers},
            {"gamma", c.gamma},
            {"kernel", std::string(to_string(c.kernel.family))},
            {"temperature", c.kernel.temperature},
            {"max_dev_literal", c.max_dev_literal},
            {"max_dev_structured", c.max_dev_structured},
            {"max_dev_unit_scale", c.max_dev_unit}};
    if (cfg.precision_report) jc["per_layer"] = c.per_layer;
    cases.push_back(std::move(jc));
    worst_tf = std::max({worst_tf, c.max_dev_literal, c.max_dev_structured, c.max_dev_unit});
  }

  double worst_dual = 0.0;
  json dual = json::array();
  for (const auto& c : verify::dual_form_suite(v.oracle_state_dims, v.oracle_context_lengths,
                                               v.oracle_layer_counts, v.oracle_repeats, cfg.seed)) {
    dual.push_back(json{{"state_dim", c.state_dim},
                        {"n", c.context_length},
                        {"layers", c.layers},
                        {"max_dev", c.max_dev}});
    worst_dual = std::max(worst_dual, c.max_dev);
  }

  const verify::HeadCheck heads = verify::head_closed_form_check(50, cfg.seed);
  const verify::OffsetCheck offset = verify::offset_check(20, cfg.seed);
  const double worst_heads =
      std::max({heads.max_dev_head1, heads.max_dev_head2, heads.max_abs_off_row});
  const double worst_offset = std::max(offset.variation, offset.max_dev_from_pad);

  const bool pass = worst_tf <= v.tolerance && worst_heads <= v.tolerance &&
                    worst_offset <= v.tolerance && worst_dual <= v.oracle_tolerance;
  meta["tolerance"] = v.tolerance;
  meta["oracle_tolerance"] = v.oracle_tolerance;
  meta["equivalence"] = json{{"max_dev", worst_tf}, {"cases", cases}};
  meta["dual_form"] = json{{"max_dev", worst_dual}, {"cases", dual}};
  meta["heads"] = json{{"prompts", 50},
                       {"max_dev_head1", heads.max_dev_head1},
                       {"max_dev_head2", heads.max_dev_head2},
                       {"max_abs_off_row", heads.max_abs_off_row}};
  meta["offset"] = json{{"queries", 20},
                        {"variation", offset.variation},
                        {"max_dev_from_pad", offset.max_dev_from_pad},
                        {"pad_offset", offset.pad_offset}};
  meta["pass"] = pass;
  write_json(out / "verify_report.json", meta, result);
  result.summary = std::move(meta);
  result.exit_code = pass ? kOk : kVerificationFailed;
  return result;
}

// tags: "surface-tune" (alpha grid), "surface" (context prompt)
CommandResult cmd_surface(const RunConfig& cfg, const fs::path& out) {
  const SurfaceConfig& s = cfg.surface;
  CommandResult result;
  json meta = metadata(cfg, "SurfaceGrid");
  const SyntheticDomain dom = cfg.domain(s.domain);
  const double alpha = resolve_alpha(s.alpha, dom, s.n_context, s.layers, s.kernel,
                                     hash64(cfg.seed, "surface-tune", 0), meta);
  const train::SurfaceResult surf = train::surface_eval(
      dom, alpha, s.n_context, s.layers, s.grid_size, hash64(cfg.seed, "surface", 0), s.kernel);

  io::CsvTable table{{"x", "y", "v_pred_raw", "v_true"}, {}};
  const int g = surf.grid_size;
  for (int iy = 0; iy < g; ++iy) {
    for (int ix = 0; ix < g; ++ix) {
      const std::size_t k = static_cast<std::size_t>(iy * g + ix);
      table.rows.push_back({format_double(surf.xs[ix]), format_double(surf.xs[iy]),
                            format_double(surf.predicted[k]), format_double(surf.truth[k])});
    }
  }
  write_table(out / "surface.csv", table, result);
  meta.update(surface_summary(surf));
  write_json(out / "surface_meta.json", meta, result);
  result.summary = std::move(meta);
  return result;
}

// tags: those of fit_alpha under the master seed
CommandResult cmd_train(const RunConfig& cfg, const fs::path& out) {
  CommandResult result;
  json meta = metadata(cfg, "LossCurve");
  const train::TrainSpec spec = to_train_spec(cfg.train, cfg, cfg.seed);
  const train::FitResult fit = train::fit_alpha(spec);

  // Grid search reports on the train domains, the optimizers on the eval ones.
  const auto& domains = spec.optimizer == train::Optimizer::GridSearch ? spec.train_domains
                                                                       : spec.evaluation_domains();
  io::CsvTable table{{"step", "alpha", "loss"}, {}};
  for (const auto& d : domains) table.header.push_back("loss_" + d.name);
  for (const auto& r : fit.curve) {
    auto row = curve_row(r);
    for (const auto& d : domains) row.push_back(format_double(r.per_domain.at(d.name)));
    table.rows.push_back(std::move(row));
  }
  write_table(out / "loss_curve.csv", table, result);

  meta["alpha_star"] = fit.alpha_star;
  meta["diverged"] = fit.diverged;
  meta["steps_run"] = fit.steps_run;
  meta["initial_loss"] = number(fit.curve.front().mean_sq_td_error);
  meta["final_loss"] = number(fit.curve.back().mean_sq_td_error);
  write_json(out / "train_meta.json", meta, result);
  result.summary = std::move(meta);
  return result;
}

// tags: "ablate-tune" (alpha grid), "ablate" (one per seed)
CommandResult cmd_ablate(const RunConfig& cfg, const fs::path& out) {
  const AblateConfig& a = cfg.ablate;
  CommandResult result;
  json meta = metadata(cfg, "AblationTable");
  const SyntheticDomain dom = cfg.domain(a.domain);
  const double alpha = resolve_alpha(a.alpha, dom, a.fixed_other, a.tune_layers, a.kernel,
                                     hash64(cfg.seed, "ablate-tune", 0), meta);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < a.seeds; ++i) seeds.push_back(hash64(cfg.seed, "ablate", i));

  json axes = json::object();
  for (const auto& axis_name : a.axes) {
    train::AblationConfig ab;
    ab.axis = train::ablation_axis_from_string(axis_name);
    ab.values = a.values;
    ab.fixed_other = a.fixed_other;
    ab.alpha = alpha;
    ab.grid_size = a.grid_size;
    ab.kernel = a.kernel;
    const auto rows = train::ablation_median(dom, ab, seeds);

    io::CsvTable table{{"axis_value", "pearson", "centered_rmse"}, {}};
    std::vector<double> rmse;
    for (const auto& r : rows) {
      table.rows.push_back(
          {std::to_string(r.axis_value), format_double(r.pearson), format_double(r.centered_rmse)});
      rmse.push_back(r.centered_rmse);
    }
    write_table(out / ("ablation_" + axis_name + ".csv"), table, result);
    axes[axis_name] = json{{"rmse_increases", train::count_increases(rmse)}};
  }
  meta["alpha"] = alpha;
  meta["axes"] = axes;
  write_json(out / "ablation_meta.json", meta, result);
  result.summary = std::move(meta);
  return result;
}

// tags: "transfer-row" per train domain, "transfer-eval" for checkpoints
CommandResult cmd_transfer(const RunConfig& cfg, const fs::path& out) {
  const TransferConfig& t = cfg.transfer;
  CommandResult result;
  json meta = metadata(cfg, "TransferMatrix");
  std::vector<SyntheticDomain> rows, cols;
  for (const auto& name : t.train_family) rows.push_back(cfg.domain(name));
  for (const auto& name : t.eval_family) cols.push_back(cfg.domain(name));
  const train::TrainSpec spec = to_train_spec(t.training, cfg, cfg.seed);
  const train::TransferResult tr = train::transfer_matrix(rows, cols, spec);

  const fs::path dir = out / "transfer";
  fs::create_directories(dir);
  json cells = json::array();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto& curve = tr.cells[r][c];
      io::CsvTable table{{"step", "alpha", "loss"}, {}};
      for (const auto& rep : curve) table.rows.push_back(curve_row(rep));
      const std::string file = "cell_" + std::to_string(r) + "_" + std::to_string(c) + ".csv";
      write_table(dir / file, table, result);
      cells.push_back(json{{"row", r},
                           {"col", c},
                           {"train_domain", t.train_family[r]},
                           {"eval_domain", t.eval_family[c]},
                           {"file", file},
                           {"initial_loss", number(curve.front().mean_sq_td_error)},
                           {"final_loss", number(curve.back().mean_sq_td_error)}});
    }
  }
  meta["train_family"] = t.train_family;
  meta["eval_family"] = t.eval_family;
  meta["alpha_star"] = tr.alpha_star;
  meta["cells"] = cells;
  write_json(dir / "index.json", meta, result);
  result.summary = std::move(meta);
  return result;
}

// tags: "surface-tune" and "surface", shared with cmd_surface so that the
// exponential arm is the same surface
CommandResult cmd_baseline(const RunConfig& cfg, const fs::path& out) {
  const BaselineConfig& b = cfg.baseline;
  CommandResult result;
  json meta = metadata(cfg, "BaselineComparison");
  const SyntheticDomain dom = cfg.domain(b.domain);
  train::TrainSpec spec = to_train_spec(b.training, cfg, hash64(cfg.seed, "surface-tune", 0));
  spec.train_domains = {dom};
  const train::BaselineComparison cmp =
      train::linear_baseline(dom, spec, b.grid_size, hash64(cfg.seed, "surface", 0));

  io::CsvTable table{{"kernel", "alpha", "pearson", "centered_rmse", "truth_range"}, {}};
  io::CsvTable curves{{"kernel", "step", "alpha", "loss"}, {}};
  json arms = json::object();
  for (const train::BaselineArm* arm : {&cmp.exponential, &cmp.linear}) {
    const std::string name(to_string(arm->kernel.family));
    table.rows.push_back({name, format_double(arm->alpha), format_double(arm->surface.pearson),
                          format_double(arm->surface.centered_rmse),
                          format_double(arm->surface.truth_range)});
    for (const auto& r : arm->curve) {
      auto row = curve_row(r);
      row.insert(row.begin(), name);
      curves.rows.push_back(std::move(row));
    }
    arms[name] = surface_summary(arm->surface);
  }
  write_table(out / "baseline.csv", table, result);
  write_table(out / "baseline_curves.csv", curves, result);
  meta["arms"] = arms;
  meta["rmse_ratio"] =
      number(cmp.linear.surface.centered_rmse / cmp.exponential.surface.centered_rmse);
  write_json(out / "baseline_meta.json", meta, result);
  result.summary = std::move(meta);
  return result;
}

}  // namespace

std::string config_hash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash64(0, to_json(config).dump(), 0)));
  return buf;
}

CommandResult run_command(const RunConfig& config, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  switch (config.command) {
    case Command::Verify:
      return cmd_verify(config, out_dir);
    case Command::Surface:
      return cmd_surface(config, out_dir);
    case Command::Train:
      return cmd_train(config, out_dir);
    case Command::Ablate:
      return cmd_ablate(config, out_dir);
    case Command::Transfer:
      return cmd_transfer(config, out_dir);
    case Command::Baseline:
      return cmd_baseline(config, out_dir);
  }
  throw std::logic_error("run_command: unknown command");
}

}  // namespace ictd::cli
