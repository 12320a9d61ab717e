#pragma once

#include "ictd/kernels.hpp"
#include "ictd/mrp.hpp"
#include "ictd/rng.hpp"
#include "ictd/transformer.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ictd::train {

enum class Optimizer { GradientDescent, Adam, GridSearch };

std::string_view to_string(Optimizer optimizer);
Optimizer optimizer_from_string(std::string_view name);

/// Log-spaced candidate step sizes.
struct AlphaGrid {
  double lo = 1e-2;
  double hi = 10.0;
  int points = 25;

  std::vector<double> values() const;
  bool operator==(const AlphaGrid&) const = default;
};

struct TrainSpec {
  double alpha_init = 0.1;
  Optimizer optimizer = Optimizer::GradientDescent;
  double learning_rate = 0.01;
  int steps = 200;
  int batch_size = 32;        // prompts per optimizer step
  int eval_transitions = 32;  // held-out transitions scored per prompt
  int eval_prompts = 32;      // prompts behind every curve checkpoint
  int checkpoint_every = 0;   // 0: max(1, steps / 20)
  std::vector<SyntheticDomain> train_domains{SyntheticDomain::appendix_f()};
  std::vector<SyntheticDomain> eval_domains;  // empty: same as train_domains
  int n_context = 32;
  int layers = 30;
  KernelSpec kernel = KernelSpec{KernelFamily::Exponential, 1.0};
  AlphaGrid grid;
  double fd_relative_step = 1e-4;
  double fd_absolute_floor = 1e-8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  /// Seed of the fixed evaluation prompts behind curve checkpoints; unset
  /// means `seed`.
  std::optional<std::uint64_t> eval_seed;

  void validate() const;
  const std::vector<SyntheticDomain>& evaluation_domains() const;
  int checkpoint_interval() const;
};

inline constexpr double kDiverged = std::numeric_limits<double>::infinity();

struct TdLossReport {
  double mean_sq_td_error = 0.0;  // kDiverged when any domain diverged
  std::map<std::string, double> per_domain;
  double alpha = 0.0;
  int step = 0;
};

/// The transformer used for a domain: constructed weights, residual scale
/// alpha / n_context, the spec's kernel and the domain's discount.
tf::Transformer model_for(const SyntheticDomain& domain, const TrainSpec& spec, double alpha);

/// Mean squared TD error of one prompt: a fresh context of n_context
/// transitions plus eval_transitions held-out transitions (s, r, s'), scored
/// with raw readouts V(s), V(s') against the shared context. Returns
/// kDiverged on kernel overflow or a non-finite result.
double td_loss(double alpha, const SyntheticDomain& domain, const TrainSpec& spec,
               CounterRng& rng);

/// Mean of td_loss over `prompts` prompts; prompt p draws from
/// hash64(seed, "prompt", p), so equal seeds give common random numbers
/// across different alphas.
double batch_td_loss(double alpha, const SyntheticDomain& domain, const TrainSpec& spec,
                     std::uint64_t seed, int prompts);

/// Loss on each of `domains` over eval_prompts prompts drawn from a seed
/// fixed by (evaluation seed, tag, domain index).
TdLossReport loss_report(double alpha, const std::vector<SyntheticDomain>& domains,
                         const TrainSpec& spec, std::string_view tag, int step);

/// Stochastic objective used by the optimizers: f(alpha, batch_seed).
using Objective = std::function<double(double alpha, std::uint64_t batch_seed)>;

/// Mean batch_td_loss over the train domains.
Objective default_objective(const TrainSpec& spec);

struct FitResult {
  double alpha_star = 0.0;
  std::vector<TdLossReport> curve;
  bool diverged = false;  // aborted after consecutive non-finite losses
  int steps_run = 0;
};

/// Tunes alpha.
///
/// GradientDescent: alpha <- alpha - lr * g, g a central difference with
///   step max(fd_relative_step * |alpha|, fd_absolute_floor), both sides on the
///   same batch seed; the batch is resampled every step.
/// Adam: the same gradient fed through Adam moments.
/// GridSearch: argmin of the objective over spec.grid.
///
/// Curve entries are loss_report checkpoints on the evaluation domains, or one
/// report per grid point on the train domains.
/// An injected objective replaces the TD loss for the optimizer; curve
/// reports then hold that objective at a fixed seed.
FitResult fit_alpha(const TrainSpec& spec, const Objective& objective = {});

struct SurfaceResult {
  int grid_size = 0;
  std::vector<double> xs;          // grid coordinates, shared by both axes
  std::vector<double> predicted;   // raw readouts, index iy * G + ix
  std::vector<double> truth;
  double pearson = 0.0;            // NaN when undefined
  bool pearson_defined = false;
  double centered_rmse = 0.0;
  double truth_range = 0.0;
  bool diverged = false;
  double alpha = 0.0;
};

/// One shared prompt, raw readout at every point of a G x G grid on
/// [-1, 1]^2 compared against the true value field.
SurfaceResult surface_eval(const SyntheticDomain& domain, double alpha, int n_context, int layers,
                           int grid_size, std::uint64_t seed, const KernelSpec& kernel);

double pearson(const std::vector<double>& a, const std::vector<double>& b);
double centered_rmse(const std::vector<double>& a, const std::vector<double>& b);

enum class AblationAxis { ContextLength, Layers };

std::string_view to_string(AblationAxis axis);
AblationAxis ablation_axis_from_string(std::string_view name);

struct AblationRow {
  int axis_value = 0;
  double pearson = 0.0;
  double centered_rmse = 0.0;
};

struct AblationConfig {
  AblationAxis axis = AblationAxis::ContextLength;
  std::vector<int> values{2, 4, 8, 16, 32};
  int fixed_other = 32;
  double alpha = 1.0;
  int grid_size = 21;
  KernelSpec kernel = KernelSpec{KernelFamily::Exponential, 1.0};
};

std::vector<AblationRow> ablation_sweep(const SyntheticDomain& domain, const AblationConfig& cfg,
                                        std::uint64_t seed);

/// Per-value median of pearson and centered RMSE over several seeds.
std::vector<AblationRow> ablation_median(const SyntheticDomain& domain, const AblationConfig& cfg,
                                         const std::vector<std::uint64_t>& seeds);

/// Number of adjacent pairs where the sequence goes up.
int count_increases(const std::vector<double>& values);

struct TransferResult {
  std::vector<SyntheticDomain> train_family;
  std::vector<SyntheticDomain> eval_family;
  std::vector<double> alpha_star;  // per train domain
  /// cells[r][c][k]: loss on eval domain c at checkpoint k of training on r.
  std::vector<std::vector<std::vector<TdLossReport>>> cells;
};

/// For each train domain: fit alpha on it alone, evaluating every eval
/// domain at each checkpoint.
TransferResult transfer_matrix(const std::vector<SyntheticDomain>& train_family,
                               const std::vector<SyntheticDomain>& eval_family,
                               const TrainSpec& spec);

struct BaselineArm {
  KernelSpec kernel;
  double alpha = 0.0;
  std::vector<TdLossReport> curve;
  SurfaceResult surface;
};

struct BaselineComparison {
  BaselineArm exponential;
  BaselineArm linear;
};

/// Tunes alpha and evaluates the surface for the spec's exponential kernel
/// and for the linear kernel, with otherwise identical settings.
BaselineComparison linear_baseline(const SyntheticDomain& domain, const TrainSpec& spec,
                                   int grid_size, std::uint64_t surface_seed);

}  // namespace ictd::train
