#include "ictd/training.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace ictd::train {

using tf::Transformer;
using tf::predict_raw;

namespace {

constexpr int kMaxConsecutiveDivergence = 5;

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  // NaN (undefined correlation) sorts last.
  std::sort(v.begin(), v.end(), [](double a, double b) {
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    return a < b;
  });
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

std::uint64_t evaluation_seed(const TrainSpec& spec) { return spec.eval_seed.value_or(spec.seed); }

TdLossReport objective_report(const Objective& objective, double alpha, std::uint64_t seed,
                              int step) {
  TdLossReport report;
  const double value = objective(alpha, seed);
  report.mean_sq_td_error = std::isfinite(value) ? value : kDiverged;
  report.per_domain["objective"] = report.mean_sq_td_error;
  report.alpha = alpha;
  report.step = step;
  return report;
}

FitResult grid_search(const TrainSpec& spec, const Objective& injected) {
  FitResult result;
  const std::vector<double> alphas = spec.grid.values();
  double best = kDiverged;
  result.alpha_star = alphas.front();
  const std::uint64_t seed = hash64(spec.seed, "grid", 0);
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    TdLossReport report = injected
                              ? objective_report(injected, alphas[i], seed, static_cast<int>(i))
                              : loss_report(alphas[i], spec.train_domains, spec, "grid",
                                            static_cast<int>(i));
    if (report.mean_sq_td_error < best) {
      best = report.mean_sq_td_error;
      result.alpha_star = alphas[i];
    }
    result.curve.push_back(std::move(report));
  }
  result.diverged = !std::isfinite(best);
  result.steps_run = static_cast<int>(alphas.size());
  return result;
}

FitResult gradient_fit(const TrainSpec& spec, const Objective& injected) {
  const Objective objective = injected ? injected : default_objective(spec);
  const int interval = spec.checkpoint_interval();
  auto checkpoint = [&](double alpha, int step) {
    if (injected) return objective_report(injected, alpha, hash64(evaluation_seed(spec), "eval", 0), step);
    return loss_report(alpha, spec.evaluation_domains(), spec, "eval", step);
  };

  FitResult result;
  double alpha = spec.alpha_init;
  double last_finite = alpha;
  double first_moment = 0.0;
  double second_moment = 0.0;
  int consecutive_bad = 0;
  result.curve.push_back(checkpoint(alpha, 0));

  for (int t = 0; t < spec.steps; ++t) {
    const std::uint64_t batch_seed = hash64(spec.seed, "fit-step", static_cast<std::uint64_t>(t));
    const double h = std::max(spec.fd_relative_step * std::abs(alpha), spec.fd_absolute_floor);
    const double upper = objective(alpha + h, batch_seed);
    const double lower = objective(alpha - h, batch_seed);
    double grad = (upper - lower) / (2.0 * h);
    result.steps_run = t + 1;

    if (!std::isfinite(upper) || !std::isfinite(lower) || !std::isfinite(grad)) {
      if (++consecutive_bad >= kMaxConsecutiveDivergence) {
        result.diverged = true;
        alpha = last_finite;
        break;
      }
    } else {
      consecutive_bad = 0;
      last_finite = alpha;
      grad += spec.weight_decay * alpha;
      if (spec.optimizer == Optimizer::Adam) {
        first_moment = spec.adam_beta1 * first_moment + (1.0 - spec.adam_beta1) * grad;
        second_moment = spec.adam_beta2 * second_moment + (1.0 - spec.adam_beta2) * grad * grad;
        const double m_hat = first_moment / (1.0 - std::pow(spec.adam_beta1, t + 1));
        const double v_hat = second_moment / (1.0 - std::pow(spec.adam_beta2, t + 1));
        alpha -= spec.learning_rate * m_hat / (std::sqrt(v_hat) + spec.adam_epsilon);
      } else {
        alpha -= spec.learning_rate * grad;
      }
    }
    if ((t + 1) % interval == 0 || t + 1 == spec.steps) result.curve.push_back(checkpoint(alpha, t + 1));
  }
  if (result.diverged && result.curve.back().step != result.steps_run) {
    result.curve.push_back(checkpoint(alpha, result.steps_run));
  }
  result.alpha_star = alpha;
  return result;
}

std::string domain_key(const SyntheticDomain& domain) { return domain.name; }

}  // namespace

std::string_view to_string(Optimizer optimizer) {
  switch (optimizer) {
    case Optimizer::GradientDescent:
      return "gradient_descent";
    case Optimizer::Adam:
      return "adam";
    case Optimizer::GridSearch:
      return "grid_search";
  }
  return "unknown";
}

Optimizer optimizer_from_string(std::string_view name) {
  if (name == "gradient_descent") return Optimizer::GradientDescent;
  if (name == "adam") return Optimizer::Adam;
  if (name == "grid_search") return Optimizer::GridSearch;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) +
                              "' (expected gradient_descent, adam or grid_search)");
}

std::vector<double> AlphaGrid::values() const {
  if (!(lo > 0.0 && hi >= lo) || points < 1) throw std::invalid_argument("invalid alpha grid");
  std::vector<double> out(static_cast<std::size_t>(points));
  if (points == 1) {
    out[0] = lo;
    return out;
  }
  const double log_lo = std::log10(lo);
  const double log_hi = std::log10(hi);
  for (int i = 0; i < points; ++i) {
    out[static_cast<std::size_t>(i)] = std::pow(10.0, log_lo + (log_hi - log_lo) * i / (points - 1));
  }
  return out;
}

void TrainSpec::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (optimizer != Optimizer::GridSearch && !(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be > 0");
  }
  if (eval_transitions < 1 || eval_prompts < 1) {
    throw std::invalid_argument("eval_transitions and eval_prompts must be >= 1");
  }
  if (n_context < 1 || layers < 1) throw std::invalid_argument("n_context and layers must be >= 1");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
  if (!std::isfinite(alpha_init)) throw std::invalid_argument("alpha_init must be finite");
  if (train_domains.empty()) throw std::invalid_argument("at least one train domain required");
  kernel.validate();
  (void)grid.values();
  for (const auto* list : {&train_domains, &eval_domains}) {
    std::set<std::string> names;
    for (const auto& d : *list) {
      d.validate();
      if (!names.insert(d.name).second) {
        throw std::invalid_argument("duplicate domain name '" + d.name + "'");
      }
    }
  }
}

const std::vector<SyntheticDomain>& TrainSpec::evaluation_domains() const {
  return eval_domains.empty() ? train_domains : eval_domains;
}

int TrainSpec::checkpoint_interval() const {
  return checkpoint_every > 0 ? checkpoint_every : std::max(1, steps / 20);
}

tf::Transformer model_for(const SyntheticDomain& domain, const TrainSpec& spec, double alpha) {
  return Transformer::with_residual_scale(SyntheticDomain::kStateDim, alpha, spec.n_context,
                                          spec.layers, domain.gamma, spec.kernel);
}

double td_loss(double alpha, const SyntheticDomain& domain, const TrainSpec& spec,
               CounterRng& rng) {
  if (!std::isfinite(alpha)) throw std::invalid_argument("td_loss: alpha must be finite");
  const auto context = sample_prompt(domain, spec.n_context, rng);
  const auto held_out = sample_prompt(domain, spec.eval_transitions, rng);

  std::vector<Vector> queries;
  queries.reserve(2 * held_out.size());
  for (const auto& t : held_out) queries.push_back(t.s);
  for (const auto& t : held_out) queries.push_back(t.s_next);

  std::vector<double> raw;
  try {
    raw = predict_raw(context, queries, Vector::Zero(SyntheticDomain::kStateDim),
                      model_for(domain, spec, alpha));
  } catch (const KernelOverflowError&) {
    return kDiverged;
  }

  const std::size_t b = held_out.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double td = held_out[i].r + domain.gamma * raw[b + i] - raw[i];
    acc += td * td;
  }
  const double loss = acc / static_cast<double>(b);
  return std::isfinite(loss) ? loss : kDiverged;
}

double batch_td_loss(double alpha, const SyntheticDomain& domain, const TrainSpec& spec,
                     std::uint64_t seed, int prompts) {
  double acc = 0.0;
  for (int p = 0; p < prompts; ++p) {
    CounterRng rng(hash64(seed, "prompt", static_cast<std::uint64_t>(p)));
    const double loss = td_loss(alpha, domain, spec, rng);
    if (!std::isfinite(loss)) return kDiverged;
    acc += loss;
  }
  return acc / prompts;
}

TdLossReport loss_report(double alpha, const std::vector<SyntheticDomain>& domains,
                         const TrainSpec& spec, std::string_view tag, int step) {
  TdLossReport report;
  report.alpha = alpha;
  report.step = step;
  double acc = 0.0;
  bool diverged = false;
  for (std::size_t c = 0; c < domains.size(); ++c) {
    const double loss = batch_td_loss(alpha, domains[c], spec,
                                      hash64(evaluation_seed(spec), tag, c), spec.eval_prompts);
    report.per_domain[domain_key(domains[c])] = loss;
    diverged = diverged || !std::isfinite(loss);
    acc += loss;
  }
  report.mean_sq_td_error = diverged ? kDiverged : acc / static_cast<double>(domains.size());
  return report;
}

Objective default_objective(const TrainSpec& spec) {
  return [spec](double alpha, std::uint64_t batch_seed) {
    double acc = 0.0;
    for (std::size_t k = 0; k < spec.train_domains.size(); ++k) {
      const double loss = batch_td_loss(alpha, spec.train_domains[k], spec,
                                        hash64(batch_seed, "domain", k), spec.batch_size);
      if (!std::isfinite(loss)) return kDiverged;
      acc += loss;
    }
    return acc / static_cast<double>(spec.train_domains.size());
  };
}

FitResult fit_alpha(const TrainSpec& spec, const Objective& objective) {
  spec.validate();
  if (spec.optimizer == Optimizer::GridSearch) return grid_search(spec, objective);
  return gradient_fit(spec, objective);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("pearson: size mismatch");
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0 || !std::isfinite(sab) || !std::isfinite(saa * sbb)) {
    return std::nan("");
  }
  return sab / std::sqrt(saa * sbb);
}

double centered_rmse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("centered_rmse: size mismatch");
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = (a[i] - ma) - (b[i] - mb);
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

SurfaceResult surface_eval(const SyntheticDomain& domain, double alpha, int n_context, int layers,
                           int grid_size, std::uint64_t seed, const KernelSpec& kernel) {
  if (grid_size < 2) throw std::invalid_argument("surface_eval: grid size must be >= 2");
  domain.validate();

  SurfaceResult out;
  out.grid_size = grid_size;
  out.alpha = alpha;
  for (int i = 0; i < grid_size; ++i) out.xs.push_back(-1.0 + 2.0 * i / (grid_size - 1));

  std::vector<Vector> queries;
  for (int iy = 0; iy < grid_size; ++iy) {
    for (int ix = 0; ix < grid_size; ++ix) {
      Vector q(2);
      q << out.xs[static_cast<std::size_t>(ix)], out.xs[static_cast<std::size_t>(iy)];
      out.truth.push_back(true_value(domain, q));
      queries.push_back(std::move(q));
    }
  }
  const auto [lo, hi] = std::minmax_element(out.truth.begin(), out.truth.end());
  out.truth_range = *hi - *lo;

  CounterRng rng(hash64(seed, "surface", 0));
  const auto context = sample_prompt(domain, n_context, rng);
  const Transformer model =
      Transformer::with_residual_scale(2, alpha, n_context, layers, domain.gamma, kernel);
  try {
    out.predicted = predict_raw(context, queries, Vector::Zero(2), model);
  } catch (const KernelOverflowError&) {
    out.predicted.assign(queries.size(), std::nan(""));
  }

  const bool finite = std::all_of(out.predicted.begin(), out.predicted.end(),
                                  [](double v) { return std::isfinite(v); });
  out.diverged = !finite;
  out.pearson = finite ? pearson(out.predicted, out.truth) : std::nan("");
  out.pearson_defined = !std::isnan(out.pearson);
  out.centered_rmse = finite ? centered_rmse(out.predicted, out.truth) : kDiverged;
  if (!std::isfinite(out.centered_rmse)) {
    out.centered_rmse = kDiverged;
    out.diverged = true;
  }
  return out;
}

std::string_view to_string(AblationAxis axis) {
  return axis == AblationAxis::ContextLength ? "context" : "layers";
}

AblationAxis ablation_axis_from_string(std::string_view name) {
  if (name == "context") return AblationAxis::ContextLength;
  if (name == "layers") return AblationAxis::Layers;
  throw std::invalid_argument("unknown ablation axis '" + std::string(name) +
                              "' (expected context or layers)");
}

std::vector<AblationRow> ablation_sweep(const SyntheticDomain& domain, const AblationConfig& cfg,
                                        std::uint64_t seed) {
  if (cfg.values.empty()) throw std::invalid_argument("ablation_sweep: no values");
  std::vector<AblationRow> rows;
  for (int v : cfg.values) {
    const bool context_axis = cfg.axis == AblationAxis::ContextLength;
    const int n = context_axis ? v : cfg.fixed_other;
    const int layers = context_axis ? cfg.fixed_other : v;
    const SurfaceResult s = surface_eval(domain, cfg.alpha, n, layers, cfg.grid_size, seed, cfg.kernel);
    rows.push_back(AblationRow{v, s.pearson, s.centered_rmse});
  }
  return rows;
}

std::vector<AblationRow> ablation_median(const SyntheticDomain& domain, const AblationConfig& cfg,
                                         const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("ablation_median: no seeds");
  std::vector<std::vector<AblationRow>> runs;
  for (std::uint64_t s : seeds) runs.push_back(ablation_sweep(domain, cfg, s));
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < cfg.values.size(); ++i) {
    std::vector<double> p, r;
    for (const auto& run : runs) {
      p.push_back(run[i].pearson);
      r.push_back(run[i].centered_rmse);
    }
    rows.push_back(AblationRow{cfg.values[i], median(p), median(r)});
  }
  return rows;
}

int count_increases(const std::vector<double>& values) {
  int count = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[i - 1]) ++count;
  }
  return count;
}

TransferResult transfer_matrix(const std::vector<SyntheticDomain>& train_family,
                               const std::vector<SyntheticDomain>& eval_family,
                               const TrainSpec& spec) {
  if (train_family.empty() || eval_family.empty()) {
    throw std::invalid_argument("transfer_matrix: families must be nonempty");
  }
  TransferResult result{train_family, eval_family, {}, {}};
  for (std::size_t r = 0; r < train_family.size(); ++r) {
    TrainSpec row_spec = spec;
    row_spec.train_domains = {train_family[r]};
    row_spec.eval_domains = eval_family;
    row_spec.seed = hash64(spec.seed, "transfer-row", r);
    row_spec.eval_seed = hash64(spec.eval_seed.value_or(spec.seed), "transfer-eval", 0);
    const FitResult fit = fit_alpha(row_spec);
    result.alpha_star.push_back(fit.alpha_star);

    std::vector<std::vector<TdLossReport>> row(eval_family.size());
    for (const TdLossReport& report : fit.curve) {
      for (std::size_t c = 0; c < eval_family.size(); ++c) {
        TdLossReport cell;
        cell.alpha = report.alpha;
        cell.step = report.step;
        cell.mean_sq_td_error = report.per_domain.at(domain_key(eval_family[c]));
        cell.per_domain[domain_key(eval_family[c])] = cell.mean_sq_td_error;
        row[c].push_back(std::move(cell));
      }
    }
    result.cells.push_back(std::move(row));
  }
  return result;
}

BaselineComparison linear_baseline(const SyntheticDomain& domain, const TrainSpec& spec,
                                   int grid_size, std::uint64_t surface_seed) {
  auto run_arm = [&](const KernelSpec& kernel) {
    TrainSpec arm_spec = spec;
    arm_spec.kernel = kernel;
    arm_spec.train_domains = {domain};
    arm_spec.eval_domains.clear();
    const FitResult fit = fit_alpha(arm_spec);
    BaselineArm arm;
    arm.kernel = kernel;
    arm.alpha = fit.alpha_star;
    arm.curve = fit.curve;
    arm.surface = surface_eval(domain, fit.alpha_star, spec.n_context, spec.layers, grid_size,
                               surface_seed, kernel);
    return arm;
  };
  BaselineComparison out;
  out.exponential = run_arm(spec.kernel);
  out.linear = run_arm(KernelSpec::linear());
  return out;
}

}  // namespace ictd::train
