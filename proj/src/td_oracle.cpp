#include "ictd/td_oracle.hpp"

#include <stdexcept>

namespace ictd::oracle {

namespace {

void check_inputs(const std::vector<Transition>& transitions, const Vector& query,
                  const TdConfig& cfg) {
  if (transitions.empty()) throw std::invalid_argument("TD oracle needs at least one transition");
  const Eigen::Index d = query.size();
  for (const auto& t : transitions) {
    if (t.s.size() != d || t.s_next.size() != d) {
      throw std::invalid_argument("TD oracle: transition dimension differs from query");
    }
  }
  if (cfg.pad_state.size() != 0 && cfg.pad_state.size() != d) {
    throw std::invalid_argument("TD oracle: pad state dimension differs from query");
  }
  if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw std::invalid_argument("gamma must be in [0, 1)");
}

// sum_j b(j) k(s_j, x)
double weighted_kernel_sum(const std::vector<double>& b, const std::vector<Transition>& transitions,
                           const Vector& x, const KernelSpec& kernel) {
  double acc = 0.0;
  for (std::size_t j = 0; j < transitions.size(); ++j) {
    acc += b[j] * kernel_eval(kernel, transitions[j].s, x);
  }
  return acc;
}

void recompute_residuals(TdState& state, const std::vector<Transition>& transitions, double gamma) {
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    state.residuals[i] = transitions[i].r + gamma * state.next_values[i] - state.state_values[i];
  }
  state.query_residual = gamma * state.pad_value - state.query_value;
}

}  // namespace

TdConfig TdConfig::uniform(double gamma, double alpha, int n, int layers, KernelSpec kernel) {
  if (n < 1 || layers < 1) throw std::invalid_argument("TdConfig::uniform: n and layers must be >= 1");
  TdConfig cfg;
  cfg.gamma = gamma;
  cfg.alphas.assign(static_cast<std::size_t>(layers), alpha / n);
  cfg.kernel = kernel;
  return cfg;
}

Vector TdConfig::pad_for(Eigen::Index dim) const {
  if (pad_state.size() == 0) return Vector::Zero(dim);
  return pad_state;
}

std::vector<double> TdState::residual_row() const {
  std::vector<double> row = residuals;
  row.push_back(query_residual);
  return row;
}

TdState initial_state(const std::vector<Transition>& transitions) {
  const std::size_t n = transitions.size();
  TdState state;
  state.state_values.assign(n, 0.0);
  state.next_values.assign(n, 0.0);
  state.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) state.residuals[i] = transitions[i].r;
  return state;
}

TdState td_step(const TdState& state, const std::vector<Transition>& transitions,
                const Vector& query, const TdConfig& cfg, int k) {
  check_inputs(transitions, query, cfg);
  if (state.iteration != k) throw std::invalid_argument("td_step: state iteration does not match k");
  if (k < 0 || k >= cfg.layers()) throw std::out_of_range("td_step: iteration outside schedule");

  const double alpha = cfg.alphas[static_cast<std::size_t>(k)];
  const Vector pad = cfg.pad_for(query.size());
  const auto& b = state.residuals;

  TdState next = state;
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    next.state_values[i] += alpha * weighted_kernel_sum(b, transitions, transitions[i].s, cfg.kernel);
    next.next_values[i] +=
        alpha * weighted_kernel_sum(b, transitions, transitions[i].s_next, cfg.kernel);
  }
  next.query_value += alpha * weighted_kernel_sum(b, transitions, query, cfg.kernel);
  next.pad_value += alpha * weighted_kernel_sum(b, transitions, pad, cfg.kernel);
  recompute_residuals(next, transitions, cfg.gamma);
  next.iteration = k + 1;
  return next;
}

std::vector<double> residual_step(const std::vector<double>& residuals,
                                  const std::vector<Transition>& transitions,
                                  const Vector& query, const TdConfig& cfg, int k) {
  check_inputs(transitions, query, cfg);
  const std::size_t n = transitions.size();
  if (residuals.size() != n + 1) throw std::invalid_argument("residual_step: expected n + 1 residuals");
  if (k < 0 || k >= cfg.layers()) throw std::out_of_range("residual_step: iteration outside schedule");

  const double alpha = cfg.alphas[static_cast<std::size_t>(k)];
  const Vector pad = cfg.pad_for(query.size());

  std::vector<double> out(residuals);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double toward_next = kernel_eval(cfg.kernel, transitions[j].s, transitions[i].s_next);
      const double toward_self = kernel_eval(cfg.kernel, transitions[j].s, transitions[i].s);
      acc += residuals[j] * (cfg.gamma * toward_next - toward_self);
    }
    out[i] += alpha * acc;
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    acc += residuals[j] * (cfg.gamma * kernel_eval(cfg.kernel, transitions[j].s, pad) -
                           kernel_eval(cfg.kernel, transitions[j].s, query));
  }
  out[n] += alpha * acc;
  return out;
}

std::vector<TdState> run_td(const std::vector<Transition>& transitions, const Vector& query,
                            const TdConfig& cfg) {
  check_inputs(transitions, query, cfg);
  if (cfg.layers() < 1) throw std::invalid_argument("run_td: at least one iteration required");
  std::vector<TdState> trace;
  trace.reserve(static_cast<std::size_t>(cfg.layers()) + 1);
  trace.push_back(initial_state(transitions));
  for (int k = 0; k < cfg.layers(); ++k) trace.push_back(td_step(trace.back(), transitions, query, cfg, k));
  return trace;
}

ValueReadout evaluate_value(const std::vector<Transition>& transitions, const Vector& query,
                            const TdConfig& cfg) {
  const auto trace = run_td(transitions, query, cfg);
  const TdState& last = trace.back();
  ValueReadout out;
  out.raw = -last.query_residual;
  out.pad_value = last.pad_value;
  out.corrected = out.raw + cfg.gamma * out.pad_value;
  return out;
}

}  // namespace ictd::oracle
