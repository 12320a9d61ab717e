#pragma once

#include "ictd/kernels.hpp"
#include "ictd/mrp.hpp"

#include <vector>

namespace ictd::oracle {

/// Step-size schedule and kernel for kernelized semi-gradient TD.
///
/// alphas[k] is the step used at iteration k; the number of iterations is
/// alphas.size().
struct TdConfig {
  double gamma = 0.9;
  std::vector<double> alphas;
  KernelSpec kernel;
  Vector pad_state;  // empty means the zero vector of the state dimension

  /// Shared alpha with effective step alpha / n for every iteration.
  static TdConfig uniform(double gamma, double alpha, int n, int layers, KernelSpec kernel);

  int layers() const { return static_cast<int>(alphas.size()); }
  Vector pad_for(Eigen::Index dim) const;
};

/// Values and residuals after `iteration` TD steps.
///
/// Values are tracked at every point the residual identity touches: context
/// states, their next states, the query and the padding state. residuals[i]
/// is r_i + gamma v(s'_i) - v(s_i); query_residual is gamma v(pad) - v(query),
/// the bottom-right entry of the prompt matrix.
struct TdState {
  std::vector<double> state_values;
  std::vector<double> next_values;
  double query_value = 0.0;
  double pad_value = 0.0;
  std::vector<double> residuals;
  double query_residual = 0.0;
  int iteration = 0;

  /// residuals followed by query_residual (length n + 1).
  std::vector<double> residual_row() const;
};

TdState initial_state(const std::vector<Transition>& transitions);

/// v_{k+1}(x) = v_k(x) + alpha_k sum_j b_k(j) k(s_j, x) at every tracked
/// point, followed by recomputing the residuals from the new values.
TdState td_step(const TdState& state, const std::vector<Transition>& transitions,
                const Vector& query, const TdConfig& cfg, int k);

/// b_{k+1}(i) = b_k(i) + alpha_k sum_j b_k(j) [gamma k(s_j, s'_i) - k(s_j, s_i)]
/// for context columns; the query entry uses the padding state in place of
/// s'_i and the query in place of s_i. Input and output have length n + 1.
std::vector<double> residual_step(const std::vector<double>& residuals,
                                  const std::vector<Transition>& transitions,
                                  const Vector& query, const TdConfig& cfg, int k);

/// Runs all cfg.layers() iterations of td_step; trace[k] is the state after
/// k iterations (trace[0] is the initial state).
std::vector<TdState> run_td(const std::vector<Transition>& transitions, const Vector& query,
                            const TdConfig& cfg);

struct ValueReadout {
  double raw = 0.0;        // v_L(query) - gamma v_L(pad)
  double pad_value = 0.0;  // v_L(pad)
  double corrected = 0.0;  // v_L(query)
};

ValueReadout evaluate_value(const std::vector<Transition>& transitions, const Vector& query,
                            const TdConfig& cfg);

}  // namespace ictd::oracle
