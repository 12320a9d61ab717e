#pragma once

#include "ictd/kernels.hpp"
#include "ictd/mrp.hpp"

#include <optional>
#include <vector>

namespace ictd::tf {

/// In-context prompt Z of shape (2d + 1) x (n + q):
///
///   rows [0, d)      current states s_0 .. s_{n-1}, then the query states
///   rows [d, 2d)     next states s'_0 .. s'_{n-1}, then the padding state
///   row  2d          residual row: rewards r_0 .. r_{n-1}, then 0 per query
///
/// The paper-style prompt has a single query column (q = 1). Extra query
/// columns are independent because the mask removes every query column as a
/// key/value source.
class PromptMatrix {
 public:
  PromptMatrix(Matrix z, int state_dim, int context_length);

  const Matrix& data() const { return z_; }
  Matrix& data() { return z_; }

  int state_dim() const { return d_; }
  int context_length() const { return n_; }
  int query_count() const { return static_cast<int>(z_.cols()) - n_; }
  int residual_row_index() const { return 2 * d_; }

  double residual(int column) const { return z_(2 * d_, column); }
  Eigen::Block<const Matrix> current_states() const { return z_.topRows(d_); }
  Eigen::Block<const Matrix> next_states() const { return z_.middleRows(d_, d_); }

 private:
  Matrix z_;
  int d_;
  int n_;
};

PromptMatrix build_prompt(const std::vector<Transition>& transitions, const Vector& query,
                          const Vector& pad);
PromptMatrix build_prompt(const std::vector<Transition>& transitions,
                          const std::vector<Vector>& queries, const Vector& pad);

/// Chained layout: transitions (s_i, r_i, s_{i+1}) for i < n, query s_n.
/// states holds s_0 .. s_n and rewards r_0 .. r_{n-1}.
PromptMatrix build_prompt_from_trajectory(const std::vector<Vector>& states,
                                          const std::vector<double>& rewards, const Vector& pad);

/// (n + q) x (n + q) mask: identity on the first n diagonal entries, zero
/// elsewhere.
Matrix mask_matrix(int context_length, int query_count = 1);

struct HeadWeights {
  Matrix key;
  Matrix query;
  Matrix value;
};

/// Two-head layer. The first head applies k(s_j, s_i) and writes
/// -alpha * sum_j b_j k(s_j, s_i); the second head applies k(s_j, s'_i) and
/// writes +gamma * alpha * sum_j b_j k(s_j, s'_i). Both heads only touch the
/// residual row.
struct LayerWeights {
  HeadWeights current;  // head 1
  HeadWeights next;     // head 2
  double alpha = 1.0;
  double gamma = 0.0;
};

/// Step size baked into the value matrices (V entries -alpha, +gamma alpha).
/// Used with residual scale 1.
LayerWeights make_layer_weights(int state_dim, double alpha, double gamma);

/// Unit value entries (-1, +gamma); the step size lives in the residual
/// scale alpha / n instead.
LayerWeights make_unit_layer_weights(int state_dim, double gamma);

/// A stack of constructed layers plus the kernel of the attention activation.
struct Transformer {
  std::vector<LayerWeights> layers;
  std::vector<double> scales;  // residual multiplier per layer
  KernelSpec kernel;
  double gamma = 0.0;

  /// Per-layer step sizes in V, unit residual scale.
  static Transformer with_step_sizes(int state_dim, const std::vector<double>& alphas,
                                     double gamma, KernelSpec kernel);
  /// Unit V entries, residual scale alpha / n at every layer.
  static Transformer with_residual_scale(int state_dim, double alpha, int context_length,
                                         int layer_count, double gamma, KernelSpec kernel);

  int depth() const { return static_cast<int>(layers.size()); }
};

/// V Z M h(K Z, Q Z), computed literally with dense matrices.
Matrix attention(const PromptMatrix& z, const HeadWeights& head, const KernelSpec& kernel);

/// Z + scale * (head1(Z) + head2(Z)), computed literally.
PromptMatrix layer_forward(const PromptMatrix& z, const LayerWeights& weights,
                           const KernelSpec& kernel, double scale);

enum class ExecutionPath {
  /// Dense (2d+1)^2 weight products and a full-height affinity per head and
  /// layer.
  Literal,
  /// Exploits the construction: only the residual row changes and the
  /// affinities depend on the (unchanging) state rows only, so they are
  /// computed once per forward pass. Requires constructed weights.
  Structured,
};

struct ForwardOptions {
  ExecutionPath path = ExecutionPath::Structured;
  bool keep_trace = false;
};

struct ForwardResult {
  PromptMatrix output;
  std::vector<PromptMatrix> trace;  // Z_0 .. Z_L when requested
};

ForwardResult forward(const PromptMatrix& z0, const Transformer& model,
                      const ForwardOptions& options = {});

struct Readout {
  double raw = 0.0;
  std::optional<double> corrected;
};

/// raw = -(bottom entry of the query column) = v_L(query) - gamma v_L(pad).
/// corrected = raw + gamma * pad_value_hint when the hint is supplied.
Readout read_value(const PromptMatrix& z_final, double gamma,
                   std::optional<double> pad_value_hint = std::nullopt, int query_index = 0);

/// v_L(pad) from a second forward pass with query = pad:
/// raw(pad) = (1 - gamma) v_L(pad).
double estimate_pad_value(const std::vector<Transition>& transitions, const Vector& pad,
                          const Transformer& model);

/// Raw readouts for many queries sharing one context, in a single
/// multi-query structured forward pass.
std::vector<double> predict_raw(const std::vector<Transition>& transitions,
                                const std::vector<Vector>& queries, const Vector& pad,
                                const Transformer& model);

}  // namespace ictd::tf
