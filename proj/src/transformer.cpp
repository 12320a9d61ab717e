#include "ictd/transformer.hpp"

#include <stdexcept>

namespace ictd::tf {

namespace {

int width_for(int state_dim) { return 2 * state_dim + 1; }

// (2d+1)^2 matrix copying rows [source_block * d, source_block * d + d) of Z
// into its top d rows.
Matrix selector(int state_dim, int source_block) {
  const int w = width_for(state_dim);
  Matrix s = Matrix::Zero(w, w);
  s.block(0, source_block * state_dim, state_dim, state_dim).setIdentity();
  return s;
}

Matrix residual_value(int state_dim, double entry) {
  const int w = width_for(state_dim);
  Matrix v = Matrix::Zero(w, w);
  v(w - 1, w - 1) = entry;
  return v;
}

// Returns the bottom-right value entry after checking that the head has the
// constructed sparsity: K, Q select a state block, V only scales the
// residual row.
double constructed_value_entry(const HeadWeights& head, int state_dim, int query_block) {
  const int w = width_for(state_dim);
  if (head.key.rows() != w || head.key.cols() != w || head.query.rows() != w ||
      head.query.cols() != w || head.value.rows() != w || head.value.cols() != w) {
    throw std::invalid_argument("structured forward: weight shape does not match the prompt");
  }
  if (head.key != selector(state_dim, 0) || head.query != selector(state_dim, query_block)) {
    throw std::invalid_argument("structured forward: key/query are not the constructed selectors");
  }
  const double entry = head.value(w - 1, w - 1);
  if (head.value != residual_value(state_dim, entry)) {
    throw std::invalid_argument("structured forward: value matrix touches more than the residual row");
  }
  return entry;
}

void check_model(const PromptMatrix& z0, const Transformer& model) {
  if (model.layers.empty()) throw std::invalid_argument("forward: model has no layers");
  if (model.scales.size() != model.layers.size()) {
    throw std::invalid_argument("forward: one residual scale per layer required");
  }
  const int w = width_for(z0.state_dim());
  for (const auto& layer : model.layers) {
    for (const HeadWeights* h : {&layer.current, &layer.next}) {
      if (h->key.rows() != w || h->query.rows() != w || h->value.rows() != w) {
        throw std::invalid_argument("forward: weight shape does not match the prompt");
      }
    }
  }
}

ForwardResult forward_literal(const PromptMatrix& z0, const Transformer& model, bool keep_trace) {
  ForwardResult result{z0, {}};
  if (keep_trace) result.trace.push_back(z0);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    result.output = layer_forward(result.output, model.layers[l], model.kernel, model.scales[l]);
    if (keep_trace) result.trace.push_back(result.output);
  }
  return result;
}

ForwardResult forward_structured(const PromptMatrix& z0, const Transformer& model,
                                 bool keep_trace) {
  const int d = z0.state_dim();
  const int n = z0.context_length();
  const Matrix& z = z0.data();

  // Affinities of context keys against every column. For the softmax
  // variant the column normalization runs over all keys, as in the literal
  // path, so the full matrix is built and its context rows kept.
  auto context_affinity = [&](const Eigen::Ref<const Matrix>& query_rows) -> Matrix {
    if (model.kernel.family == KernelFamily::SoftmaxNormalized) {
      return affinity_matrix(model.kernel, z.topRows(d), query_rows).topRows(n);
    }
    return affinity_matrix(model.kernel, z.topLeftCorner(d, n), query_rows);
  };
  const Matrix toward_current = context_affinity(z.topRows(d));
  const Matrix toward_next = context_affinity(z.middleRows(d, d));

  ForwardResult result{z0, {}};
  if (keep_trace) result.trace.push_back(z0);
  const int row = 2 * d;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const double v1 = constructed_value_entry(model.layers[l].current, d, 0);
    const double v2 = constructed_value_entry(model.layers[l].next, d, 1);
    Matrix& out = result.output.data();
    const Eigen::RowVectorXd b = out.row(row).head(n);
    const Eigen::RowVectorXd update = v1 * (b * toward_current) + v2 * (b * toward_next);
    out.row(row) += model.scales[l] * update;
    if (keep_trace) result.trace.push_back(result.output);
  }
  return result;
}

}  // namespace

PromptMatrix::PromptMatrix(Matrix z, int state_dim, int context_length)
    : z_(std::move(z)), d_(state_dim), n_(context_length) {
  if (d_ < 1) throw std::invalid_argument("PromptMatrix: state dimension must be >= 1");
  if (n_ < 1) throw std::invalid_argument("PromptMatrix: context length must be >= 1");
  if (z_.rows() != width_for(d_)) throw std::invalid_argument("PromptMatrix: expected 2d + 1 rows");
  if (z_.cols() <= n_) throw std::invalid_argument("PromptMatrix: expected at least one query column");
}

PromptMatrix build_prompt(const std::vector<Transition>& transitions, const Vector& query,
                          const Vector& pad) {
  return build_prompt(transitions, std::vector<Vector>{query}, pad);
}

PromptMatrix build_prompt(const std::vector<Transition>& transitions,
                          const std::vector<Vector>& queries, const Vector& pad) {
  if (transitions.empty()) throw std::invalid_argument("build_prompt: empty context");
  if (queries.empty()) throw std::invalid_argument("build_prompt: no query state");
  const Eigen::Index d = pad.size();
  if (d < 1) throw std::invalid_argument("build_prompt: empty pad state");

  const Eigen::Index n = static_cast<Eigen::Index>(transitions.size());
  const Eigen::Index q = static_cast<Eigen::Index>(queries.size());
  Matrix z = Matrix::Zero(2 * d + 1, n + q);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = transitions[static_cast<std::size_t>(i)];
    if (t.s.size() != d || t.s_next.size() != d) {
      throw std::invalid_argument("build_prompt: transition dimension mismatch");
    }
    z.col(i).head(d) = t.s;
    z.col(i).segment(d, d) = t.s_next;
    z(2 * d, i) = t.r;
  }
  for (Eigen::Index c = 0; c < q; ++c) {
    const Vector& query = queries[static_cast<std::size_t>(c)];
    if (query.size() != d) throw std::invalid_argument("build_prompt: query dimension mismatch");
    z.col(n + c).head(d) = query;
    z.col(n + c).segment(d, d) = pad;
  }
  return PromptMatrix(std::move(z), static_cast<int>(d), static_cast<int>(n));
}

PromptMatrix build_prompt_from_trajectory(const std::vector<Vector>& states,
                                          const std::vector<double>& rewards, const Vector& pad) {
  if (states.size() != rewards.size() + 1) {
    throw std::invalid_argument("trajectory: expected one more state than rewards");
  }
  std::vector<Transition> transitions;
  transitions.reserve(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    transitions.push_back(Transition{states[i], rewards[i], states[i + 1]});
  }
  return build_prompt(transitions, states.back(), pad);
}

Matrix mask_matrix(int context_length, int query_count) {
  const int size = context_length + query_count;
  Matrix m = Matrix::Zero(size, size);
  m.topLeftCorner(context_length, context_length).setIdentity();
  return m;
}

LayerWeights make_layer_weights(int state_dim, double alpha, double gamma) {
  LayerWeights w;
  w.current = HeadWeights{selector(state_dim, 0), selector(state_dim, 0),
                          residual_value(state_dim, -alpha)};
  w.next = HeadWeights{selector(state_dim, 0), selector(state_dim, 1),
                       residual_value(state_dim, gamma * alpha)};
  w.alpha = alpha;
  w.gamma = gamma;
  return w;
}

LayerWeights make_unit_layer_weights(int state_dim, double gamma) {
  return make_layer_weights(state_dim, 1.0, gamma);
}

Transformer Transformer::with_step_sizes(int state_dim, const std::vector<double>& alphas,
                                         double gamma, KernelSpec kernel) {
  Transformer model;
  for (double a : alphas) {
    model.layers.push_back(make_layer_weights(state_dim, a, gamma));
    model.scales.push_back(1.0);
  }
  model.kernel = kernel;
  model.gamma = gamma;
  return model;
}

Transformer Transformer::with_residual_scale(int state_dim, double alpha, int context_length,
                                             int layer_count, double gamma, KernelSpec kernel) {
  if (context_length < 1 || layer_count < 1) {
    throw std::invalid_argument("with_residual_scale: context length and depth must be >= 1");
  }
  Transformer model;
  const LayerWeights unit = make_unit_layer_weights(state_dim, gamma);
  model.layers.assign(static_cast<std::size_t>(layer_count), unit);
  model.scales.assign(static_cast<std::size_t>(layer_count), alpha / context_length);
  model.kernel = kernel;
  model.gamma = gamma;
  return model;
}

Matrix attention(const PromptMatrix& z, const HeadWeights& head, const KernelSpec& kernel) {
  const Matrix& zm = z.data();
  const Matrix keys = head.key * zm;
  const Matrix queries = head.query * zm;
  const Matrix h = affinity_matrix(kernel, keys, queries);
  const Matrix mask = mask_matrix(z.context_length(), z.query_count());
  return head.value * zm * mask * h;
}

PromptMatrix layer_forward(const PromptMatrix& z, const LayerWeights& weights,
                           const KernelSpec& kernel, double scale) {
  Matrix next = z.data() + scale * (attention(z, weights.current, kernel) +
                                    attention(z, weights.next, kernel));
  return PromptMatrix(std::move(next), z.state_dim(), z.context_length());
}

ForwardResult forward(const PromptMatrix& z0, const Transformer& model,
                      const ForwardOptions& options) {
  check_model(z0, model);
  if (options.path == ExecutionPath::Literal) return forward_literal(z0, model, options.keep_trace);
  return forward_structured(z0, model, options.keep_trace);
}

Readout read_value(const PromptMatrix& z_final, double gamma, std::optional<double> pad_value_hint,
                   int query_index) {
  if (query_index < 0 || query_index >= z_final.query_count()) {
    throw std::out_of_range("read_value: query index out of range");
  }
  Readout out;
  out.raw = -z_final.residual(z_final.context_length() + query_index);
  if (pad_value_hint) out.corrected = out.raw + gamma * *pad_value_hint;
  return out;
}

double estimate_pad_value(const std::vector<Transition>& transitions, const Vector& pad,
                          const Transformer& model) {
  const PromptMatrix z0 = build_prompt(transitions, pad, pad);
  const ForwardResult result = forward(z0, model);
  return read_value(result.output, model.gamma).raw / (1.0 - model.gamma);
}

std::vector<double> predict_raw(const std::vector<Transition>& transitions,
                                const std::vector<Vector>& queries, const Vector& pad,
                                const Transformer& model) {
  const PromptMatrix z0 = build_prompt(transitions, queries, pad);
  const ForwardResult result = forward(z0, model);
  std::vector<double> out(queries.size());
  for (std::size_t c = 0; c < queries.size(); ++c) {
    out[c] = read_value(result.output, model.gamma, std::nullopt, static_cast<int>(c)).raw;
  }
  return out;
}

}  // namespace ictd::tf
