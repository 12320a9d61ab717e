#include "ictd/verify.hpp"

#include "ictd/mrp.hpp"
#include "ictd/rng.hpp"
#include "ictd/td_oracle.hpp"
#include "ictd/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ictd::verify {

namespace {

Vector uniform_vector(int dim, CounterRng& rng) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.uniform(-1.0, 1.0);
  return v;
}

std::vector<Transition> random_transitions(int dim, int n, CounterRng& rng) {
  std::vector<Transition> ts;
  ts.reserve(n);
  for (int i = 0; i < n; ++i) {
    Transition t;
    t.s = uniform_vector(dim, rng);
    t.r = rng.uniform(-1.0, 1.0);
    t.s_next = uniform_vector(dim, rng);
    ts.push_back(std::move(t));
  }
  return ts;
}

double row_deviation(const tf::PromptMatrix& z, const std::vector<double>& expected) {
  double worst = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    worst = std::max(worst, std::abs(z.residual(static_cast<int>(i)) - expected[i]));
  }
  return worst;
}

}  // namespace

std::vector<EquivalenceCase> equivalence_suite(const EquivalenceSweep& sweep, std::uint64_t seed) {
  const std::size_t grid = sweep.context_lengths.size() * sweep.layer_counts.size() *
                           sweep.gammas.size() * sweep.kernels.size();
  if (grid == 0) throw std::invalid_argument("equivalence_suite: empty sweep");

  std::vector<EquivalenceCase> cases;
  cases.reserve(sweep.instances);
  for (int i = 0; i < sweep.instances; ++i) {
    std::size_t code = static_cast<std::size_t>(i) % grid;
    EquivalenceCase c;
    c.index = i;
    c.state_dim = sweep.state_dim;
    c.kernel = sweep.kernels[code % sweep.kernels.size()];
    code /= sweep.kernels.size();
    c.gamma = sweep.gammas[code % sweep.gammas.size()];
    code /= sweep.gammas.size();
    c.layers = sweep.layer_counts[code % sweep.layer_counts.size()];
    code /= sweep.layer_counts.size();
    c.context_length = sweep.context_lengths[code];

    CounterRng rng(hash64(seed, "verify", static_cast<std::uint64_t>(i)));
    const int n = c.context_length;
    const auto ts = random_transitions(c.state_dim, n, rng);
    const Vector query = uniform_vector(c.state_dim, rng);
    const Vector pad = uniform_vector(c.state_dim, rng);
    std::vector<double> alphas(c.layers);
    for (double& a : alphas) a = rng.uniform(0.02, 0.3) / n;

    oracle::TdConfig cfg{c.gamma, alphas, c.kernel, pad};
    const auto trace = oracle::run_td(ts, query, cfg);

    const tf::PromptMatrix z0 = tf::build_prompt(ts, query, pad);
    const auto model = tf::Transformer::with_step_sizes(c.state_dim, alphas, c.gamma, c.kernel);
    const auto literal = tf::forward(z0, model, {tf::ExecutionPath::Literal, true});
    const auto structured = tf::forward(z0, model, {tf::ExecutionPath::Structured, true});
    for (int k = 0; k <= c.layers; ++k) {
      const auto expected = trace[k].residual_row();
      const double dev = row_deviation(literal.trace[k], expected);
      if (k > 0) c.per_layer.push_back(dev);
      c.max_dev_literal = std::max(c.max_dev_literal, dev);
      c.max_dev_structured =
          std::max(c.max_dev_structured, row_deviation(structured.trace[k], expected));
    }

    // Same schedule with the step size moved into the residual scale.
    const double shared = alphas.front() * n;
    const auto unit = tf::Transformer::with_residual_scale(c.state_dim, shared, n, c.layers,
                                                           c.gamma, c.kernel);
    const auto baked = tf::Transformer::with_step_sizes(
        c.state_dim, std::vector<double>(c.layers, shared / n), c.gamma, c.kernel);
    const Matrix a = tf::forward(z0, unit).output.data();
    const Matrix b = tf::forward(z0, baked).output.data();
    c.max_dev_unit = (a - b).cwiseAbs().maxCoeff();
    cases.push_back(std::move(c));
  }
  return cases;
}

std::vector<DualFormCase> dual_form_suite(const std::vector<int>& state_dims,
                                          const std::vector<int>& context_lengths,
                                          const std::vector<int>& layer_counts, int repeats,
                                          std::uint64_t seed) {
  std::vector<DualFormCase> out;
  std::uint64_t index = 0;
  for (int d : state_dims) {
    for (int n : context_lengths) {
      for (int layers : layer_counts) {
        DualFormCase c{d, n, layers, 0.0};
        for (int rep = 0; rep < repeats; ++rep) {
          CounterRng rng(hash64(seed, "dual-form", index++));
          const auto ts = random_transitions(d, n, rng);
          const Vector query = uniform_vector(d, rng);
          const double gamma = rng.uniform(0.0, 0.95);
          const KernelSpec kernel =
              rep % 2 ? KernelSpec::linear() : KernelSpec::exponential(rng.uniform(0.5, 10.0));
          auto cfg = oracle::TdConfig::uniform(gamma, rng.uniform(0.05, 0.5), n, layers, kernel);
          cfg.pad_state = uniform_vector(d, rng);

          oracle::TdState state = oracle::initial_state(ts);
          std::vector<double> residuals = state.residual_row();
          for (int k = 0; k < layers; ++k) {
            state = oracle::td_step(state, ts, query, cfg, k);
            residuals = oracle::residual_step(residuals, ts, query, cfg, k);
            const auto expected = state.residual_row();
            for (std::size_t i = 0; i < expected.size(); ++i) {
              c.max_dev = std::max(c.max_dev, std::abs(expected[i] - residuals[i]));
            }
          }
        }
        out.push_back(c);
      }
    }
  }
  return out;
}

HeadCheck head_closed_form_check(int prompts, std::uint64_t seed) {
  HeadCheck check;
  for (int p = 0; p < prompts; ++p) {
    CounterRng rng(hash64(seed, "heads", static_cast<std::uint64_t>(p)));
    const int d = 1 + static_cast<int>(rng.next_u64() % 4);
    const int n = 1 + static_cast<int>(rng.next_u64() % 16);
    const auto ts = random_transitions(d, n, rng);
    tf::PromptMatrix z = tf::build_prompt(ts, uniform_vector(d, rng), uniform_vector(d, rng));
    // Arbitrary residual row, including the query entry.
    for (int i = 0; i <= n; ++i) z.data()(2 * d, i) = rng.uniform(-2.0, 2.0);

    const double alpha = rng.uniform(0.01, 1.0);
    const double gamma = rng.uniform(0.0, 0.99);
    const KernelSpec kernel = p % 3 == 2 ? KernelSpec::linear()
                                         : KernelSpec::exponential(p % 3 ? 10.0 : 1.0);
    const tf::LayerWeights w = tf::make_layer_weights(d, alpha, gamma);
    const Matrix h1 = tf::attention(z, w.current, kernel);
    const Matrix h2 = tf::attention(z, w.next, kernel);

    const Matrix& zd = z.data();
    for (int i = 0; i <= n; ++i) {
      double sum_cur = 0.0;
      double sum_next = 0.0;
      for (int j = 0; j < n; ++j) {
        const double b = zd(2 * d, j);
        sum_cur += b * kernel_eval(kernel, zd.col(j).head(d), zd.col(i).head(d));
        sum_next += b * kernel_eval(kernel, zd.col(j).head(d), zd.col(i).segment(d, d));
      }
      check.max_dev_head1 = std::max(check.max_dev_head1, std::abs(h1(2 * d, i) + alpha * sum_cur));
      check.max_dev_head2 =
          std::max(check.max_dev_head2, std::abs(h2(2 * d, i) - gamma * alpha * sum_next));
    }
    check.max_abs_off_row = std::max(
        {check.max_abs_off_row, h1.topRows(2 * d).cwiseAbs().maxCoeff(),
         h2.topRows(2 * d).cwiseAbs().maxCoeff()});
  }
  return check;
}

OffsetCheck offset_check(int queries, std::uint64_t seed) {
  const SyntheticDomain dom = SyntheticDomain::appendix_f();
  const int n = 32;
  const int layers = 30;
  const double alpha = 1.0;
  CounterRng rng(hash64(seed, "offset", 0));
  const auto ts = sample_prompt(dom, n, rng);
  std::vector<Vector> qs;
  for (int q = 0; q < queries; ++q) qs.push_back(uniform_vector(SyntheticDomain::kStateDim, rng));
  const Vector pad = Vector::Zero(SyntheticDomain::kStateDim);

  const auto model =
      tf::Transformer::with_residual_scale(SyntheticDomain::kStateDim, alpha, n, layers, dom.gamma,
                                           dom.kernel());
  const auto raw = tf::predict_raw(ts, qs, pad, model);
  const auto cfg = oracle::TdConfig::uniform(dom.gamma, alpha, n, layers, dom.kernel());

  OffsetCheck check;
  double lo = HUGE_VAL;
  double hi = -HUGE_VAL;
  for (int q = 0; q < queries; ++q) {
    const auto truth = oracle::evaluate_value(ts, qs[q], cfg);
    const double diff = raw[q] - truth.corrected;
    check.pad_offset = -dom.gamma * truth.pad_value;
    lo = std::min(lo, diff);
    hi = std::max(hi, diff);
    check.max_dev_from_pad = std::max(check.max_dev_from_pad, std::abs(diff - check.pad_offset));
  }
  check.variation = hi - lo;
  return check;
}

}  // namespace ictd::verify
