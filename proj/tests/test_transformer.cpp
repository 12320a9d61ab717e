#include "ictd/rng.hpp"
#include "ictd/td_oracle.hpp"
#include "ictd/transformer.hpp"
#include "ictd/verify.hpp"

#include <doctest.h>

#include <cmath>

using namespace ictd;
using namespace ictd::tf;

namespace {

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

std::vector<Transition> random_transitions(int n, CounterRng& rng) {
  std::vector<Transition> ts;
  for (int i = 0; i < n; ++i) {
    ts.push_back({v2(rng.uniform(-1, 1), rng.uniform(-1, 1)), rng.uniform(-1, 1),
                  v2(rng.uniform(-1, 1), rng.uniform(-1, 1))});
  }
  return ts;
}

}  // namespace

TEST_CASE("prompt layout") {
  const std::vector<Transition> ts{{v2(1, 0), 1.0, v2(0, 0)}};
  const PromptMatrix z = build_prompt(ts, v2(0.5, 0.5), v2(0, 0));
  Matrix expected(5, 2);
  expected << 1, 0.5, 0, 0.5, 0, 0, 0, 0, 1, 0;
  CHECK(z.data() == expected);
  CHECK(z.state_dim() == 2);
  CHECK(z.context_length() == 1);
  CHECK(z.query_count() == 1);
}

TEST_CASE("trajectory prompt chains states") {
  const std::vector<Vector> states{v2(0, 1), v2(1, 0), v2(0.5, 0.5)};
  const PromptMatrix z = build_prompt_from_trajectory(states, {2.0, 3.0}, v2(0, 0));
  CHECK(z.data().col(0).segment(2, 2) == states[1]);
  CHECK(z.data().col(1).head(2) == states[1]);
  CHECK(z.data().col(2).head(2) == states[2]);
  CHECK(z.residual(1) == 3.0);
  CHECK(z.residual(2) == 0.0);
}

TEST_CASE("mask") {
  const Matrix m = mask_matrix(3, 2);
  CHECK(m.rows() == 5);
  CHECK(m.diagonal().head(3).sum() == 3.0);
  CHECK(m.sum() == 3.0);
}

TEST_CASE("head outputs match closed forms") {
  const verify::HeadCheck c = verify::head_closed_form_check(50, 1);
  CHECK(c.max_dev_head1 <= 1e-10);
  CHECK(c.max_dev_head2 <= 1e-10);
  CHECK(c.max_abs_off_row == 0.0);
}

TEST_CASE("query column never acts as a key") {
  CounterRng rng(2);
  const auto ts = random_transitions(4, rng);
  const auto model = Transformer::with_residual_scale(2, 1.0, 4, 3, 0.9, KernelSpec::exponential(1.0));
  PromptMatrix a = build_prompt(ts, v2(0.1, 0.2), v2(0, 0));
  PromptMatrix b = a;
  // Perturbing the query's own residual entry and next state must not change
  // any context column.
  b.data()(4, 4) = 123.0;
  b.data()(2, 4) = -0.7;
  const Matrix za = forward(a, model, {ExecutionPath::Literal, false}).output.data();
  const Matrix zb = forward(b, model, {ExecutionPath::Literal, false}).output.data();
  CHECK(za.leftCols(4) == zb.leftCols(4));
}

TEST_CASE("state rows are never written") {
  CounterRng rng(3);
  const auto ts = random_transitions(6, rng);
  const PromptMatrix z0 = build_prompt(ts, v2(0.3, -0.3), v2(0.1, 0.1));
  const auto model = Transformer::with_residual_scale(2, 2.0, 6, 5, 0.5, KernelSpec::exponential(1.0));
  const Matrix z = forward(z0, model, {ExecutionPath::Literal, false}).output.data();
  CHECK(z.topRows(4) == z0.data().topRows(4));
}

TEST_CASE("two parameterizations agree") {
  CounterRng rng(4);
  const auto ts = random_transitions(8, rng);
  const PromptMatrix z0 = build_prompt(ts, v2(0.2, 0.7), v2(0, 0));
  const auto unit = Transformer::with_residual_scale(2, 1.5, 8, 10, 0.9, KernelSpec::exponential(1.0));
  const auto baked = Transformer::with_step_sizes(2, std::vector<double>(10, 1.5 / 8), 0.9,
                                                  KernelSpec::exponential(1.0));
  for (auto path : {ExecutionPath::Literal, ExecutionPath::Structured}) {
    const Matrix a = forward(z0, unit, {path, false}).output.data();
    const Matrix b = forward(z0, baked, {path, false}).output.data();
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("literal and structured paths agree") {
  CounterRng rng(5);
  for (const auto& k : {KernelSpec::exponential(1.0), KernelSpec::linear(), KernelSpec::softmax(1.0)}) {
    const auto ts = random_transitions(10, rng);
    const PromptMatrix z0 = build_prompt(ts, std::vector<Vector>{v2(0.2, 0.7), v2(-1, 0.5)}, v2(0.1, 0));
    const auto model = Transformer::with_residual_scale(2, 1.0, 10, 7, 0.9, k);
    const auto lit = forward(z0, model, {ExecutionPath::Literal, true});
    const auto str = forward(z0, model, {ExecutionPath::Structured, true});
    REQUIRE(lit.trace.size() == 8);
    REQUIRE(str.trace.size() == 8);
    for (int l = 0; l <= 7; ++l) {
      CHECK((lit.trace[l].data() - str.trace[l].data()).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("structured path refuses foreign weights") {
  CounterRng rng(6);
  const auto ts = random_transitions(3, rng);
  auto model = Transformer::with_residual_scale(2, 1.0, 3, 2, 0.9, KernelSpec::linear());
  model.layers[1].current.value(0, 4) = 1.0;
  const PromptMatrix z0 = build_prompt(ts, v2(0, 0), v2(0, 0));
  CHECK_THROWS(forward(z0, model, {ExecutionPath::Structured, false}));
  CHECK_NOTHROW(forward(z0, model, {ExecutionPath::Literal, false}));
}

TEST_CASE("multi-query equals single-query") {
  CounterRng rng(7);
  const auto ts = random_transitions(12, rng);
  const auto model = Transformer::with_residual_scale(2, 1.0, 12, 9, 0.9, KernelSpec::exponential(1.0));
  std::vector<Vector> qs{v2(0.1, 0.1), v2(-0.8, 0.3), v2(0.9, -0.9)};
  const auto raw = predict_raw(ts, qs, v2(0, 0), model);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const auto single = forward(build_prompt(ts, qs[i], v2(0, 0)), model).output;
    CHECK(raw[i] == doctest::Approx(read_value(single, 0.9).raw).epsilon(1e-13));
  }
}

TEST_CASE("transformer reproduces TD at every layer") {
  verify::EquivalenceSweep sweep;
  sweep.instances = 108;
  double worst = 0.0;
  bool saw_minimal = false;
  for (const auto& c : verify::equivalence_suite(sweep, 0)) {
    worst = std::max({worst, c.max_dev_literal, c.max_dev_structured, c.max_dev_unit});
    saw_minimal |= c.context_length == 1 && c.layers == 1;
  }
  CHECK(saw_minimal);
  CHECK(worst <= 1e-9);
}

TEST_CASE("readout identities") {
  CounterRng rng(8);
  const auto ts = random_transitions(16, rng);
  const double gamma = 0.9;
  const auto model = Transformer::with_residual_scale(2, 1.0, 16, 10, gamma, KernelSpec::exponential(1.0));
  const auto cfg = oracle::TdConfig::uniform(gamma, 1.0, 16, 10, KernelSpec::exponential(1.0));
  const Vector q = v2(0.3, 0.4);
  const Vector pad = v2(0, 0);
  const auto truth = oracle::evaluate_value(ts, q, cfg);
  const double pad_value = estimate_pad_value(ts, pad, model);
  CHECK(pad_value == doctest::Approx(truth.pad_value).epsilon(1e-12));
  const Readout r = read_value(forward(build_prompt(ts, q, pad), model).output, gamma, pad_value);
  CHECK(r.raw == doctest::Approx(truth.raw).epsilon(1e-12));
  REQUIRE(r.corrected);
  CHECK(*r.corrected == doctest::Approx(truth.corrected).epsilon(1e-12));

  const verify::OffsetCheck off = verify::offset_check(20, 0);
  CHECK(off.variation <= 1e-9);
  CHECK(off.max_dev_from_pad <= 1e-9);
}
