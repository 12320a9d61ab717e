#include "ictd/rng.hpp"
#include "ictd/td_oracle.hpp"
#include "ictd/training.hpp"

#include <doctest.h>

#include <cmath>

using namespace ictd;
using namespace ictd::train;

namespace {

TrainSpec small_spec() {
  TrainSpec spec;
  spec.n_context = 8;
  spec.layers = 5;
  spec.eval_transitions = 8;
  spec.eval_prompts = 4;
  spec.batch_size = 4;
  spec.steps = 10;
  return spec;
}

}  // namespace

TEST_CASE("alpha grid is log-spaced") {
  const auto v = AlphaGrid{}.values();
  REQUIRE(v.size() == 25);
  CHECK(v.front() == doctest::Approx(1e-2));
  CHECK(v.back() == doctest::Approx(10.0));
  CHECK(v[12] == doctest::Approx(std::sqrt(0.1)).epsilon(1e-12));
}

TEST_CASE("gradient descent on a quadratic") {
  TrainSpec spec = small_spec();
  spec.alpha_init = 1.0;
  spec.learning_rate = 0.1;
  spec.steps = 500;
  const Objective quad = [](double a, std::uint64_t) { return (a - 0.3) * (a - 0.3); };
  const FitResult fit = fit_alpha(spec, quad);
  CHECK(std::abs(fit.alpha_star - 0.3) <= 1e-3);
  CHECK(fit.curve.back().mean_sq_td_error < fit.curve.front().mean_sq_td_error);
  CHECK(fit.curve.front().per_domain.count("objective") == 1);

  spec.optimizer = Optimizer::Adam;
  spec.learning_rate = 0.01;
  CHECK(std::abs(fit_alpha(spec, quad).alpha_star - 0.3) <= 1e-3);

  spec.optimizer = Optimizer::GridSearch;
  spec.grid = AlphaGrid{0.1, 1.0, 11};
  const FitResult grid = fit_alpha(spec, quad);
  CHECK(grid.curve.size() == 11);
  CHECK(grid.alpha_star == doctest::Approx(0.3).epsilon(0.2));
}

TEST_CASE("divergent objective stops and keeps the last finite alpha") {
  TrainSpec spec = small_spec();
  spec.alpha_init = 1.0;
  spec.learning_rate = 0.1;
  spec.steps = 100;
  const Objective cliff = [](double a, std::uint64_t) {
    return a > 1.5 ? std::numeric_limits<double>::infinity() : -a;
  };
  const FitResult fit = fit_alpha(spec, cliff);
  CHECK(fit.diverged);
  CHECK(std::isfinite(fit.alpha_star));
  CHECK(fit.alpha_star <= 1.5);
}

TEST_CASE("zero step size leaves the TD error equal to the reward") {
  const TrainSpec spec = small_spec();
  const SyntheticDomain dom = SyntheticDomain::appendix_f();
  CounterRng a(5), b(5);
  const double loss = td_loss(0.0, dom, spec, a);
  (void)sample_prompt(dom, spec.n_context, b);
  double acc = 0.0;
  for (const auto& t : sample_prompt(dom, spec.eval_transitions, b)) acc += t.r * t.r;
  CHECK(loss == doctest::Approx(acc / spec.eval_transitions).epsilon(1e-15));
}

TEST_CASE("zero rewards give zero loss") {
  SyntheticDomain dom = SyntheticDomain::appendix_f();
  dom.reward_scale = 0.0;
  CHECK(batch_td_loss(1.0, dom, small_spec(), 3, 4) == 0.0);
}

TEST_CASE("raw and corrected losses differ by the closed form") {
  TrainSpec spec = small_spec();
  spec.eval_transitions = 6;
  const SyntheticDomain dom = SyntheticDomain::appendix_f();
  const double alpha = 1.0;
  CounterRng a(12), b(12);
  const double raw_loss = td_loss(alpha, dom, spec, a);

  // Same draws, pad-corrected values from the oracle.
  const auto context = sample_prompt(dom, spec.n_context, b);
  const auto held_out = sample_prompt(dom, spec.eval_transitions, b);
  const auto cfg = oracle::TdConfig::uniform(dom.gamma, alpha, spec.n_context, spec.layers, dom.kernel());
  double sum = 0.0, sum_sq = 0.0, pad_value = 0.0;
  for (const auto& t : held_out) {
    const auto at_s = oracle::evaluate_value(context, t.s, cfg);
    const auto at_next = oracle::evaluate_value(context, t.s_next, cfg);
    const double td = t.r + dom.gamma * at_next.corrected - at_s.corrected;
    sum += td;
    sum_sq += td * td;
    pad_value = at_s.pad_value;
  }
  const double m = static_cast<double>(held_out.size());
  const double corrected_loss = sum_sq / m;
  const double k = -dom.gamma * pad_value;  // raw = corrected + k
  const double shift = (dom.gamma - 1.0) * k;
  CHECK(std::abs((raw_loss - corrected_loss) - (shift * 2.0 * sum / m + shift * shift)) <= 1e-9);
}

TEST_CASE("divergence is reported as infinity") {
  TrainSpec spec = small_spec();
  spec.layers = 30;
  const double loss = batch_td_loss(1e6, SyntheticDomain::appendix_f(), spec, 0, 2);
  CHECK(std::isinf(loss));
}

TEST_CASE("training is deterministic") {
  TrainSpec spec = small_spec();
  spec.optimizer = Optimizer::Adam;
  const FitResult a = fit_alpha(spec);
  const FitResult b = fit_alpha(spec);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].alpha == b.curve[i].alpha);
    CHECK(a.curve[i].mean_sq_td_error == b.curve[i].mean_sq_td_error);
  }
  CHECK(a.alpha_star == b.alpha_star);
}

TEST_CASE("pearson and centered rmse") {
  CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(std::isnan(pearson({1, 1, 1}, {1, 2, 3})));
  CHECK(centered_rmse({1, 2, 3}, {11, 12, 13}) == doctest::Approx(0.0));
  CHECK(centered_rmse({0, 2}, {0, 0}) == doctest::Approx(1.0));
}

TEST_CASE("grid loss has an interior minimum on appendixF") {
  TrainSpec spec;
  spec.optimizer = Optimizer::GridSearch;
  const FitResult fit = fit_alpha(spec);
  const auto grid = spec.grid.values();
  CHECK(fit.alpha_star > grid.front());
  CHECK(fit.alpha_star < grid.back());
  CHECK_FALSE(fit.diverged);
  // past the minimum the loss blows up
  CHECK(fit.curve.back().mean_sq_td_error > fit.curve.front().mean_sq_td_error);
}

TEST_CASE("grid search and gradient fit land in the same cell") {
  TrainSpec spec;
  spec.optimizer = Optimizer::Adam;
  spec.learning_rate = 0.1;
  spec.steps = 500;
  spec.alpha_init = 1.0;
  spec.checkpoint_every = 500;
  const double gd = fit_alpha(spec).alpha_star;
  spec.optimizer = Optimizer::GridSearch;
  const double grid = fit_alpha(spec).alpha_star;
  const double cell = std::log(spec.grid.hi / spec.grid.lo) / (spec.grid.points - 1);
  CHECK(std::abs(std::log(gd / grid)) <= cell);
}

TEST_CASE("tiny surface") {
  const SurfaceResult s = surface_eval(SyntheticDomain::appendix_f(), 1.0, 8, 5, 2, 0,
                                       KernelSpec::exponential(1.0));
  REQUIRE(s.predicted.size() == 4);
  for (double v : s.predicted) CHECK(std::isfinite(v));
  CHECK(s.xs == std::vector<double>{-1.0, 1.0});
  CHECK_THROWS(surface_eval(SyntheticDomain::appendix_f(), 1.0, 8, 5, 1, 0, KernelSpec::linear()));
}

TEST_CASE("zero-reward surface has undefined correlation") {
  SyntheticDomain dom = SyntheticDomain::appendix_f();
  dom.reward_scale = 0.0;
  const SurfaceResult s = surface_eval(dom, 1.0, 8, 5, 5, 0, KernelSpec::exponential(1.0));
  CHECK_FALSE(s.pearson_defined);
  CHECK(s.centered_rmse == 0.0);
}

TEST_CASE("linear kernel fits a linear value") {
  SyntheticDomain dom = SyntheticDomain::appendix_f();
  dom.value_model = ValueModel::Linear;
  TrainSpec spec;
  spec.optimizer = Optimizer::GridSearch;
  spec.kernel = KernelSpec::linear();
  spec.train_domains = {dom};
  spec.eval_prompts = 8;
  const double alpha = fit_alpha(spec).alpha_star;
  const SurfaceResult s = surface_eval(dom, alpha, 32, 30, 21, 0, KernelSpec::linear());
  CHECK(s.pearson >= 0.99);
}

TEST_CASE("zero step size predicts zero for both kernels") {
  for (const auto& k : {KernelSpec::exponential(1.0), KernelSpec::linear()}) {
    const SurfaceResult s = surface_eval(SyntheticDomain::appendix_f(), 0.0, 8, 5, 3, 0, k);
    for (double v : s.predicted) CHECK(v == 0.0);
  }
}

TEST_CASE("single-value ablation is the surface") {
  AblationConfig cfg;
  cfg.values = {32};
  cfg.grid_size = 5;
  const auto rows = ablation_sweep(SyntheticDomain::appendix_f(), cfg, 4);
  const SurfaceResult s = surface_eval(SyntheticDomain::appendix_f(), 1.0, 32, 32, 5, 4, cfg.kernel);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].pearson == s.pearson);
  CHECK(rows[0].centered_rmse == s.centered_rmse);
}

TEST_CASE("ablation helpers") {
  CHECK(count_increases({5, 4, 4, 3, 6}) == 1);
  CHECK(count_increases({1, 2, 3}) == 2);
  AblationConfig cfg;
  cfg.values = {2, 8};
  cfg.fixed_other = 8;
  cfg.grid_size = 5;
  const auto rows = ablation_median(SyntheticDomain::appendix_f(), cfg, {1, 2, 3});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].axis_value == 2);
  CHECK(ablation_axis_from_string("layers") == AblationAxis::Layers);
  CHECK_THROWS(ablation_axis_from_string("width"));
}

TEST_CASE("transfer diagonal improves") {
  TrainSpec spec = small_spec();
  spec.optimizer = Optimizer::Adam;
  spec.learning_rate = 0.05;
  spec.steps = 20;
  spec.n_context = 16;
  spec.layers = 10;
  SyntheticDomain a = SyntheticDomain::appendix_f();
  a.name = "a";
  SyntheticDomain b = a;
  b.name = "b";
  b.delta = 0.2;
  const TransferResult t = transfer_matrix({a}, {a, b}, spec);
  REQUIRE(t.cells.size() == 1);
  REQUIRE(t.cells[0].size() == 2);
  const auto& diag = t.cells[0][0];
  CHECK(diag.back().mean_sq_td_error <= diag.front().mean_sq_td_error);
  CHECK(diag.front().step == 0);
  CHECK(diag.back().step == 20);
}

TEST_CASE("spec validation") {
  TrainSpec spec = small_spec();
  spec.train_domains.clear();
  CHECK_THROWS(spec.validate());
  spec = small_spec();
  SyntheticDomain dup = SyntheticDomain::appendix_f();
  spec.train_domains = {dup, dup};
  CHECK_THROWS(spec.validate());
  CHECK(optimizer_from_string("adam") == Optimizer::Adam);
  CHECK_THROWS(optimizer_from_string("sgd"));
}
