#include "ictd/mrp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ictd {

namespace {

void require_state(const Vector& s) {
  if (s.size() != SyntheticDomain::kStateDim) {
    throw std::invalid_argument("synthetic domain states are 2-dimensional");
  }
  if (!s.allFinite()) throw std::invalid_argument("state has non-finite components");
}

double linear_part(const SyntheticDomain& dom, const Vector& s) {
  return dom.linear_w0 * s[0] + dom.linear_w1 * s[1];
}

}  // namespace

SyntheticDomain SyntheticDomain::appendix_f() { return SyntheticDomain{}; }

void SyntheticDomain::validate() const {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be >= 0");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be > 0");
  if (m < 1) throw std::invalid_argument("centroid count m must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (!std::isfinite(reward_scale)) throw std::invalid_argument("reward_scale must be finite");
}

double SyntheticDomain::eta() const { return std::exp(sigma * sigma / (2.0 * delta * delta)); }

Vector SyntheticDomain::centroid(int j) const {
  const double angle = 2.0 * std::numbers::pi * j / m;
  Vector c(2);
  c << std::cos(angle), std::sin(angle);
  return c;
}

double true_value(const SyntheticDomain& dom, const Vector& s) {
  require_state(s);
  if (dom.value_model == ValueModel::Linear) return dom.reward_scale * linear_part(dom, s);
  const KernelSpec k = dom.kernel();
  double sum = 0.0;
  for (int j = 0; j < dom.m; ++j) sum += kernel_eval(k, dom.centroid(j), s);
  return dom.reward_scale * sum / dom.m;
}

double reward(const SyntheticDomain& dom, const Vector& s) {
  require_state(s);
  if (dom.value_model == ValueModel::Linear) {
    return dom.reward_scale * (1.0 - dom.gamma * dom.rho) * linear_part(dom, s);
  }
  const KernelSpec k = dom.kernel();
  const double eta = dom.eta();
  double sum = 0.0;
  for (int j = 0; j < dom.m; ++j) {
    const Vector c = dom.centroid(j);
    sum += kernel_eval(k, c, s) - dom.gamma * eta * kernel_eval(k, dom.rho * c, s);
  }
  return dom.reward_scale * sum / dom.m;
}

Vector step(const SyntheticDomain& dom, const Vector& s, CounterRng& rng) {
  require_state(s);
  Vector next = dom.rho * s;
  // Always consume two normals so the stream does not depend on sigma.
  const double e0 = rng.normal();
  const double e1 = rng.normal();
  next[0] += dom.sigma * e0;
  next[1] += dom.sigma * e1;
  return next;
}

std::vector<Transition> sample_prompt(const SyntheticDomain& dom, int n, CounterRng& rng) {
  if (n < 1) throw std::invalid_argument("sample_prompt: n must be >= 1");
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vector s(2);
    s[0] = rng.uniform(-1.0, 1.0);
    s[1] = rng.uniform(-1.0, 1.0);
    Vector next = step(dom, s, rng);
    const double r = reward(dom, s);
    out.push_back(Transition{std::move(s), r, std::move(next)});
  }
  return out;
}

StationaryMoments stationary_moments(const SyntheticDomain& dom) {
  if (!(dom.rho < 1.0)) throw std::invalid_argument("stationary distribution requires rho < 1");
  return StationaryMoments{Vector::Zero(2), dom.sigma * dom.sigma / (1.0 - dom.rho * dom.rho)};
}

BellmanCheck bellman_residual_check(const SyntheticDomain& dom, const Vector& s, int n_mc,
                                    CounterRng& rng) {
  if (n_mc < 1000) throw std::invalid_argument("bellman_residual_check: n_mc must be >= 1000");
  const double v = true_value(dom, s);
  const double r = reward(dom, s);

  double expected_next = 0.0;
  if (dom.value_model == ValueModel::Linear) {
    expected_next = dom.reward_scale * dom.rho * linear_part(dom, s);
  } else {
    const KernelSpec k = dom.kernel();
    for (int j = 0; j < dom.m; ++j) expected_next += kernel_eval(k, dom.rho * dom.centroid(j), s);
    expected_next *= dom.reward_scale * dom.eta() / dom.m;
  }

  BellmanCheck out;
  out.analytic = r + dom.gamma * expected_next - v;

  // Welford running mean/variance of V*(s').
  double mean = 0.0;
  double m2 = 0.0;
  for (int t = 0; t < n_mc; ++t) {
    const double x = true_value(dom, step(dom, s, rng));
    const double d = x - mean;
    mean += d / (t + 1);
    m2 += d * (x - mean);
  }
  const double var = n_mc > 1 ? m2 / (n_mc - 1) : 0.0;
  out.monte_carlo = r + dom.gamma * mean - v;
  out.std_err = dom.gamma * std::sqrt(var / n_mc);
  return out;
}

}  // namespace ictd
