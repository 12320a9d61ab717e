#pragma once

#include "ictd/kernels.hpp"
#include "ictd/rng.hpp"

#include <string>
#include <vector>

namespace ictd {

/// One observed transition (s, r, s').
struct Transition {
  Vector s;
  double r = 0.0;
  Vector s_next;
};

enum class ValueModel { KernelMixture, Linear };

/// Synthetic MRP on R^2 with linear-Gaussian dynamics
///
///   s' = rho * s + eps,   eps ~ N(0, sigma^2 I)
///
/// whose value function is a uniform mixture of exponential kernels centred
/// on m points of the unit circle:
///
///   V*(s) = scale / m * sum_j exp(c_j . s / delta)
///
/// The reward is derived from V* so that the Bellman equation holds exactly:
///
///   R(s) = scale / m * sum_j [ k(c_j, s) - gamma * eta * k(rho c_j, s) ]
///   eta  = exp(sigma^2 / (2 delta^2))
///
/// reward_scale is an extension used by the transfer experiments; it
/// multiplies both R and V*.
///
/// value_model = Linear replaces the mixture by V*(s) = scale * w.s with
/// R(s) = scale * (1 - gamma rho) w.s, Bellman-consistent under the same
/// dynamics. It exists to sanity-check the linear-kernel baseline.
struct SyntheticDomain {
  std::string name = "appendixF";
  double rho = 0.5;
  double sigma = 0.2;
  double delta = 1.0;
  int m = 8;
  double gamma = 0.9;
  double reward_scale = 1.0;
  ValueModel value_model = ValueModel::KernelMixture;
  double linear_w0 = 1.0;
  double linear_w1 = 0.5;

  static constexpr int kStateDim = 2;

  /// rho = 0.5, sigma = 0.2, delta = 1, m = 8, gamma = 0.9.
  static SyntheticDomain appendix_f();

  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;

  double eta() const;
  /// Centroid j: (cos(2 pi j / m), sin(2 pi j / m)).
  Vector centroid(int j) const;
  KernelSpec kernel() const { return KernelSpec{KernelFamily::Exponential, delta}; }

  bool operator==(const SyntheticDomain&) const = default;
};

double true_value(const SyntheticDomain& dom, const Vector& s);
double reward(const SyntheticDomain& dom, const Vector& s);

/// rho * s + N(0, sigma^2 I). Next states are not clipped to [-1, 1]^2.
Vector step(const SyntheticDomain& dom, const Vector& s, CounterRng& rng);

/// n i.i.d. context transitions with s uniform on [-1, 1]^2.
std::vector<Transition> sample_prompt(const SyntheticDomain& dom, int n, CounterRng& rng);

struct StationaryMoments {
  Vector mean;
  double variance = 0.0;  // per coordinate
};

StationaryMoments stationary_moments(const SyntheticDomain& dom);

struct BellmanCheck {
  double analytic = 0.0;
  double monte_carlo = 0.0;
  double std_err = 0.0;
};

/// analytic: R(s) + gamma * E[V*(s')] - V*(s) with the expectation in closed
/// form. monte_carlo: the same with the expectation replaced by a sample mean
/// over n_mc draws of s'. Requires n_mc >= 1000.
BellmanCheck bellman_residual_check(const SyntheticDomain& dom, const Vector& s, int n_mc,
                                    CounterRng& rng);

}  // namespace ictd
