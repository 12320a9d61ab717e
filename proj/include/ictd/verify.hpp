#pragma once

#include "ictd/kernels.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ictd::verify {

/// One randomized transformer-vs-oracle instance.
struct EquivalenceCase {
  int index = 0;
  int state_dim = 0;
  int context_length = 0;
  int layers = 0;
  double gamma = 0.0;
  KernelSpec kernel;
  double max_dev_literal = 0.0;     // literal forward vs oracle, worst layer
  double max_dev_structured = 0.0;  // structured forward vs oracle, final layer
  double max_dev_unit = 0.0;        // unit-V parameterization vs baked-in alpha
  std::vector<double> per_layer;    // literal deviation after each layer
};

struct EquivalenceSweep {
  int instances = 200;
  int state_dim = 2;
  std::vector<int> context_lengths{1, 2, 8, 16};
  std::vector<int> layer_counts{1, 3, 10};
  std::vector<double> gammas{0.0, 0.5, 0.9};
  std::vector<KernelSpec> kernels{KernelSpec::exponential(1.0), KernelSpec::exponential(10.0),
                                  KernelSpec::linear()};
};

/// Instance i cycles through the (n, L, gamma, kernel) grid, so the grid is
/// covered once instances >= its size; states, rewards, pad and step sizes are
/// drawn from hash64(seed, "verify", i).
std::vector<EquivalenceCase> equivalence_suite(const EquivalenceSweep& sweep, std::uint64_t seed);

struct DualFormCase {
  int state_dim = 0;
  int context_length = 0;
  int layers = 0;
  double max_dev = 0.0;  // value-form residuals vs residual recursion
};

std::vector<DualFormCase> dual_form_suite(const std::vector<int>& state_dims,
                                          const std::vector<int>& context_lengths,
                                          const std::vector<int>& layer_counts, int repeats,
                                          std::uint64_t seed);

struct HeadCheck {
  double max_dev_head1 = 0.0;  // last row vs closed form
  double max_dev_head2 = 0.0;
  double max_abs_off_row = 0.0;  // largest entry outside the last row
};

HeadCheck head_closed_form_check(int prompts, std::uint64_t seed);

struct OffsetCheck {
  double variation = 0.0;         // max - min of (raw - oracle value)
  double max_dev_from_pad = 0.0;  // max |raw - oracle + gamma v_L(pad)|
  double pad_offset = 0.0;        // -gamma v_L(pad)
};

OffsetCheck offset_check(int queries, std::uint64_t seed);

}  // namespace ictd::verify
