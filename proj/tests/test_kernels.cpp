#include "ictd/kernels.hpp"
#include "ictd/rng.hpp"

#include <doctest.h>

#include <cfloat>
#include <cmath>

using namespace ictd;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Vector random_vector(int d, CounterRng& rng) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("kernel values") {
  const auto e1 = KernelSpec::exponential(1.0);
  CHECK(kernel_eval(e1, vec({0, 0}), vec({1, 2})) == 1.0);
  CHECK(kernel_eval(e1, vec({1, 0}), vec({1, 0})) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  CHECK(kernel_eval(KernelSpec::linear(), vec({1, 2}), vec({3, 4})) == 11.0);
  CHECK(kernel_eval(KernelSpec::exponential(10.0), vec({1, 0}), vec({1, 0})) ==
        doctest::Approx(std::exp(0.1)).epsilon(1e-15));
}

TEST_CASE("symmetry and positivity") {
  CounterRng rng(3);
  for (int t = 0; t < 100; ++t) {
    const Vector x = random_vector(3, rng);
    const Vector y = random_vector(3, rng);
    for (const auto& k : {KernelSpec::exponential(1.0), KernelSpec::exponential(0.3),
                          KernelSpec::linear()}) {
      CHECK(kernel_eval(k, x, y) == kernel_eval(k, y, x));
    }
    CHECK(kernel_eval(KernelSpec::exponential(0.5), x, y) > 0.0);
  }
}

TEST_CASE("invalid inputs") {
  CHECK_THROWS_AS(kernel_eval(KernelSpec::linear(), vec({1, 2}), vec({1})), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec::exponential(0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(kernel_family_from_string("gaussian"), std::invalid_argument);
  CHECK(kernel_family_from_string("softmax") == KernelFamily::SoftmaxNormalized);
}

TEST_CASE("overflow raises instead of returning infinity") {
  const auto k = KernelSpec::exponential(1.0);
  const double big = std::log(DBL_MAX) + 1.0;
  try {
    (void)kernel_eval(k, vec({big}), vec({1.0}));
    FAIL("expected KernelOverflowError");
  } catch (const KernelOverflowError& e) {
    CHECK(e.inner_product() == big);
    CHECK(e.temperature() == 1.0);
  }
  // Just under the limit is finite.
  CHECK(std::isfinite(kernel_eval(k, vec({std::log(DBL_MAX) - 1.0}), vec({1.0}))));
}

TEST_CASE("affinity matrix matches scalar loop") {
  CounterRng rng(11);
  Matrix keys(3, 5), queries(3, 4);
  for (int j = 0; j < 5; ++j) keys.col(j) = random_vector(3, rng);
  for (int i = 0; i < 4; ++i) queries.col(i) = random_vector(3, rng);
  for (const auto& k : {KernelSpec::exponential(1.0), KernelSpec::linear()}) {
    const Matrix a = affinity_matrix(k, keys, queries);
    REQUIRE(a.rows() == 5);
    REQUIRE(a.cols() == 4);
    for (int j = 0; j < 5; ++j) {
      for (int i = 0; i < 4; ++i) CHECK(a(j, i) == kernel_eval(k, keys.col(j), queries.col(i)));
    }
  }
}

TEST_CASE("softmax columns sum to one") {
  CounterRng rng(5);
  Matrix keys(2, 6), queries(2, 3);
  for (int j = 0; j < 6; ++j) keys.col(j) = random_vector(2, rng);
  for (int i = 0; i < 3; ++i) queries.col(i) = random_vector(2, rng);
  const Matrix a = affinity_matrix(KernelSpec::softmax(1.0), keys, queries);
  for (int i = 0; i < 3; ++i) CHECK(a.col(i).sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(affinity_matrix(KernelSpec::softmax(1.0), Matrix(2, 0), queries),
                  std::invalid_argument);
}
