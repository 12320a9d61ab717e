#include "ictd/kernels.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ictd {

namespace {

const double kMaxExponent = std::log(std::numeric_limits<double>::max());

std::string overflow_message(double inner_product, double temperature) {
  std::ostringstream os;
  os.precision(17);
  os << "kernel overflow: inner product " << inner_product << " / temperature " << temperature
     << " exceeds ln(DBL_MAX) = " << kMaxExponent;
  return os.str();
}

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Exponential:
      return "exponential";
    case KernelFamily::Linear:
      return "linear";
    case KernelFamily::SoftmaxNormalized:
      return "softmax";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(std::string_view name) {
  if (name == "exponential") return KernelFamily::Exponential;
  if (name == "linear") return KernelFamily::Linear;
  if (name == "softmax") return KernelFamily::SoftmaxNormalized;
  throw std::invalid_argument("unknown kernel family '" + std::string(name) +
                              "' (expected exponential, linear or softmax)");
}

KernelSpec KernelSpec::exponential(double temperature) {
  KernelSpec spec{KernelFamily::Exponential, temperature};
  spec.validate();
  return spec;
}

KernelSpec KernelSpec::linear() { return KernelSpec{KernelFamily::Linear, 1.0}; }

KernelSpec KernelSpec::softmax(double temperature) {
  KernelSpec spec{KernelFamily::SoftmaxNormalized, temperature};
  spec.validate();
  return spec;
}

void KernelSpec::validate() const {
  if (family == KernelFamily::Linear) return;
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("kernel temperature must be finite and > 0");
  }
}

KernelOverflowError::KernelOverflowError(double inner_product, double temperature)
    : std::overflow_error(overflow_message(inner_product, temperature)),
      inner_product_(inner_product),
      temperature_(temperature) {}

double kernel_from_inner_product(const KernelSpec& spec, double inner_product) {
  if (spec.family == KernelFamily::Linear) return inner_product;
  const double exponent = inner_product / spec.temperature;
  if (exponent > kMaxExponent) throw KernelOverflowError(inner_product, spec.temperature);
  return std::exp(exponent);
}

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("kernel_eval: dimension mismatch");
  if (x.size() == 0) throw std::invalid_argument("kernel_eval: empty vectors");
  double dot = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) dot += x[k] * y[k];
  return kernel_from_inner_product(spec, dot);
}

Matrix affinity_matrix(const KernelSpec& spec, const Eigen::Ref<const Matrix>& keys,
                       const Eigen::Ref<const Matrix>& queries) {
  if (keys.rows() != queries.rows()) {
    throw std::invalid_argument("affinity_matrix: keys and queries differ in row dimension");
  }
  if (keys.cols() == 0) throw std::invalid_argument("affinity_matrix: empty key set");

  Matrix out(keys.cols(), queries.cols());
  for (Eigen::Index i = 0; i < queries.cols(); ++i) {
    for (Eigen::Index j = 0; j < keys.cols(); ++j) {
      out(j, i) = kernel_eval(spec, keys.col(j), queries.col(i));
    }
  }
  if (spec.family == KernelFamily::SoftmaxNormalized) {
    for (Eigen::Index i = 0; i < out.cols(); ++i) out.col(i) /= out.col(i).sum();
  }
  return out;
}

}  // namespace ictd
