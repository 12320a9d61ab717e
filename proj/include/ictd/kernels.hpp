#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace ictd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class KernelFamily { Exponential, Linear, SoftmaxNormalized };

std::string_view to_string(KernelFamily family);
KernelFamily kernel_family_from_string(std::string_view name);

/// Kernel induced by the attention activation.
///
///   Exponential        k(x, y) = exp(x.y / temperature)
///   Linear             k(x, y) = x.y
///   SoftmaxNormalized  exponential entries, each affinity column divided by
///                      its sum over the keys. Not symmetric; exploration only.
struct KernelSpec {
  KernelFamily family = KernelFamily::Exponential;
  double temperature = 1.0;

  static KernelSpec exponential(double temperature);
  static KernelSpec linear();
  static KernelSpec softmax(double temperature);

  /// Throws std::invalid_argument when the temperature is unusable.
  void validate() const;

  bool operator==(const KernelSpec&) const = default;
};

/// Raised when exp(x.y / temperature) would not fit in a double.
class KernelOverflowError : public std::overflow_error {
 public:
  KernelOverflowError(double inner_product, double temperature);

  double inner_product() const { return inner_product_; }
  double temperature() const { return temperature_; }

 private:
  double inner_product_;
  double temperature_;
};

/// Scalar kernel value. For SoftmaxNormalized this is the unnormalized
/// exponential entry; normalization only exists at the matrix level.
double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y);

/// Maps an inner product to a kernel value (the activation itself).
double kernel_from_inner_product(const KernelSpec& spec, double inner_product);

/// Entry (j, i) is k(keys[:, j], queries[:, i]). Keys and queries are stored
/// column-wise and must share the row dimension. Throws on an empty key set.
Matrix affinity_matrix(const KernelSpec& spec, const Eigen::Ref<const Matrix>& keys,
                       const Eigen::Ref<const Matrix>& queries);

}  // namespace ictd
