#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace catemnar {

/// Standard normal density kernel (unnormalized constant dropped).
inline double gaussian_kernel(double u) { return std::exp(-0.5 * u * u); }

/// Product Gaussian kernel weights K((z_i - q) / h) over the columns of Z.
/// Columns with h <= 0 are matched exactly instead of smoothed.
Eigen::VectorXd product_kernel_weights(const Eigen::MatrixXd& Z, const Eigen::VectorXd& q,
                                       const Eigen::VectorXd& h);

/// Nadaraya-Watson estimate of each column of V at q; returns NaN entries
/// when the kernel mass is zero.
Eigen::VectorXd nadaraya_watson(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& V,
                                const Eigen::VectorXd& q, const Eigen::VectorXd& h);

struct LocalFit {
  double value = 0.0;
  double kernel_mass = 0.0;
  /// Fell back to a local-constant fit because the local design was singular.
  bool local_constant = false;
};

/// Weighted local-linear regression of y on the smoothed columns of Z at q,
/// with observation weights w multiplying the kernel weights.
LocalFit local_linear(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& q, const Eigen::VectorXd& h);

}  // namespace catemnar
