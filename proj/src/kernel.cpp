#include "catemnar/kernel.hpp"

#include <limits>

namespace catemnar {

Eigen::VectorXd product_kernel_weights(const Eigen::MatrixXd& Z, const Eigen::VectorXd& q,
                                       const Eigen::VectorXd& h) {
  const Eigen::Index n = Z.rows();
  Eigen::VectorXd k = Eigen::VectorXd::Ones(n);
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (h(j) > 0)
        k(i) *= gaussian_kernel((Z(i, j) - q(j)) / h(j));
      else if (Z(i, j) != q(j))
        k(i) = 0.0;
    }
  }
  return k;
}

Eigen::VectorXd nadaraya_watson(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& V,
                                const Eigen::VectorXd& q, const Eigen::VectorXd& h) {
  const Eigen::VectorXd k = product_kernel_weights(Z, q, h);
  const double s = k.sum();
  if (!(s > 0)) return Eigen::VectorXd::Constant(V.cols(), std::numeric_limits<double>::quiet_NaN());
  return (V.transpose() * k) / s;
}

LocalFit local_linear(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& q, const Eigen::VectorXd& h) {
  const Eigen::VectorXd k = product_kernel_weights(Z, q, h).cwiseProduct(w);
  LocalFit out;
  out.kernel_mass = k.sum();
  if (!(out.kernel_mass > 0)) {
    out.value = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  std::vector<Eigen::Index> smooth;
  for (Eigen::Index j = 0; j < Z.cols(); ++j)
    if (h(j) > 0) smooth.push_back(j);
  const double constant = k.dot(y) / out.kernel_mass;
  if (smooth.empty()) {
    out.value = constant;
    return out;
  }
  const Eigen::Index n = Z.rows(), d = static_cast<Eigen::Index>(smooth.size()) + 1;
  Eigen::MatrixXd X(n, d);
  X.col(0).setOnes();
  for (Eigen::Index c = 0; c < d - 1; ++c)
    X.col(c + 1) = (Z.col(smooth[c]).array() - q(smooth[c])) / h(smooth[c]);
  const Eigen::MatrixXd XtW = X.transpose() * k.asDiagonal();
  const Eigen::MatrixXd A = XtW * X;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  // Effective local sample too thin for a slope: keep the local mean.
  const double rcond = ldlt.rcond();
  if (ldlt.info() != Eigen::Success || !(rcond > 1e-10)) {
    out.value = constant;
    out.local_constant = true;
    return out;
  }
  out.value = ldlt.solve(XtW * y)(0);
  return out;
}

}  // namespace catemnar
