#include "ftkoop/gp.hpp"

#include <algorithm>

namespace ftkoop {

GpModel::GpModel(std::vector<Eigen::VectorXd> x, Eigen::VectorXd y, GpHyper hyper)
    : x_(std::move(x)), y_(std::move(y)), hyper_(hyper) {
  hyper_.validate();
  const auto n = static_cast<Eigen::Index>(x_.size());
  if (n < 1 || y_.size() != n) throw InputError("gp: need matching, non-empty inputs and targets");
  for (const auto& xi : x_) {
    if (xi.size() != x_.front().size()) throw InputError("gp: inputs differ in length");
    if (!xi.allFinite()) throw InputError("gp: inputs must be finite");
  }
  if (!y_.allFinite()) throw InputError("gp: targets must be finite");

  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = se_kernel(x_[i], x_[j], hyper_);
  }
  k.diagonal().array() += hyper_.noise_sq + kGpJitter;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw ConditioningError("gp: kernel matrix is not positive definite");
  chol_ = llt.matrixL();
  alpha_ = llt.solve(y_);
}

GpPrediction GpModel::posterior(const Eigen::VectorXd& q) const {
  const auto n = static_cast<Eigen::Index>(x_.size());
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) k(i) = se_kernel(q, x_[i], hyper_);
  const double mean = k.dot(alpha_);
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
  const double reduction = v.squaredNorm();
  const double latent = std::max(0.0, hyper_.sigma0_sq - reduction);
  return {mean, latent + hyper_.noise_sq};
}

}  // namespace ftkoop
