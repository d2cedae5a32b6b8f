#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "ftkoop/errors.hpp"
#include "ftkoop/observables.hpp"

namespace ftkoop {

struct GpHyper {
  double sigma0_sq = 1.0;
  double length_scale = 1.0;
  double noise_sq = 1e-4;

  /// sigma0^2 = 1, length sqrt(N)/2, noise 1e-4 for N-bit masks.
  static GpHyper defaults_for(int n_bits) { return {1.0, std::sqrt(static_cast<double>(n_bits)) / 2.0, 1e-4}; }

  void validate() const {
    if (!(sigma0_sq > 0)) throw InputError("gp: sigma0_sq must be positive");
    if (!(length_scale > 0)) throw InputError("gp: length_scale must be positive");
    if (!(noise_sq >= 0)) throw InputError("gp: noise_sq must be non-negative");
  }
};

inline constexpr double kGpJitter = 1e-10;

template <typename DA, typename DB>
typename DA::Scalar se_kernel(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b, const GpHyper& hyper) {
  using Scalar = typename DA::Scalar;
  if (a.size() != b.size()) throw InputError("gp: kernel arguments differ in length");
  const Scalar d2 = (a - b).squaredNorm();
  return Scalar(hyper.sigma0_sq) * std::exp(-d2 / (Scalar(2) * Scalar(hyper.length_scale * hyper.length_scale)));
}

struct GpPrediction {
  double mean;
  double variance;
};

/// Exact GP regression with a fixed SE kernel. Immutable once fitted.
class GpModel {
 public:
  /// Factorizes K + (noise + jitter) I. Throws ConditioningError when the
  /// factorization fails.
  GpModel(std::vector<Eigen::VectorXd> x, Eigen::VectorXd y, GpHyper hyper);

  GpPrediction posterior(const Eigen::VectorXd& q) const;

  const std::vector<Eigen::VectorXd>& inputs() const { return x_; }
  const Eigen::VectorXd& targets() const { return y_; }
  const GpHyper& hyper() const { return hyper_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }

 private:
  std::vector<Eigen::VectorXd> x_;
  Eigen::VectorXd y_;
  GpHyper hyper_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
};

inline GpModel fit(std::vector<Eigen::VectorXd> x, Eigen::VectorXd y, const GpHyper& hyper) {
  return GpModel(std::move(x), std::move(y), hyper);
}

}  // namespace ftkoop
