#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "ftkoop/errors.hpp"
#include "ftkoop/filters.hpp"

namespace ftkoop {

template <typename Scalar>
struct MemorySample {
  VectorX<Scalar> h_bar;
  VectorX<Scalar> y;  // xi_bar - a l_bar - exp(-a t) xi0_bar at the recording time
  Scalar t{0};
};

enum class ReplacementPolicy { kNone, kGreedy };

struct RankCertificate {
  bool satisfied = false;
  double m_theta = 0.0;
};

/// Smallest eigenvalue of a symmetric matrix, clamped at zero.
template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& sym) {
  using Scalar = typename Derived::Scalar;
  if (sym.size() == 0) return Scalar(0);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(sym, Eigen::EigenvaluesOnly);
  return std::max(Scalar(0), es.eigenvalues()(0));
}

/// Experience-replay memory. Maintains G = sum_j h_j h_j^T and
/// C = sum_j y_j h_j^T so residual sums cost O(n (n+m)^2) regardless of p.
template <typename Scalar>
class HistoryStack {
 public:
  HistoryStack(int regressor_dim, int target_dim, int capacity, double rank_tol = 1e-6,
               ReplacementPolicy policy = ReplacementPolicy::kNone)
      : capacity_(capacity),
        rank_tol_(rank_tol),
        policy_(policy),
        gram_(MatrixX<Scalar>::Zero(regressor_dim, regressor_dim)),
        cross_(MatrixX<Scalar>::Zero(target_dim, regressor_dim)) {
    if (capacity < 1) throw InputError("stack: capacity must be at least 1");
    if (regressor_dim < 1 || target_dim < 1) throw InputError("stack: dimensions must be positive");
  }

  /// Appends the snapshot. When full, the greedy policy swaps out the sample
  /// whose replacement maximizes lambda_min(G); otherwise StackFullError.
  /// Returns true if the stack contents changed.
  bool record(const NormalizedSnapshot<Scalar>& snap) {
    return record(MemorySample<Scalar>{snap.h_bar, snap.target(), snap.t});
  }

  bool record(const MemorySample<Scalar>& sample) {
    if (sample.h_bar.size() != gram_.rows() || sample.y.size() != cross_.rows()) {
      throw InputError("stack: sample dimensions do not match");
    }
    if (!full()) {
      samples_.push_back(sample);
      gram_.noalias() += sample.h_bar * sample.h_bar.transpose();
      cross_.noalias() += sample.y * sample.h_bar.transpose();
      y_sq_ += sample.y.squaredNorm();
      m_theta_ = min_eigenvalue(gram_);
      return true;
    }
    if (policy_ == ReplacementPolicy::kNone) {
      throw StackFullError("stack: capacity " + std::to_string(capacity_) + " reached");
    }
    Scalar best = m_theta_;
    int best_index = -1;
    for (std::size_t j = 0; j < samples_.size(); ++j) {
      const MatrixX<Scalar> trial = gram_ - samples_[j].h_bar * samples_[j].h_bar.transpose() +
                                    sample.h_bar * sample.h_bar.transpose();
      const Scalar lmin = min_eigenvalue(trial);
      if (lmin > best) {
        best = lmin;
        best_index = static_cast<int>(j);
      }
    }
    if (best_index < 0) return false;
    samples_[static_cast<std::size_t>(best_index)] = sample;
    rebuild();
    return true;
  }

  RankCertificate rank_condition() const {
    return {static_cast<double>(m_theta_) > rank_tol_, static_cast<double>(m_theta_)};
  }

  /// Recomputes G, C and the certificate from the stored samples.
  void rebuild() {
    gram_.setZero();
    cross_.setZero();
    y_sq_ = Scalar(0);
    for (const auto& s : samples_) {
      gram_.noalias() += s.h_bar * s.h_bar.transpose();
      cross_.noalias() += s.y * s.h_bar.transpose();
      y_sq_ += s.y.squaredNorm();
    }
    m_theta_ = min_eigenvalue(gram_);
  }

  const std::vector<MemorySample<Scalar>>& samples() const { return samples_; }
  const MatrixX<Scalar>& gram() const { return gram_; }
  /// sum_j y_j h_j^T, shape n_xi x (n_xi + m).
  const MatrixX<Scalar>& cross() const { return cross_; }
  Scalar target_sq_sum() const { return y_sq_; }
  Scalar m_theta() const { return m_theta_; }
  int size() const { return static_cast<int>(samples_.size()); }
  int capacity() const { return capacity_; }
  bool full() const { return size() >= capacity_; }
  bool empty() const { return samples_.empty(); }
  double rank_tol() const { return rank_tol_; }
  ReplacementPolicy policy() const { return policy_; }
  int regressor_dim() const { return static_cast<int>(gram_.rows()); }
  int target_dim() const { return static_cast<int>(cross_.rows()); }

 private:
  int capacity_;
  double rank_tol_;
  ReplacementPolicy policy_;
  std::vector<MemorySample<Scalar>> samples_;
  MatrixX<Scalar> gram_;
  MatrixX<Scalar> cross_;
  Scalar y_sq_{0};
  Scalar m_theta_{0};
};

using HistoryStackd = HistoryStack<double>;

nlohmann::json stack_to_json(const HistoryStackd& stack);
HistoryStackd stack_from_json(const nlohmann::json& j);

}  // namespace ftkoop
