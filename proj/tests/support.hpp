#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ftkoop/filters.hpp"
#include "ftkoop/identifier.hpp"
#include "ftkoop/memory.hpp"

namespace testing_support {

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
  }
  return m;
}

/// Snapshot whose target is consistent with `sigma_star` (no approximation error).
inline ftkoop::NormalizedSnapshotd consistent_snapshot(std::mt19937_64& rng, const Eigen::MatrixXd& sigma_star,
                                                       double a = 1.0, double t = 0.7) {
  const Eigen::Index n = sigma_star.cols();
  const Eigen::Index d = sigma_star.rows();
  ftkoop::NormalizedSnapshotd s;
  s.h_bar = random_vector(rng, d, 0.3);
  s.l_bar = random_vector(rng, n, 0.3);
  s.xi0_bar = random_vector(rng, n, 0.3);
  s.a = a;
  s.t = t;
  s.decay = std::exp(-a * t);
  s.n_s = 2.0;
  s.xi_bar = sigma_star.transpose() * s.h_bar + a * s.l_bar + s.decay * s.xi0_bar;
  return s;
}

/// A random identification instance: a true Sigma*, a consistent snapshot,
/// a full stack of consistent samples and a perturbed estimate.
struct Instance {
  Eigen::MatrixXd sigma_star;
  ftkoop::NormalizedSnapshotd snap;
  ftkoop::HistoryStackd stack;
  ftkoop::KoopmanEstimated est;
};

inline Instance random_instance(std::uint64_t seed, int n, int m, int p) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd sigma_star = random_matrix(rng, n + m, n);
  auto snap = consistent_snapshot(rng, sigma_star);
  ftkoop::HistoryStackd stack(n + m, n, p);
  for (int j = 0; j < p; ++j) {
    const Eigen::VectorXd h = random_vector(rng, n + m, 0.3);
    stack.record(ftkoop::MemorySample<double>{h, sigma_star.transpose() * h, 0.1 * (j + 1)});
  }
  ftkoop::KoopmanEstimated est(Eigen::MatrixXd(sigma_star + random_matrix(rng, n + m, n, 0.5)));
  return {sigma_star, std::move(snap), std::move(stack), std::move(est)};
}

/// Kronecker product, written out entry by entry.
inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

// Scalar toy: one observable, no input, current and stored regressor 1,
// true parameter 0 and estimate 1.
struct Toy {
  ftkoop::NormalizedSnapshotd snap;
  ftkoop::HistoryStackd stack{1, 1, 1};
  ftkoop::KoopmanEstimated est{Eigen::MatrixXd::Constant(1, 1, 1.0)};

  Toy() {
    snap.h_bar = Eigen::VectorXd::Ones(1);
    snap.l_bar = snap.xi_bar = snap.xi0_bar = Eigen::VectorXd::Zero(1);
    stack.record(ftkoop::MemorySample<double>{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 0.0});
  }
};

// Full-space Kronecker form of g and 2A.
struct FullSpace {
  Eigen::VectorXd g;
  Eigen::MatrixXd two_a;
};

inline FullSpace full_space(const ftkoop::KoopmanEstimated& est, const ftkoop::NormalizedSnapshotd& snap,
                            const ftkoop::HistoryStackd& stack) {
  const int n = est.n_xi();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd vec = est.vec();
  auto hmat = [&](const Eigen::VectorXd& h) { return kron(h, eye); };
  FullSpace out;
  Eigen::MatrixXd H = hmat(snap.h_bar);
  out.g = H * (H.transpose() * vec - snap.target());
  out.two_a = H * H.transpose();
  for (const auto& s : stack.samples()) {
    const Eigen::MatrixXd Hj = hmat(s.h_bar);
    out.g += Hj * (Hj.transpose() * vec - s.y);
    out.two_a += Hj * Hj.transpose();
  }
  return out;
}

inline Eigen::VectorXd full_space_flow(const FullSpace& fs, const ftkoop::FlowConfig& cfg) {
  Eigen::VectorXd agr = fs.g;
  for (int k = 0; k < cfg.r; ++k) agr = fs.two_a * agr;
  const double q = agr.dot(fs.two_a * fs.g);
  return -cfg.alpha * fs.g.norm() * agr / (cfg.delta + q);
}

struct ToyRun {
  double t_cross = -1.0;
  std::vector<ftkoop::GNormSample> traj;
};

// Integrates the frozen scalar toy and records |g| every `dt`.
inline ToyRun run_toy(double alpha, double delta, ftkoop::FlowIntegrator integrator, double horizon = 3.0) {
  const Toy toy;
  ftkoop::FlowConfig cfg;
  cfg.alpha = alpha;
  cfg.delta = delta;
  cfg.integrator = integrator;
  const auto problem = ftkoop::FlowProblem<double>::from(toy.snap, toy.stack);
  Eigen::MatrixXd sigma_t = toy.est.sigma().transpose();
  ToyRun out;
  const double dt = 1e-4;
  for (int k = 0; k * dt <= horizon; ++k) {
    const double t = k * dt;
    out.traj.push_back({t, problem.residual_matrix(sigma_t).norm()});
    if (out.t_cross < 0 && std::abs(sigma_t(0, 0)) < 1e-3) out.t_cross = t;
    ftkoop::advance_flow(sigma_t, problem, cfg, dt);
  }
  return out;
}

}  // namespace testing_support
