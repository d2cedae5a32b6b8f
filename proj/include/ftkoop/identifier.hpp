#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ftkoop/errors.hpp"
#include "ftkoop/filters.hpp"
#include "ftkoop/memory.hpp"

namespace ftkoop {

/// Stacked estimate Sigma_hat of shape (n_xi + m) x n_xi, so that
/// Sigma_hat^T = [A_hat, B_hat]. The vectorization is the column stack of
/// Sigma_hat^T, which makes (h^T kron I) vec = Sigma_hat^T h exact.
template <typename Scalar>
class KoopmanEstimate {
 public:
  KoopmanEstimate(int n_xi, int input_dim) : sigma_(MatrixX<Scalar>::Zero(n_xi + input_dim, n_xi)) {}
  explicit KoopmanEstimate(MatrixX<Scalar> sigma) : sigma_(std::move(sigma)) {
    if (sigma_.rows() < sigma_.cols()) throw InputError("estimate: expected (n_xi + m) x n_xi shape");
  }

  template <typename DA, typename DB>
  static KoopmanEstimate from_ab(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
    if (a.rows() != a.cols() || b.rows() != a.rows()) throw InputError("estimate: A/B shapes mismatch");
    MatrixX<Scalar> st(a.rows(), a.cols() + b.cols());
    st << a, b;
    return KoopmanEstimate(MatrixX<Scalar>(st.transpose()));
  }

  static KoopmanEstimate unvec(const VectorX<Scalar>& v, int n_xi, int input_dim) {
    if (v.size() != n_xi * (n_xi + input_dim)) throw InputError("estimate: vec has wrong length");
    const Eigen::Map<const MatrixX<Scalar>> st(v.data(), n_xi, n_xi + input_dim);
    return KoopmanEstimate(MatrixX<Scalar>(st.transpose()));
  }

  int n_xi() const { return static_cast<int>(sigma_.cols()); }
  int input_dim() const { return static_cast<int>(sigma_.rows() - sigma_.cols()); }

  const MatrixX<Scalar>& sigma() const { return sigma_; }
  MatrixX<Scalar>& sigma() { return sigma_; }
  MatrixX<Scalar> a() const { return sigma_.transpose().leftCols(n_xi()); }
  MatrixX<Scalar> b() const { return sigma_.transpose().rightCols(input_dim()); }

  VectorX<Scalar> vec() const {
    const MatrixX<Scalar> st = sigma_.transpose();
    return Eigen::Map<const VectorX<Scalar>>(st.data(), st.size());
  }

 private:
  MatrixX<Scalar> sigma_;
};

using KoopmanEstimated = KoopmanEstimate<double>;

/// How the flow is advanced between plant steps. kRk4 is the fixed-step
/// stepper with overshoot halving; kExact uses the closed-form solution of
/// the frozen-data flow (see advance_flow_exact).
enum class FlowIntegrator { kRk4, kExact };

struct FlowConfig {
  double alpha = 3.0;
  int r = 0;
  double delta = 1e-6;
  double dt_flow = 1e-4;
  double stop_tol = 1e-8;
  int max_halvings = 20;
  FlowIntegrator integrator = FlowIntegrator::kRk4;

  void validate() const {
    if (!(alpha > 0)) throw InputError("flow: alpha must be positive");
    if (r < 0) throw InputError("flow: r must be non-negative");
    if (!(delta >= 0)) throw InputError("flow: delta must be non-negative");
    if (!(dt_flow > 0)) throw InputError("flow: dt_flow must be positive");
    if (max_halvings < 0) throw InputError("flow: max_halvings must be non-negative");
  }
};

/// Residuals of the current snapshot and every stored sample, together with
/// the combined vector g = H(t) e(t) + sum_j H(t_j) e_j realized as vec(E),
/// E = e h^T + sum_j e_j h_j^T, and the small Gram G = h h^T + sum_j h_j h_j^T.
/// The full-space matrix 2A equals G kron I.
template <typename Scalar>
struct ResidualBundle {
  VectorX<Scalar> e_now;
  std::vector<VectorX<Scalar>> e_stored;
  MatrixX<Scalar> e_matrix;  // n_xi x (n_xi + m)
  VectorX<Scalar> g;
  MatrixX<Scalar> gram;  // G_small

  Scalar g_norm() const { return g.norm(); }
};

template <typename Scalar>
ResidualBundle<Scalar> residuals(const KoopmanEstimate<Scalar>& est, const NormalizedSnapshot<Scalar>& snap,
                                 const HistoryStack<Scalar>& stack) {
  const auto& sigma = est.sigma();
  if (snap.h_bar.size() != sigma.rows() || snap.xi_bar.size() != sigma.cols() ||
      stack.regressor_dim() != sigma.rows() || stack.target_dim() != sigma.cols()) {
    throw InputError("residuals: estimate, snapshot and stack dimensions disagree");
  }
  ResidualBundle<Scalar> rb;
  rb.e_now = sigma.transpose() * snap.h_bar - snap.target();
  rb.e_matrix = rb.e_now * snap.h_bar.transpose();
  rb.gram = snap.h_bar * snap.h_bar.transpose();
  rb.e_stored.reserve(stack.samples().size());
  for (const auto& s : stack.samples()) {
    VectorX<Scalar> e = sigma.transpose() * s.h_bar - s.y;
    rb.e_matrix.noalias() += e * s.h_bar.transpose();
    rb.gram.noalias() += s.h_bar * s.h_bar.transpose();
    rb.e_stored.push_back(std::move(e));
  }
  rb.g = Eigen::Map<const VectorX<Scalar>>(rb.e_matrix.data(), rb.e_matrix.size());
  return rb;
}

/// The least-squares data of one instant in aggregated form: E(Sigma) =
/// Sigma^T G - C. Built once per step and reused by every flow evaluation.
template <typename Scalar>
struct FlowProblem {
  MatrixX<Scalar> gram;   // G, (n_xi + m) x (n_xi + m)
  MatrixX<Scalar> cross;  // C, n_xi x (n_xi + m)

  static FlowProblem from(const NormalizedSnapshot<Scalar>& snap, const HistoryStack<Scalar>& stack) {
    FlowProblem p{stack.gram(), stack.cross()};
    p.gram.noalias() += snap.h_bar * snap.h_bar.transpose();
    p.cross.noalias() += snap.target() * snap.h_bar.transpose();
    return p;
  }

  /// E for the transposed estimate Sigma^T.
  MatrixX<Scalar> residual_matrix(const MatrixX<Scalar>& sigma_t) const { return sigma_t * gram - cross; }
};

/// Right-hand side of the regularized finite-time law in matrix form,
///   d(Sigma^T)/dt = -alpha |E| E G^r / (delta + <E, E G^{r+1}>),
/// which is the small-space image of -alpha |g| (2A)^r g / (delta + g^T (2A)^{r+1} g).
template <typename Scalar>
MatrixX<Scalar> flow_matrix(const MatrixX<Scalar>& e_matrix, const MatrixX<Scalar>& gram, const FlowConfig& cfg) {
  MatrixX<Scalar> egr = e_matrix;
  for (int k = 0; k < cfg.r; ++k) egr = egr * gram;
  const MatrixX<Scalar> egr1 = egr * gram;
  const Scalar q = (egr1.array() * e_matrix.array()).sum();
  const Scalar g_norm = e_matrix.norm();
  const Scalar denom = Scalar(cfg.delta) + q;
  if (cfg.delta == 0.0 && !(q > Scalar(0))) {
    throw SingularFlowError("flow: g^T (2A)^{r+1} g is not positive and delta = 0");
  }
  if (g_norm == Scalar(0)) return MatrixX<Scalar>::Zero(e_matrix.rows(), e_matrix.cols());
  return (-Scalar(cfg.alpha) * g_norm / denom) * egr;
}

/// d vec(Sigma_hat^T)/dt for the given residual bundle.
template <typename Scalar>
VectorX<Scalar> flow(const KoopmanEstimate<Scalar>& est, const ResidualBundle<Scalar>& rb, const FlowConfig& cfg) {
  if (rb.e_matrix.rows() != est.n_xi() || rb.e_matrix.cols() != est.sigma().rows()) {
    throw InputError("flow: residual bundle does not match the estimate");
  }
  const MatrixX<Scalar> f = flow_matrix<Scalar>(rb.e_matrix, rb.gram, cfg);
  return Eigen::Map<const VectorX<Scalar>>(f.data(), f.size());
}

/// Predicted settling time |g(t_a)| / alpha.
inline double settling_time(double g0_norm, double alpha) {
  if (!(alpha > 0)) throw InputError("settling_time: alpha must be positive");
  return g0_norm / alpha;
}

struct FlowStepStats {
  int halvings = 0;
  int substeps = 0;
};

/// Advances Sigma^T over `duration` with the data of `problem` held fixed.
/// RK4 substeps of at most cfg.dt_flow; a substep that increases V = |E|^2 is
/// retried at half the size, up to cfg.max_halvings times, and the step size
/// grows back by doubling after each accepted substep. If no admissible step
/// is found the estimate is left at its numerical equilibrium.
template <typename Scalar>
FlowStepStats advance_flow_rk4(MatrixX<Scalar>& sigma_t, const FlowProblem<Scalar>& problem, const FlowConfig& cfg,
                               double duration) {
  FlowStepStats stats;
  auto rhs = [&](const MatrixX<Scalar>& st) {
    return flow_matrix<Scalar>(problem.residual_matrix(st), problem.gram, cfg);
  };
  double remaining = duration;
  double h_next = cfg.dt_flow;
  while (remaining > 1e-12 * duration) {
    double h = std::min(h_next, remaining);
    const MatrixX<Scalar> e0 = problem.residual_matrix(sigma_t);
    const Scalar v0 = e0.squaredNorm();
    if (v0 == Scalar(0)) break;
    if (cfg.delta == 0.0) {
      const MatrixX<Scalar> egr1 = e0 * problem.gram;
      if (!((egr1.array() * e0.array()).sum() > Scalar(0))) break;  // at the equilibrium of the ideal law
    }
    const MatrixX<Scalar> k1 = flow_matrix<Scalar>(e0, problem.gram, cfg);
    MatrixX<Scalar> next;
    bool accepted = false;
    for (int attempt = 0;; ++attempt) {
      const MatrixX<Scalar> k2 = rhs(sigma_t + (h / 2) * k1);
      const MatrixX<Scalar> k3 = rhs(sigma_t + (h / 2) * k2);
      const MatrixX<Scalar> k4 = rhs(sigma_t + h * k3);
      next = sigma_t + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
      if (problem.residual_matrix(next).squaredNorm() <= v0) {
        accepted = true;
        break;
      }
      if (attempt >= cfg.max_halvings) break;
      h /= 2;
      ++stats.halvings;
    }
    if (!accepted) break;
    if (!next.allFinite()) throw DivergenceError("flow: non-finite estimate");
    sigma_t = std::move(next);
    remaining -= h;
    h_next = std::min(cfg.dt_flow, 2 * h);
    ++stats.substeps;
  }
  return stats;
}

/// Closed-form advance of the frozen-data flow. With G = V diag(lambda) V^T
/// the direction E G^r keeps every eigencomponent of E aligned, so
///   E(phi) = E0 V diag(exp(-lambda^{r+1} phi)) V^T
/// for a scalar phi(t) obeying dt/dphi = (delta + q(phi)) / (alpha |E(phi)|).
/// At delta = 0 that gives |E| = |E0| - alpha t exactly; otherwise t(phi) is
/// a 1-D quadrature. Either way V is nonincreasing by construction.
template <typename Scalar>
FlowStepStats advance_flow_exact(MatrixX<Scalar>& sigma_t, const FlowProblem<Scalar>& problem, const FlowConfig& cfg,
                                 double duration) {
  FlowStepStats stats;
  const MatrixX<Scalar> e0 = problem.residual_matrix(sigma_t);
  const double e0_norm = static_cast<double>(e0.norm());
  if (e0_norm == 0.0 || !(duration > 0)) return stats;

  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(problem.gram);
  const VectorX<Scalar>& lambda = es.eigenvalues();
  const MatrixX<Scalar>& basis = es.eigenvectors();
  const Eigen::Index dim = lambda.size();
  const double null_tol = std::numeric_limits<double>::epsilon() * static_cast<double>(dim) *
                          std::max(1.0, static_cast<double>(lambda(dim - 1)));
  const MatrixX<Scalar> proj = e0 * basis;

  std::vector<Eigen::Index> live;
  std::vector<double> mu, w;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (static_cast<double>(lambda(i)) <= null_tol) continue;  // E0 has no component there
    live.push_back(i);
    mu.push_back(std::pow(static_cast<double>(lambda(i)), cfg.r + 1));
    w.push_back(static_cast<double>(proj.col(i).squaredNorm()));
  }
  if (live.empty()) return stats;

  auto e_norm = [&](double phi) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += w[i] * std::exp(-2.0 * mu[i] * phi);
    return std::sqrt(s);
  };
  auto q_of = [&](double phi) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += w[i] * mu[i] * std::exp(-2.0 * mu[i] * phi);
    return s;
  };
  const double mu_max = *std::max_element(mu.begin(), mu.end());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  double phi = 0.0;
  if (cfg.delta == 0.0) {
    const double target = e0_norm - cfg.alpha * duration;
    if (target <= 0.0) {
      phi = kInf;
    } else {
      double lo = 0.0;
      double hi = 1.0 / mu_max;
      while (e_norm(hi) > target) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) break;
      }
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (e_norm(mid) > target ? lo : hi) = mid;
      }
      phi = hi;
    }
    stats.substeps = 1;
  } else {
    auto dt_dphi = [&](double p) {
      const double en = e_norm(p);
      return en > 0.0 ? (cfg.delta + q_of(p)) / (cfg.alpha * en) : kInf;
    };
    // Three-point Gauss-Legendre on [p, p + len].
    auto elapsed = [&](double p, double len) {
      static constexpr double kNode = 0.7745966692414834;
      const double c = p + 0.5 * len;
      const double hl = 0.5 * len;
      return hl * (5.0 / 9.0 * dt_dphi(c - kNode * hl) + 8.0 / 9.0 * dt_dphi(c) + 5.0 / 9.0 * dt_dphi(c + kNode * hl));
    };
    double remaining = duration;
    for (;;) {
      const double en = e_norm(phi);
      if (en == 0.0) {
        phi = kInf;
        break;
      }
      const double rate = dt_dphi(phi);
      double len = std::min(0.05 * en * en / q_of(phi), 2.0 * remaining / rate);
      const double dt_step = elapsed(phi, len);
      ++stats.substeps;
      if (dt_step < remaining) {
        phi += len;
        remaining -= dt_step;
        continue;
      }
      double lo = 0.0;
      double hi = len;
      for (int it = 0; it < 100 && hi - lo > 1e-15 * (phi + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (elapsed(phi, mid) < remaining ? lo : hi) = mid;
      }
      phi += 0.5 * (lo + hi);
      break;
    }
  }

  VectorX<Scalar> f = VectorX<Scalar>::Zero(dim);
  for (std::size_t k = 0; k < live.size(); ++k) {
    const double lam = static_cast<double>(lambda(live[k]));
    f(live[k]) = Scalar(std::isinf(phi) ? 1.0 / lam : -std::expm1(-mu[k] * phi) / lam);
  }
  sigma_t -= proj * f.asDiagonal() * basis.transpose();
  if (!sigma_t.allFinite()) throw DivergenceError("flow: non-finite estimate");
  return stats;
}

template <typename Scalar>
FlowStepStats advance_flow(MatrixX<Scalar>& sigma_t, const FlowProblem<Scalar>& problem, const FlowConfig& cfg,
                           double duration) {
  return cfg.integrator == FlowIntegrator::kExact ? advance_flow_exact(sigma_t, problem, cfg, duration)
                                                  : advance_flow_rk4(sigma_t, problem, cfg, duration);
}

/// One logged sample of |g| used for regret accounting.
struct GNormSample {
  double t;
  double g_norm;
};

/// Trapezoidal integral of |g| over [t_from, t_to]; the end points are
/// linearly interpolated between logged samples.
inline double regret(std::span<const GNormSample> traj, double t_from, double t_to) {
  if (traj.size() < 2 || !(t_to > t_from)) return 0.0;
  auto value_at = [&](double t) {
    if (t <= traj.front().t) return traj.front().g_norm;
    if (t >= traj.back().t) return traj.back().g_norm;
    const auto it = std::lower_bound(traj.begin(), traj.end(), t,
                                     [](const GNormSample& s, double x) { return s.t < x; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (t - lo.t) / (hi.t - lo.t);
    return lo.g_norm + w * (hi.g_norm - lo.g_norm);
  };
  double total = 0.0;
  double prev_t = std::max(t_from, traj.front().t);
  double prev_v = value_at(prev_t);
  const double end = std::min(t_to, traj.back().t);
  for (const auto& s : traj) {
    if (s.t <= prev_t) continue;
    if (s.t >= end) break;
    total += 0.5 * (prev_v + s.g_norm) * (s.t - prev_t);
    prev_t = s.t;
    prev_v = s.g_norm;
  }
  if (end > prev_t) total += 0.5 * (prev_v + value_at(end)) * (end - prev_t);
  return total;
}

template <typename Scalar>
struct CostAndGradient {
  Scalar cost;
  VectorX<Scalar> grad;  // with respect to vec(Sigma_hat^T)
};

/// J = e^T e + sum_j e_j^T e_j. J is the quadratic form of M = G kron I = 2A
/// in the parameter error, so grad = (M + M^T) Sigma_tilde = 2 (2A) Sigma_tilde.
/// With the true parameters the gradient is formed from Sigma_tilde; otherwise
/// from the measurable residual matrix (2 vec(E)), which coincides with it for
/// an exact library.
template <typename Scalar>
CostAndGradient<Scalar> identification_cost(const KoopmanEstimate<Scalar>& est,
                                            const NormalizedSnapshot<Scalar>& snap,
                                            const HistoryStack<Scalar>& stack,
                                            const std::optional<MatrixX<Scalar>>& sigma_star = std::nullopt) {
  const auto rb = residuals(est, snap, stack);
  Scalar cost = rb.e_now.squaredNorm();
  for (const auto& e : rb.e_stored) cost += e.squaredNorm();
  MatrixX<Scalar> grad_matrix;
  if (sigma_star) {
    if (sigma_star->rows() != est.sigma().rows() || sigma_star->cols() != est.sigma().cols()) {
      throw InputError("identification_cost: true parameters have the wrong shape");
    }
    const MatrixX<Scalar> tilde_t = (est.sigma() - *sigma_star).transpose();
    grad_matrix = Scalar(2) * tilde_t * rb.gram;
  } else {
    grad_matrix = Scalar(2) * rb.e_matrix;
  }
  return {cost, Eigen::Map<const VectorX<Scalar>>(grad_matrix.data(), grad_matrix.size())};
}

}  // namespace ftkoop
