#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "ftkoop/errors.hpp"
#include "ftkoop/observables.hpp"

namespace ftkoop {

/// Filtered regressors of one identification run:
///   h' = -a h + Z,  Z = (xi, Psi(u))
///   l' = -a l + xi
/// with h(0) = 0 and l(0) = 0.
template <typename Scalar>
struct FilterState {
  VectorX<Scalar> h;
  VectorX<Scalar> l;
  Scalar t{0};
  VectorX<Scalar> xi0;
  Scalar a{1};

  FilterState() = default;
  FilterState(const VectorX<Scalar>& initial_lift, int input_dim, Scalar gain)
      : h(VectorX<Scalar>::Zero(initial_lift.size() + input_dim)),
        l(VectorX<Scalar>::Zero(initial_lift.size())),
        xi0(initial_lift),
        a(gain) {
    if (!(gain > Scalar(0))) throw InputError("filters: gain a must be positive");
  }

  int n_xi() const { return static_cast<int>(l.size()); }
  int input_dim() const { return static_cast<int>(h.size() - l.size()); }
};

using FilterStated = FilterState<double>;

template <typename Scalar>
struct NormalizedSnapshot {
  VectorX<Scalar> h_bar;
  VectorX<Scalar> l_bar;
  VectorX<Scalar> xi_bar;
  VectorX<Scalar> xi0_bar;  // xi(0) / n_s(t)
  Scalar n_s{1};
  Scalar decay{1};  // exp(-a t)
  Scalar a{1};
  Scalar t{0};

  /// Regression target xi_bar - a l_bar - exp(-a t) xi0_bar; equals
  /// Sigma*^T h_bar when the library is exact.
  VectorX<Scalar> target() const { return xi_bar - a * l_bar - decay * xi0_bar; }
};

using NormalizedSnapshotd = NormalizedSnapshot<double>;

template <typename Scalar>
VectorX<Scalar> stack_regressor(const VectorX<Scalar>& xi, const VectorX<Scalar>& psi_u) {
  VectorX<Scalar> z(xi.size() + psi_u.size());
  z << xi, psi_u;
  return z;
}

template <typename Scalar>
void check_finite(const FilterState<Scalar>& f) {
  if (!f.h.allFinite() || !f.l.allFinite()) {
    throw DivergenceError("filters: non-finite state at t=" + std::to_string(static_cast<double>(f.t)));
  }
}

/// One RK4 step with xi and psi_u held constant over the step.
template <typename Scalar>
FilterState<Scalar> step_filters(const FilterState<Scalar>& f, const VectorX<Scalar>& xi,
                                 const VectorX<Scalar>& psi_u, Scalar dt) {
  if (!(dt > Scalar(0))) throw InputError("filters: dt must be positive");
  if (xi.size() != f.n_xi() || psi_u.size() != f.input_dim()) {
    throw InputError("filters: forcing dimensions do not match the filter state");
  }
  const VectorX<Scalar> z = stack_regressor<Scalar>(xi, psi_u);
  const Scalar a = f.a;
  auto rk4 = [&](const VectorX<Scalar>& y, const VectorX<Scalar>& forcing) {
    const VectorX<Scalar> k1 = -a * y + forcing;
    const VectorX<Scalar> k2 = -a * (y + dt / 2 * k1) + forcing;
    const VectorX<Scalar> k3 = -a * (y + dt / 2 * k2) + forcing;
    const VectorX<Scalar> k4 = -a * (y + dt * k3) + forcing;
    return VectorX<Scalar>(y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4));
  };
  FilterState<Scalar> next = f;
  next.h = rk4(f.h, z);
  next.l = rk4(f.l, xi);
  next.t = f.t + dt;
  check_finite(next);
  return next;
}

/// Divides the filter identity by n_s = 1 + h'h + l'l.
template <typename Scalar>
NormalizedSnapshot<Scalar> normalize(const FilterState<Scalar>& f, const VectorX<Scalar>& xi) {
  using std::exp;
  if (xi.size() != f.n_xi()) throw InputError("normalize: lifted state has wrong dimension");
  NormalizedSnapshot<Scalar> s;
  s.n_s = Scalar(1) + f.h.squaredNorm() + f.l.squaredNorm();
  s.h_bar = f.h / s.n_s;
  s.l_bar = f.l / s.n_s;
  s.xi_bar = xi / s.n_s;
  s.xi0_bar = f.xi0 / s.n_s;
  s.decay = exp(-f.a * f.t);
  s.a = f.a;
  s.t = f.t;
  return s;
}

/// Normalized identifier output Sigma_hat^T h_bar + a l_bar + exp(-a t) xi0_bar.
/// sigma_hat has shape (n_xi + m) x n_xi.
template <typename Scalar, typename Derived>
VectorX<Scalar> predict_lifted(const Eigen::MatrixBase<Derived>& sigma_hat,
                               const NormalizedSnapshot<Scalar>& snap) {
  if (sigma_hat.rows() != snap.h_bar.size() || sigma_hat.cols() != snap.l_bar.size()) {
    throw InputError("predict_lifted: estimate shape does not match snapshot");
  }
  return sigma_hat.transpose() * snap.h_bar + snap.a * snap.l_bar + snap.decay * snap.xi0_bar;
}

}  // namespace ftkoop
