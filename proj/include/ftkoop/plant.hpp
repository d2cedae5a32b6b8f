#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include <Eigen/Dense>

#include "ftkoop/errors.hpp"
#include "ftkoop/observables.hpp"

namespace ftkoop {

// Benchmark plant:
//   x1' = mu x1
//   x2' = lambda (x2 - x1^4 + 2 x1^2) + u
struct PlantParams {
  double mu = -1.0;
  double lambda = -1.0;
  double probe_on = 0.0;   // probing active for probe_on < t <= probe_off
  double probe_off = 0.5;

  void validate() const {
    if (!(probe_on < probe_off)) throw InputError("plant: probe window must satisfy t_on < t_off");
  }
};

template <typename Scalar>
struct PlantState {
  Eigen::Matrix<Scalar, 2, 1> x = Eigen::Matrix<Scalar, 2, 1>::Zero();
  Scalar t{0};
};

using PlantStated = PlantState<double>;

/// Eleven-term sinusoidal excitation used inside the probe window.
template <typename Scalar>
Scalar probing_signal(Scalar t) {
  using std::cos;
  using std::pow;
  using std::sin;
  return Scalar(0.4) * pow(sin(Scalar(0.1) * t), 6) * cos(Scalar(1.5) * t) +
         Scalar(0.3) * pow(sin(Scalar(2.3) * t), 4) * cos(Scalar(0.7) * t) +
         Scalar(0.4) * pow(sin(Scalar(2.6) * t), 5) +
         Scalar(0.7) * pow(sin(Scalar(3) * t), 2) * cos(Scalar(4) * t) +
         Scalar(0.3) * sin(Scalar(0.3) * t) * pow(cos(Scalar(1.2) * t), 2) +
         Scalar(0.4) * pow(sin(Scalar(1.12) * t), 3) +
         Scalar(0.5) * cos(Scalar(2.4) * t) * pow(sin(Scalar(8) * t), 2) +
         Scalar(0.3) * sin(t) * pow(cos(Scalar(0.8) * t), 2) +
         Scalar(0.3) * pow(sin(Scalar(4) * t), 3) +
         Scalar(0.4) * cos(Scalar(2) * t) * pow(sin(Scalar(5) * t), 8) +
         Scalar(0.4) * pow(sin(Scalar(3.5) * t), 5);
}

/// Probing signal inside the window, baseline input 0 outside it.
inline double probing_input(double t, const PlantParams& params) {
  if (t > params.probe_on && t <= params.probe_off) return probing_signal(t);
  return 0.0;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> plant_derivative(const Eigen::Matrix<Scalar, 2, 1>& x, Scalar u,
                                             const PlantParams& params) {
  const Scalar x1 = x(0);
  const Scalar x1_sq = x1 * x1;
  Eigen::Matrix<Scalar, 2, 1> dx;
  dx(0) = Scalar(params.mu) * x1;
  dx(1) = Scalar(params.lambda) * (x(1) - x1_sq * x1_sq + Scalar(2) * x1_sq) + u;
  return dx;
}

template <typename Scalar>
void check_finite(const PlantState<Scalar>& s) {
  if (!s.x.allFinite()) {
    throw DivergenceError("plant: non-finite state at t=" + std::to_string(static_cast<double>(s.t)));
  }
}

/// One RK4 step with the input held at u over the step.
template <typename Scalar>
PlantState<Scalar> step_true_system(const PlantState<Scalar>& s, Scalar u, Scalar dt,
                                    const PlantParams& params) {
  if (!(dt > Scalar(0))) throw InputError("plant: dt must be positive");
  const auto k1 = plant_derivative<Scalar>(s.x, u, params);
  const auto k2 = plant_derivative<Scalar>(s.x + dt / 2 * k1, u, params);
  const auto k3 = plant_derivative<Scalar>(s.x + dt / 2 * k2, u, params);
  const auto k4 = plant_derivative<Scalar>(s.x + dt * k3, u, params);
  PlantState<Scalar> next{s.x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), s.t + dt};
  check_finite(next);
  return next;
}

/// One RK4 step with the input sampled from `input(t)` at each stage time.
template <typename Scalar, typename InputFn>
PlantState<Scalar> step_true_system(const PlantState<Scalar>& s, InputFn&& input, Scalar dt,
                                    const PlantParams& params) {
  if (!(dt > Scalar(0))) throw InputError("plant: dt must be positive");
  const Scalar t = s.t;
  const auto k1 = plant_derivative<Scalar>(s.x, input(t), params);
  const auto k2 = plant_derivative<Scalar>(s.x + dt / 2 * k1, input(t + dt / 2), params);
  const auto k3 = plant_derivative<Scalar>(s.x + dt / 2 * k2, input(t + dt / 2), params);
  const auto k4 = plant_derivative<Scalar>(s.x + dt * k3, input(t + dt), params);
  PlantState<Scalar> next{s.x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), t + dt};
  check_finite(next);
  return next;
}

/// Exact lifted model for theta = {1,2,4,9}, i.e. xi = (x1, x2, x1^2, x1^4).
struct TrueKoopman {
  Eigen::Matrix4d A;
  Eigen::Vector4d B;
};

inline TrueKoopman true_koopman(const PlantParams& params = {}) {
  const double mu = params.mu;
  const double lam = params.lambda;
  TrueKoopman k;
  k.A << mu, 0, 0, 0,
         0, lam, 2 * lam, -lam,
         0, 0, 2 * mu, 0,
         0, 0, 0, 4 * mu;
  k.B << 0, 1, 0, 0;
  return k;
}

/// Psi(u): maps the scalar plant input to the lifted input channel(s).
using InputMap = std::function<Eigen::VectorXd(double)>;

inline InputMap identity_input_map() {
  return [](double u) { return Eigen::VectorXd::Constant(1, u); };
}

}  // namespace ftkoop
