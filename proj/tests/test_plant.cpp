#include <doctest.h>

#include "ftkoop/observables.hpp"
#include "ftkoop/plant.hpp"

using namespace ftkoop;

namespace {

// Term-by-term table of the probe: amplitude, sine rate, sine power, cosine rate, cosine power.
double probe_oracle(double t) {
  struct Term {
    double amp, ws;
    int ps;
    double wc;
    int pc;
  };
  const Term terms[] = {{0.4, 0.1, 6, 1.5, 1}, {0.3, 2.3, 4, 0.7, 1}, {0.4, 2.6, 5, 0.0, 0}, {0.7, 3.0, 2, 4.0, 1},
                        {0.3, 0.3, 1, 1.2, 2}, {0.4, 1.12, 3, 0.0, 0}, {0.5, 8.0, 2, 2.4, 1}, {0.3, 1.0, 1, 0.8, 2},
                        {0.3, 4.0, 3, 0.0, 0}, {0.4, 5.0, 8, 2.0, 1},  {0.4, 3.5, 5, 0.0, 0}};
  double sum = 0.0;
  for (const auto& term : terms) {
    double s = 1.0, c = 1.0;
    for (int k = 0; k < term.ps; ++k) s *= std::sin(term.ws * t);
    for (int k = 0; k < term.pc; ++k) c *= std::cos(term.wc * t);
    sum += term.amp * s * c;
  }
  return sum;
}

}  // namespace

TEST_CASE("probing input") {
  const PlantParams p;
  CHECK(probing_input(0.0, p) == 0.0);
  CHECK(probing_input(0.6, p) == 0.0);
  CHECK(probing_input(0.25, p) == doctest::Approx(probe_oracle(0.25)).epsilon(1e-14));
  CHECK(probing_input(0.25, p) == doctest::Approx(1.1916949938405974).epsilon(1e-13));
  for (double t = 0.01; t <= 0.5; t += 0.01) CHECK(probing_input(t, p) == doctest::Approx(probe_oracle(t)).epsilon(1e-12));
  CHECK(probing_input(0.5, p) != 0.0);
  CHECK(probing_input(0.5000001, p) == 0.0);
}

TEST_CASE("plant derivative") {
  const PlantParams p;
  CHECK(plant_derivative<double>(Eigen::Vector2d::Zero(), 0.0, p).isZero(0.0));
  CHECK(plant_derivative<double>(Eigen::Vector2d(1, -1), 0.0, p).isApprox(Eigen::Vector2d(-1, 0)));
  CHECK(plant_derivative<double>(Eigen::Vector2d(1, -1), 1.0, p).isApprox(Eigen::Vector2d(-1, 1)));
}

TEST_CASE("RK4 step") {
  const PlantParams p;
  const PlantStated origin{Eigen::Vector2d::Zero(), 0.0};
  const auto next = step_true_system(origin, 0.0, 1e-3, p);
  CHECK(next.x.isZero(0.0));
  CHECK(next.t == doctest::Approx(1e-3));
  // x1' = -x1 has the closed form x1(t) = exp(-t).
  PlantStated s{Eigen::Vector2d(1, -1), 0.0};
  for (int k = 0; k < 1000; ++k) s = step_true_system(s, 0.0, 1e-3, p);
  CHECK(s.x(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK_THROWS_AS(step_true_system(origin, 0.0, 0.0, p), InputError);
  const PlantStated huge{Eigen::Vector2d(1e100, 0.0), 0.0};
  CHECK_THROWS_AS(step_true_system(huge, 0.0, 1e-3, p), DivergenceError);
}

TEST_CASE("true Koopman matrices") {
  const auto k = true_koopman();
  CHECK(k.A(0, 0) == -1.0);
  CHECK(k.A(1, 2) == -2.0);
  CHECK(k.A(1, 3) == 1.0);
  CHECK(k.B == Eigen::Vector4d(0, 1, 0, 0));
  CHECK_THROWS_AS((PlantParams{-1, -1, 0.5, 0.5}.validate()), InputError);
}

TEST_CASE("lifting the plant trajectory matches the lifted linear model over 5 s") {
  const PlantParams p;
  const ObservableLibrary lib(default_catalog(), {1, 2, 4, 9});
  const auto k = true_koopman(p);
  const double dt = 1e-4;
  PlantStated s{Eigen::Vector2d(1, -1), 0.0};
  Eigen::Vector4d xi = lift(lib, s.x);
  auto u = [&](double t) { return probing_input(t, p); };
  auto rhs = [&](const Eigen::Vector4d& z, double t) -> Eigen::Vector4d { return k.A * z + k.B * u(t); };
  double worst = 0.0;
  for (int n = 0; n < 50000; ++n) {
    const double t = n * dt;
    const Eigen::Vector4d k1 = rhs(xi, t);
    const Eigen::Vector4d k2 = rhs(xi + dt / 2 * k1, t + dt / 2);
    const Eigen::Vector4d k3 = rhs(xi + dt / 2 * k2, t + dt / 2);
    const Eigen::Vector4d k4 = rhs(xi + dt * k3, t + dt);
    xi += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    s = step_true_system(s, u, dt, p);
    worst = std::max(worst, (lift(lib, s.x) - xi).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("the state decays after the probe window") {
  const PlantParams p;
  PlantStated s{Eigen::Vector2d(1, -1), 0.0};
  auto u = [&](double t) { return probing_input(t, p); };
  while (s.t < 0.5) s = step_true_system(s, u, 1e-4, p);
  double prev = s.x.norm();
  int increases = 0;
  for (int n = 0; n < 45000; ++n) {
    s = step_true_system(s, u, 1e-4, p);
    if (s.x.norm() > prev) ++increases;
    prev = s.x.norm();
  }
  CHECK(increases == 0);
  CHECK(s.x.norm() < 0.05);
}
