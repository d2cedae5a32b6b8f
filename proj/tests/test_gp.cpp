#include <doctest.h>

#include <cmath>
#include <random>

#include "ftkoop/gp.hpp"
#include "support.hpp"

using namespace ftkoop;

namespace {

Eigen::VectorXd random_mask_vector(std::mt19937_64& rng, int n) {
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = coin(rng) ? 1.0 : 0.0;
  return v;
}

Eigen::VectorXd random_query(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> unit(-0.5, 1.5);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = unit(rng);
  return v;
}

// Dense oracle: solves the full kernel system with a pivoted LU, independent of
// the model's Cholesky factor.
GpPrediction dense_posterior(const std::vector<Eigen::VectorXd>& x, const Eigen::VectorXd& y, const GpHyper& h,
                             const Eigen::VectorXd& q) {
  const auto n = static_cast<Eigen::Index>(x.size());
  auto kern = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return h.sigma0_sq * std::exp(-(a - b).squaredNorm() / (2 * h.length_scale * h.length_scale));
  };
  Eigen::MatrixXd k(n, n);
  Eigen::VectorXd kq(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    kq(i) = kern(q, x[i]);
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = kern(x[i], x[j]);
  }
  k.diagonal().array() += h.noise_sq + kGpJitter;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(k);
  return {kq.dot(lu.solve(y)), h.sigma0_sq - kq.dot(lu.solve(kq)) + h.noise_sq};
}

}  // namespace

TEST_CASE("squared-exponential kernel") {
  const GpHyper h{1.0, 1.0, 1e-4};
  const Eigen::VectorXd a = Eigen::Vector3d(1, 0, 1);
  CHECK(se_kernel(a, a, h) == 1.0);
  CHECK(se_kernel(a, Eigen::Vector3d(0, 0, 0), h) == doctest::Approx(0.367879).epsilon(1e-6));
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd p = random_query(rng, 5), q = random_query(rng, 5);
    CHECK(se_kernel(p, q, h) == se_kernel(q, p, h));
  }
  CHECK_THROWS_AS(se_kernel(a, Eigen::Vector2d(0, 0), h), InputError);
}

TEST_CASE("hyperparameter defaults and validation") {
  const auto h = GpHyper::defaults_for(9);
  CHECK(h.sigma0_sq == 1.0);
  CHECK(h.length_scale == 1.5);
  CHECK(h.noise_sq == 1e-4);
  CHECK_THROWS_AS(fit({Eigen::Vector2d(0, 1)}, Eigen::VectorXd::Ones(1), GpHyper{0.0, 1.0, 0.0}), InputError);
  CHECK_THROWS_AS(fit({Eigen::Vector2d(0, 1)}, Eigen::VectorXd::Ones(2), GpHyper{}), InputError);
  CHECK_THROWS_AS(fit({}, Eigen::VectorXd(0), GpHyper{}), InputError);
  CHECK_THROWS_AS(fit({Eigen::Vector2d(0, 1)}, Eigen::VectorXd::Constant(1, NAN), GpHyper{}), InputError);
}

TEST_CASE("noiseless interpolation and prior recovery") {
  const GpHyper h{1.0, 1.0, 0.0};
  const Eigen::VectorXd x0 = Eigen::Vector3d(1, 0, 1);
  const auto gp = fit({x0}, Eigen::VectorXd::Constant(1, 3.0), h);
  const auto at = gp.posterior(x0);
  CHECK(at.mean == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(std::abs(at.variance) < 1e-9);
  const auto far = gp.posterior(Eigen::Vector3d(100, 100, 100));
  CHECK(std::abs(far.mean) < 1e-12);
  CHECK(far.variance == doctest::Approx(h.sigma0_sq + h.noise_sq));
  const GpHyper noisy{2.0, 1.0, 0.1};
  const auto far_noisy = fit({x0}, Eigen::VectorXd::Constant(1, 3.0), noisy).posterior(Eigen::Vector3d(50, 0, 0));
  CHECK(far_noisy.variance == doctest::Approx(2.1));
}

TEST_CASE("two-point posterior matches the explicit 2x2 solve") {
  const GpHyper h{1.3, 0.8, 1e-3};
  const Eigen::VectorXd x1 = Eigen::Vector2d(0, 1), x2 = Eigen::Vector2d(1, 1), q = Eigen::Vector2d(0.3, 0.6);
  const double y1 = 0.7, y2 = -0.4;
  auto kern = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return h.sigma0_sq * std::exp(-(a - b).squaredNorm() / (2 * h.length_scale * h.length_scale));
  };
  const double s = h.noise_sq + kGpJitter;
  const double a = kern(x1, x1) + s, b = kern(x1, x2), d = kern(x2, x2) + s;
  const double det = a * d - b * b;
  const double k1 = kern(q, x1), k2 = kern(q, x2);
  // Inverse of [[a, b], [b, d]] written out.
  const double w1 = (d * k1 - b * k2) / det, w2 = (-b * k1 + a * k2) / det;
  const double mean = w1 * y1 + w2 * y2;
  const double var = h.sigma0_sq - (w1 * k1 + w2 * k2) + h.noise_sq;
  const auto p = fit({x1, x2}, Eigen::Vector2d(y1, y2), h).posterior(q);
  CHECK(std::abs(p.mean - mean) < 1e-10);
  CHECK(std::abs(p.variance - var) < 1e-10);
}

TEST_CASE("posterior matches a dense solve on up to 20 points") {
  std::mt19937_64 rng(17);
  for (int n_pts = 1; n_pts <= 20; ++n_pts) {
    const int dim = 9;
    std::vector<Eigen::VectorXd> x;
    for (int i = 0; i < n_pts; ++i) x.push_back(random_mask_vector(rng, dim));
    const Eigen::VectorXd y = testing_support::random_vector(rng, n_pts);
    const GpHyper h = GpHyper::defaults_for(dim);
    const auto gp = fit(x, y, h);
    for (int k = 0; k < 10; ++k) {
      const Eigen::VectorXd q = random_query(rng, dim);
      const auto p = gp.posterior(q);
      const auto o = dense_posterior(x, y, h, q);
      CHECK(std::abs(p.mean - o.mean) <= 1e-8 * std::max(1.0, std::abs(o.mean)));
      CHECK(std::abs(p.variance - o.variance) <= 1e-8 * std::max(1.0, o.variance));
    }
  }
}

TEST_CASE("posterior variance bounds and monotonicity") {
  std::mt19937_64 rng(5);
  const int dim = 6;
  const GpHyper h{1.0, 1.2, 1e-4};
  std::vector<Eigen::VectorXd> x;
  for (int i = 0; i < 5; ++i) x.push_back(random_mask_vector(rng, dim));
  const Eigen::VectorXd y = testing_support::random_vector(rng, 5);
  const auto gp = fit(x, y, h);
  for (int k = 0; k < 1000; ++k) {
    const auto p = gp.posterior(random_query(rng, dim));
    CHECK(p.variance >= h.noise_sq - 1e-12);
    CHECK(p.variance <= h.sigma0_sq + h.noise_sq + 1e-12);
  }
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Eigen::VectorXd> base;
    for (int i = 0; i < 4; ++i) base.push_back(random_query(rng, dim));
    const Eigen::VectorXd yb = testing_support::random_vector(rng, 4);
    auto grown = base;
    grown.push_back(random_query(rng, dim));
    Eigen::VectorXd yg(5);
    yg << yb, 0.3;
    const auto small = fit(base, yb, h);
    const auto big = fit(grown, yg, h);
    for (int k = 0; k < 20; ++k) {
      const Eigen::VectorXd q = random_query(rng, dim);
      CHECK(big.posterior(q).variance <= small.posterior(q).variance + 1e-10);
    }
  }
}

TEST_CASE("duplicate points without noise fail to factorize") {
  const GpHyper h{1e20, 1.0, 0.0};
  const Eigen::VectorXd x0 = Eigen::Vector2d(1, 0);
  CHECK_THROWS_AS(fit({x0, x0}, Eigen::Vector2d(1, 2), h), ConditioningError);
  // With the default noise the same data is absorbed.
  CHECK_NOTHROW(fit({x0, x0}, Eigen::Vector2d(1, 2), GpHyper{}));
}
