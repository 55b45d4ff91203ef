#include <doctest.h>

#include <cmath>
#include <random>

#include "convsolve/algebra.hpp"
#include "convsolve/errors.hpp"

using namespace convsolve;

namespace {

ProblemSpec flagship() {
  return ProblemSpec{KernelModel::gaussian(Eigen::MatrixXd::Ones(1, 1)),
                     {WeightModel::exp_sqrt(0.1)},
                     {NonlinModel::power(0.5, 1.0)},
                     PhiModel::power(0.5),
                     {},
                     1.0};
}

Eigen::MatrixXd random_positive_symmetric(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m(i, j) = m(j, i) = u(rng);
  return m;
}

}  // namespace

TEST_CASE("spectral radius and normalisation") {
  Eigen::MatrixXd m(2, 2);
  m << 2, 1, 1, 2;
  CHECK(spectral_radius(m, 1e-14) == doctest::Approx(3.0).epsilon(1e-13));
  const auto u = normalize_to_unit_radius(m, 1e-14);
  CHECK(u.scale == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(u.a(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
  CHECK(u.a(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  const auto eta = perron_vector(u.a, 1e-14);
  CHECK(eta(0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(eta(1) == doctest::Approx(1.0).epsilon(1e-13));
  Eigen::MatrixXd neg = m;
  neg(0, 1) = neg(1, 0) = -1.0;
  CHECK_THROWS_AS(spectral_radius(neg, 1e-14), SpectralError);
  CHECK_THROWS_AS(perron_vector(m, 1e-14), SpectralError);  // radius 3, not 1
}

TEST_CASE("Perron identity on random matrices") {
  std::mt19937 rng(12345);
  for (int n = 2; n <= 8; ++n)
    for (int rep = 0; rep < 5; ++rep) {
      const auto m = random_positive_symmetric(rng, n);
      // Independent radius from a symmetric eigensolver.
      const double rho = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().maxCoeff();
      CHECK(spectral_radius(m, 1e-14) == doctest::Approx(rho).epsilon(1e-12));
      const auto a = normalize_to_unit_radius(m, 1e-14).a;
      const auto eta = perron_vector(a, 1e-14);
      CHECK((a * eta - eta).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(eta.minCoeff() > 0.0);
      CHECK(eta.maxCoeff() == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("scalar majorant closed form") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(1, 1), b = Eigen::MatrixXd::Constant(1, 1, 0.2);
  std::vector<NonlinModel> g{NonlinModel::power(0.5, 1.0)};
  const auto s = solve_xi(a, b, g, Eigen::VectorXd::Ones(1), 1e-14);
  CHECK(std::abs(s.xi(0) - std::pow(1.2, 2.0)) <= 1e-10);
  CHECK(s.xi(0) == doctest::Approx(1.44).epsilon(1e-12));
  CHECK(s.start_scale >= 1.44);

  // alpha = 0.25, eta = 2: xi = eta (1 + b)^(1/(1-alpha))
  std::vector<NonlinModel> g2{NonlinModel::power(0.25, 2.0)};
  const auto s2 = solve_xi(a, b, g2, Eigen::VectorXd::Constant(1, 2.0), 1e-14);
  CHECK(std::abs(s2.xi(0) - 2.0 * std::pow(1.2, 1.0 / 0.75)) <= 1e-10);

  CHECK_THROWS_AS(solve_xi(a, Eigen::MatrixXd::Zero(1, 1), g, Eigen::VectorXd::Ones(1), 1e-14), MajorantError);
}

TEST_CASE("coupled majorant is a fixed point above eta") {
  Eigen::MatrixXd m(2, 2);
  m << 0.6, 0.4, 0.4, 0.8;
  const auto a = normalize_to_unit_radius(m, 1e-14).a;
  const auto eta = perron_vector(a, 1e-14);
  Eigen::MatrixXd b(2, 2);
  b << 0.1, 0.05, 0.05, 0.2;
  std::vector<NonlinModel> g{NonlinModel::sqrt_power(0.3, eta(0)), NonlinModel::exp_saturation(0.5, eta(1))};
  const auto s = solve_xi(a, b, g, eta, 1e-14);
  Eigen::VectorXd gx(2);
  for (int j = 0; j < 2; ++j) gx(j) = g[j].eval(s.xi(j));
  CHECK(((a + b) * gx - s.xi).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((s.xi.array() > eta.array()).all());
}

TEST_CASE("contraction parameters") {
  const auto p = contraction_params(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, 1.44), PhiModel::power(0.5));
  CHECK(p.sigma == doctest::Approx(0.6944444).epsilon(1e-7));
  const double half = p.sigma / 2.0;
  CHECK(p.k == doctest::Approx((1.0 - std::sqrt(half)) / (1.0 - half)).epsilon(1e-15));
  CHECK(p.k == doctest::Approx(0.629225385719301).epsilon(1e-13));
  const auto q = contraction_params(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, 4.0), PhiModel::power(0.5));
  CHECK(q.sigma == 0.25);
  CHECK(q.k == doctest::Approx(0.7387961).epsilon(1e-7));
  CHECK(q.k == doctest::Approx((1.0 - std::sqrt(0.125)) / 0.875).epsilon(1e-15));
}

TEST_CASE("a priori iteration count") {
  const double sigma = 1.0 / 1.44, k = (1.0 - std::sqrt(sigma / 2)) / (1.0 - sigma / 2);
  // Oracle: scan n directly.
  int n = 1;
  while (std::pow(k, n) * (1.0 - sigma) / (1.0 - k) > 1e-8) ++n;
  CHECK(n == 40);
  CHECK(a_priori_iterations(sigma, k, 1e-8) == n);
  CHECK(a_priori_iterations(sigma, k, 1e-12) > n);
}

TEST_CASE("spectral and majorant stages on the scalar instance") {
  const auto d = build_spectral_data(flagship(), {});
  CHECK(d.radius == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.eta(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(d.b(0, 0) - 0.2) <= 1e-12);
  CHECK(std::abs(d.xi(0) - 1.44) <= 1e-10);
  CHECK(d.sigma == doctest::Approx(1.0 / 1.44).epsilon(1e-10));

  auto scaled = flagship();
  scaled.kernel = scaled.kernel.scaled(2.0);
  CHECK_THROWS_AS(spectral_stage(scaled, {}), SpectralError);
  const auto nk = normalize_kernel(scaled.kernel, 1e-12, 1e-14);
  CHECK(nk.scale == doctest::Approx(2.0).epsilon(1e-12));

  auto unit = flagship();
  unit.weights = {WeightModel::unit()};
  auto data = spectral_stage(unit, {});
  CHECK_THROWS_AS(majorant_stage(data, unit, {}), MajorantError);
}
