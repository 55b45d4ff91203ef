#include <doctest.h>

#include <cmath>
#include <numbers>

#include "convsolve/errors.hpp"
#include "convsolve/kernels.hpp"
#include "test_util.hpp"

using namespace convsolve;

namespace {
const double kPi = std::numbers::pi;
KernelModel unit_gaussian() { return KernelModel::gaussian(Eigen::MatrixXd::Ones(1, 1)); }
}  // namespace

TEST_CASE("gaussian kernel values") {
  const auto k = unit_gaussian();
  CHECK(k.eval(0, 0, 0.0) == doctest::Approx(0.5641896).epsilon(1e-7));
  CHECK(k.eval(0, 0, 0.0) == doctest::Approx(1.0 / std::sqrt(kPi)).epsilon(1e-15));
  for (double t : {0.1, 0.7, 2.5}) CHECK(k.eval(0, 0, t) == k.eval(0, 0, -t));
  CHECK_THROWS_AS(k.eval(1, 0, 0.0), DomainError);
  CHECK_THROWS_AS(k.eval(0, -1, 0.0), DomainError);
}

TEST_CASE("matrix kernels are symmetric and even") {
  Eigen::MatrixXd c(2, 2);
  c << 0.6, 0.3, 0.3, 0.5;
  const auto g = KernelModel::gaussian(c);
  const auto e = KernelModel::exp_mixture(1.0, 3.0, c);
  for (const auto* k : {&g, &e})
    for (double t : {0.0, 0.3, 1.7, 4.0}) {
      CHECK(k->eval(0, 1, t) == k->eval(1, 0, t));
      CHECK(k->eval(0, 1, t) == k->eval(0, 1, -t));
      CHECK(k->eval(0, 1, t) > 0.0);
    }
}

TEST_CASE("gaussian scalars match closed forms") {
  const auto s = kernel_scalars(unit_gaussian(), 1e-12);
  CHECK(std::abs(s.integral(0, 0) - 1.0) <= 1e-12);
  CHECK(std::abs(s.sup(0, 0) - 1.0 / std::sqrt(kPi)) <= 1e-12);
  CHECK(std::abs(s.moment(0, 0) - 0.5 / std::sqrt(kPi)) <= 1e-12);
  CHECK(s.moment(0, 0) == doctest::Approx(0.2820948).epsilon(1e-7));

  const auto half = kernel_scalars(KernelModel::gaussian(Eigen::MatrixXd::Constant(1, 1, 0.5)), 1e-12);
  CHECK(half.integral(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("exp mixture with L = 1 on [1, 2]") {
  const auto k = KernelModel::exp_mixture(1.0, 2.0, Eigen::MatrixXd::Ones(1, 1));
  CHECK(k.eval(0, 0, 0.0) == doctest::Approx(1.0).epsilon(1e-13));
  // int_1^2 e^{-tau s} ds at tau = 1.5, computed directly.
  CHECK(k.eval(0, 0, 1.5) == doctest::Approx((std::exp(-1.5) - std::exp(-3.0)) / 1.5).epsilon(1e-12));
  const auto s = kernel_scalars(k, 1e-12);
  CHECK(s.integral(0, 0) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(s.integral(0, 0) == doctest::Approx(1.3862944).epsilon(1e-7));
  CHECK(s.sup(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.moment(0, 0) == doctest::Approx(0.5).epsilon(1e-12));  // int_1^2 s^-2 ds
}

TEST_CASE("exp mixture with power and decay against tau quadrature") {
  const auto k = KernelModel::exp_mixture(0.5, 4.0, Eigen::MatrixXd::Constant(1, 1, 0.7),
                                          Eigen::MatrixXd::Constant(1, 1, 1.5), Eigen::MatrixXd::Constant(1, 1, 0.3));
  // Oracle: K(tau) by direct s-quadrature, then integrate over tau.
  auto kern = [](double tau) {
    return oracle_integral([tau](double s) { return std::exp(-tau * s) * 0.7 * std::pow(s, 1.5) * std::exp(-0.3 * s); },
                           0.5, 4.0);
  };
  CHECK(k.eval(0, 0, 0.8) == doctest::Approx(kern(0.8)).epsilon(1e-12));
  const double a = 2.0 * oracle_integral(kern, 0.0, std::numeric_limits<double>::infinity());
  const auto s = kernel_scalars(k, 1e-12);
  CHECK(s.integral(0, 0) == doctest::Approx(a).epsilon(1e-10));
  const auto num = kernel_scalars(k, 1e-12, true);
  CHECK(num.integral(0, 0) == doctest::Approx(s.integral(0, 0)).epsilon(1e-9));
  CHECK(num.moment(0, 0) == doctest::Approx(s.moment(0, 0)).epsilon(1e-9));
}

TEST_CASE("infinite s range is truncated with a reported bound") {
  const auto k = KernelModel::exp_mixture(1.0, std::numeric_limits<double>::infinity(), Eigen::MatrixXd::Ones(1, 1),
                                          Eigen::MatrixXd(), Eigen::MatrixXd::Constant(1, 1, 1.0), 40.0);
  // L = e^{-s}: a = int_1^inf 2 e^{-s}/s ds = 2 E1(1).
  const double e1 = oracle_integral([](double s) { return std::exp(-s) / s; }, 1.0, std::numeric_limits<double>::infinity());
  const auto s = kernel_scalars(k, 1e-12);
  CHECK(std::abs(s.integral(0, 0) - 2.0 * e1) <= k.truncation_bound() + 1e-12);
  CHECK(k.truncation_bound() > 0.0);
  CHECK(k.truncation_bound() < 1e-15);
}

TEST_CASE("numeric path agrees with gaussian closed forms") {
  const auto s = kernel_scalars(unit_gaussian(), 1e-12, true);
  CHECK(s.integral(0, 0) == doctest::Approx(1.0).epsilon(1e-11));
  CHECK(s.moment(0, 0) == doctest::Approx(0.5 / std::sqrt(kPi)).epsilon(1e-11));
  CHECK(s.sup(0, 0) == doctest::Approx(1.0 / std::sqrt(kPi)).epsilon(1e-12));
}

TEST_CASE("tail mass") {
  const auto k = unit_gaussian();
  CHECK(k.tail_mass(0, 0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k.tail_mass(0, 0, 3.0) == doctest::Approx(2.209e-5).epsilon(1e-3));
  const double q = 2.0 * oracle_integral([](double t) { return std::exp(-t * t) / std::sqrt(kPi); }, 3.0,
                                         std::numeric_limits<double>::infinity());
  CHECK(k.tail_mass(0, 0, 3.0) == doctest::Approx(q).epsilon(1e-10));
  double prev = 2.0;
  for (double r = 0.0; r < 6.0; r += 0.25) {
    const double t = k.tail_mass(0, 0, r);
    CHECK(t <= prev);
    prev = t;
  }
  const auto e = KernelModel::exp_mixture(1.0, 2.0, Eigen::MatrixXd::Ones(1, 1));
  const double qe = 2.0 * oracle_integral([&](double t) { return e.eval(0, 0, t); }, 2.0,
                                          std::numeric_limits<double>::infinity());
  CHECK(e.tail_mass(0, 0, 2.0) == doctest::Approx(qe).epsilon(1e-10));
  CHECK(e.upper_mass(0, 0, -1.0) == doctest::Approx(e.tail_mass(0, 0, 0.0) - e.upper_mass(0, 0, 1.0)).epsilon(1e-12));
}

TEST_CASE("tabulated kernel from csv") {
  const auto p = write_temp("kernel.csv",
                            "# triangle kernel\ntau,k_1_1,k_1_2,k_2_2\n0,1,0.5,0.8\n1,0.5,0.25,0.4\n2,0,0,0\n");
  const auto k = KernelModel::from_csv(p.string(), 2);
  CHECK(k.size() == 2);
  CHECK(k.eval(0, 0, 0.5) == doctest::Approx(0.75));
  CHECK(k.eval(1, 0, -1.5) == doctest::Approx(0.125));
  CHECK(k.eval(0, 0, 3.0) == 0.0);
  const auto s = kernel_scalars(k, 1e-12);
  // Triangle areas: 2 * (0.75 + 0.25) = 2 for k_11.
  CHECK(s.integral(0, 0) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(s.integral(0, 1) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(s.sup(1, 1) == doctest::Approx(0.8));
  const auto num = kernel_scalars(k, 1e-12, true);
  CHECK(num.integral(1, 1) == doctest::Approx(s.integral(1, 1)).epsilon(1e-11));
  CHECK(k.tail_mass(0, 0, 1.0) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK_THROWS_AS(KernelModel::from_csv(p.string(), 3), StructuralError);
}

TEST_CASE("invalid kernels are rejected") {
  CHECK_THROWS_AS(KernelModel::gaussian(Eigen::MatrixXd::Constant(1, 1, -1.0)), StructuralError);
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.2, 0.3, 1;
  CHECK_THROWS_AS(KernelModel::gaussian(asym), StructuralError);
  CHECK_THROWS_AS(KernelModel::exp_mixture(2.0, 1.0, Eigen::MatrixXd::Ones(1, 1)), StructuralError);
}

TEST_CASE("scaling multiplies every scalar") {
  const auto k = KernelModel::exp_mixture(1.0, 2.0, Eigen::MatrixXd::Ones(1, 1)).scaled(0.25);
  const auto s = kernel_scalars(k, 1e-12);
  CHECK(s.integral(0, 0) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
}
