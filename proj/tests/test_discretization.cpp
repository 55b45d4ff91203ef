#include <doctest.h>

#include <cmath>
#include <random>

#include "convsolve/algebra.hpp"
#include "convsolve/discretization.hpp"
#include "convsolve/errors.hpp"
#include "test_problems.hpp"

using namespace convsolve;

namespace {

FieldVector bump_field(const Grid& g, double eta, double xi) {
  FieldVector f = FieldVector::constant(g, Eigen::VectorXd::Constant(1, eta), Eigen::VectorXd::Constant(1, eta));
  for (int m = 0; m < g.size(); ++m) {
    const double x = g.node(m);
    f.values(0, m) = eta + (xi - eta) * std::exp(-x * x / 4.0);
  }
  return f;
}

double sup_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("grid") {
  const Grid g(32.0, 4096);
  CHECK(g.h == 1.0 / 64.0);
  CHECK(g.size() == 4097);
  CHECK(g.node(g.center()) == 0.0);
  CHECK(g.node(0) == -32.0);
  CHECK(g.node(4096) == 32.0);
  for (int m = 0; m < g.size(); ++m) CHECK(g.node(m) == -g.node(g.n_cells - m));
  CHECK_THROWS_AS(Grid(1.0, 3), StructuralError);
  CHECK_THROWS_AS(Grid(1.0, 0), StructuralError);
  CHECK_THROWS_AS(Grid(-1.0, 4), StructuralError);
  CHECK(cells_for_spacing(32.0, 1.0 / 64.0) == 4096);
  CHECK(cells_for_spacing(1.0, 0.3) % 2 == 0);
}

TEST_CASE("truncation radius") {
  const auto p = scalar_problem();
  // Oracle: doubling search with the closed-form tails erfc(R/2) and 0.2 sqrt(pi) erfc(sqrt(R/2)).
  const double g_bound = 1.2, tol = 1e-8;
  double r = 1.0;
  while (!(std::erfc(r / 2) * g_bound <= tol && 0.2 * std::sqrt(M_PI) * std::erfc(std::sqrt(r / 2)) <= tol)) r *= 2;
  CHECK(r == 32.0);
  CHECK(choose_truncation(p.kernel, p.weights, g_bound, tol) == r);
  CHECK(choose_truncation(p.kernel, p.weights, g_bound, tol * 1e6) <= r);

  // A heavy-tailed weight drives R far beyond what the kernel needs.
  std::vector<WeightModel> heavy{WeightModel::exp_sqrt(0.1), WeightModel::rational_power(0.05, 0.5)};
  const auto k2 = KernelModel::gaussian(Eigen::MatrixXd::Constant(2, 2, 0.5));
  const double r_heavy = choose_truncation(k2, heavy, g_bound, 1e-4);
  const double r_kernel = choose_truncation(k2, std::vector<WeightModel>{WeightModel::unit(), WeightModel::unit()},
                                            g_bound, 1e-4);
  CHECK(r_kernel <= 8.0);
  CHECK(r_heavy > r_kernel);
  CHECK(heavy[1].excess_tail(r_heavy / 2) <= 1e-4);
  CHECK(heavy[1].excess_tail(r_heavy / 4) > 1e-4);
  CHECK_THROWS(choose_truncation(p.kernel, heavy, g_bound, 1e-30, 1.0, 5));
}

TEST_CASE("plan weights") {
  const auto p = scalar_problem();
  const Grid g(32.0, 4096);
  const auto plan = build_plan(p, g);
  CHECK(plan.components() == 1);
  // Regular trapezoid mass plus continuation reproduces a = 1 at every node.
  double trap_sum = 0.0;
  for (int n = 0; n < g.size(); ++n) {
    const int l = std::abs(n - g.center());
    trap_sum += plan.lags(0, 0)[l] * g.h * ((n == 0 || n == g.n_cells) ? 0.5 : 1.0);
  }
  CHECK(std::abs(trap_sum - 1.0) <= 1e-12);
  for (double c : plan.continuation(0, 0)) CHECK(c >= 0.0);
  // Singular weights sum to the excess mass inside [-R, R] (hat functions partition unity).
  double s = 0.0;
  for (double v : plan.singular_weights(0)) {
    CHECK(v >= 0.0);
    s += v;
  }
  CHECK(s == doctest::Approx(p.weights[0].excess_integral() - p.weights[0].excess_tail(32.0)).epsilon(1e-12));
  for (int n = 0; n < g.size(); ++n) CHECK(plan.node_weights(0)[n] >= 0.0);
  CHECK(plan.kernel_integrals()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant fields under unit weights") {
  const auto p = with_unit_weights(scalar_problem());
  const Grid g(16.0, 1024);
  const auto plan = build_plan(p, g);
  for (double c : {0.3, 1.0, 2.5}) {
    const auto f = FieldVector::constant(g, Eigen::VectorXd::Constant(1, c), Eigen::VectorXd::Constant(1, c));
    const auto out = apply_operator(plan, f, p.nonlins);
    const double expect = std::sqrt(c);  // a = 1, G(c) = sqrt(c)
    CHECK((out.values.array() - expect).abs().maxCoeff() <= 1e-13);
    CHECK(out.boundary(0) == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("majorant field is a supersolution") {
  const auto p = scalar_problem();
  const Grid g(32.0, 4096);
  const auto plan = build_plan(p, g);
  const auto xi = FieldVector::constant(g, Eigen::VectorXd::Constant(1, 1.44), Eigen::VectorXd::Constant(1, 1.44));
  const auto out = apply_operator(plan, xi, p.nonlins);
  CHECK(out.values.maxCoeff() <= 1.44 + 1e-12);
  CHECK(out.values.minCoeff() >= 1.0);
  CHECK(out.boundary(0) == doctest::Approx(1.2).epsilon(1e-14));
}

TEST_CASE("fast path matches the direct sum") {
  const auto p = scalar_problem();
  const Grid g(32.0, 4096);
  const auto plan = build_plan(p, g);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  auto f = FieldVector::constant(g, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1));
  for (int m = 0; m < g.size(); ++m) f.values(0, m) = u(rng);
  const auto a = apply_operator(plan, f, p.nonlins, Evaluation::direct);
  const auto b = apply_operator(plan, f, p.nonlins, Evaluation::fft);
  CHECK(sup_diff(a.values, b.values) <= 1e-12);
  CHECK(a.boundary(0) == b.boundary(0));
}

TEST_CASE("discrete operator is monotone") {
  const auto p = scalar_problem();
  const Grid g(8.0, 256);
  const auto plan = build_plan(p, g);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 2.0), bump(0.0, 0.5);
  for (int rep = 0; rep < 20; ++rep) {
    auto f = FieldVector::constant(g, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, u(rng)));
    for (int m = 0; m < g.size(); ++m) f.values(0, m) = u(rng);
    auto h = f;
    for (int m = 0; m < g.size(); ++m) h.values(0, m) += bump(rng);
    h.boundary(0) += bump(rng);
    const auto wf = apply_operator(plan, f, p.nonlins);
    const auto wh = apply_operator(plan, h, p.nonlins);
    CHECK((wh.values - wf.values).minCoeff() >= 0.0);
    CHECK(wh.boundary(0) >= wf.boundary(0));
  }
}

TEST_CASE("even inputs give even outputs") {
  const auto p = scalar_problem();
  const Grid g(32.0, 2048);
  const auto plan = build_plan(p, g);
  const auto out = apply_operator(plan, bump_field(g, 1.0, 1.44), p.nonlins);
  for (int m = 0; m < g.size(); ++m) CHECK(std::abs(out.values(0, m) - out.values(0, g.n_cells - m)) <= 1e-12);
}

TEST_CASE("second order under grid refinement") {
  const auto p = scalar_problem();
  std::vector<Eigen::MatrixXd> outs;
  std::vector<Grid> grids;
  for (int cells : {1024, 2048, 4096}) {
    grids.emplace_back(32.0, cells);
    outs.push_back(apply_operator(build_plan(p, grids.back()), bump_field(grids.back(), 1.0, 1.44), p.nonlins).values);
  }
  // Compare on the coarse nodes.
  double e1 = 0.0, e2 = 0.0;
  for (int m = 0; m < grids[0].size(); ++m) {
    e1 = std::max(e1, std::abs(outs[0](0, m) - outs[1](0, 2 * m)));
    e2 = std::max(e2, std::abs(outs[1](0, 2 * m) - outs[2](0, 4 * m)));
  }
  const double order = std::log2(e1 / e2);
  MESSAGE("observed order " << order << " (e1 " << e1 << ", e2 " << e2 << ")");
  CHECK(order >= 1.8);
}

TEST_CASE("doubling R leaves the output within the truncation tolerance") {
  const auto p = scalar_problem();
  const Grid g1(32.0, 4096), g2(64.0, 8192);
  const auto a = apply_operator(build_plan(p, g1), bump_field(g1, 1.0, 1.44), p.nonlins).values;
  const auto b = apply_operator(build_plan(p, g2), bump_field(g2, 1.0, 1.44), p.nonlins).values;
  double d = 0.0;
  for (int m = 0; m < g1.size(); ++m) d = std::max(d, std::abs(a(0, m) - b(0, m + 2048)));
  CHECK(d <= 1e-8);
}

TEST_CASE("plan and field errors") {
  const auto p = scalar_problem();
  const Grid g(4.0, 64);
  const auto plan = build_plan(p, g);
  auto f = FieldVector::constant(g, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1));
  f.values(0, 3) = -0.1;
  CHECK_THROWS_AS(apply_operator(plan, f, p.nonlins), SolveError);
  const auto other = FieldVector::constant(Grid(4.0, 128), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1));
  CHECK_THROWS_AS(apply_operator(plan, other, p.nonlins), SolveError);
}
