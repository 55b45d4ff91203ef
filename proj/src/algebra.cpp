#include "convsolve/algebra.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "convsolve/errors.hpp"
#include "convsolve/weights.hpp"

namespace convsolve {

namespace {

void require_positive_square(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() == 0 || m.rows() != m.cols()) throw SpectralError(std::string(what) + ": matrix must be square");
  if (!m.allFinite() || !(m.array() > 0.0).all())
    throw SpectralError(std::string(what) + ": matrix must be entrywise positive");
}

Eigen::VectorXd apply_majorant_map(const Eigen::MatrixXd& ab, std::span<const NonlinModel> nonlins,
                                   const Eigen::VectorXd& tau) {
  Eigen::VectorXd g(tau.size());
  for (Eigen::Index j = 0; j < tau.size(); ++j) g(j) = nonlins[static_cast<std::size_t>(j)].eval(tau(j));
  return ab * g;
}

}  // namespace

double spectral_radius(const Eigen::MatrixXd& m, double tol, int max_iters) {
  require_positive_square(m, "spectral_radius");
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows());
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd mv = m * v;
    const double next = v.dot(mv) / v.dot(v);
    v = mv / mv.maxCoeff();
    if (it > 0 && std::abs(next - lambda) <= tol * std::abs(next)) return next;
    lambda = next;
  }
  throw SpectralError("spectral_radius: power iteration did not converge in " + std::to_string(max_iters) +
                      " iterations");
}

UnitRadius normalize_to_unit_radius(const Eigen::MatrixXd& m, double tol) {
  const double rho = spectral_radius(m, tol);
  return {m / rho, rho};
}

Eigen::VectorXd perron_vector(const Eigen::MatrixXd& a, double tol, const std::optional<Eigen::VectorXd>& start,
                              int max_iters) {
  require_positive_square(a, "perron_vector");
  Eigen::VectorXd v = start ? *start : Eigen::VectorXd::Ones(a.rows());
  if (v.size() != a.rows() || !(v.array() > 0.0).all())
    throw SpectralError("perron_vector: start vector must be positive with matching size");
  v /= v.maxCoeff();
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd av = a * v;
    const double lambda = v.dot(av) / v.dot(v);
    if ((av - lambda * v).lpNorm<Eigen::Infinity>() <= tol) {
      if (std::abs(lambda - 1.0) > 1e-8)
        throw SpectralError("perron_vector: spectral radius is " + std::to_string(lambda) + ", not 1");
      return av / av.maxCoeff();
    }
    v = av / av.maxCoeff();
  }
  throw SpectralError("perron_vector: power iteration did not converge in " + std::to_string(max_iters) +
                      " iterations");
}

MajorantSolution solve_xi(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::span<const NonlinModel> nonlins,
                          const Eigen::VectorXd& eta, double tol, int max_iters) {
  const auto n = a.rows();
  if (b.rows() != n || b.cols() != n || eta.size() != n || static_cast<Eigen::Index>(nonlins.size()) != n)
    throw MajorantError("solve_xi: dimension mismatch");
  if (!(b.array() > 0.0).all()) throw MajorantError("solve_xi: B must be entrywise positive (mu_j - 1 has zero mass?)");
  const Eigen::MatrixXd ab = a + b;

  MajorantSolution out;
  double s = 2.0;
  Eigen::VectorXd tau = s * eta;
  for (int d = 0;; ++d) {
    if (d == 64)
      throw MajorantError("solve_xi: no supersolution s * eta found up to s = 2^64 (superlinear G?)");
    tau = s * eta;
    if ((apply_majorant_map(ab, nonlins, tau).array() <= tau.array()).all()) break;
    s *= 2.0;
  }
  out.start_scale = s;

  for (int it = 1; it <= max_iters; ++it) {
    const Eigen::VectorXd next = apply_majorant_map(ab, nonlins, tau);
    // Concavity makes the iterates nonincreasing; allow only rounding noise.
    const double rise = (next - tau).maxCoeff();
    if (rise > 64.0 * std::numeric_limits<double>::epsilon() * tau.lpNorm<Eigen::Infinity>())
      throw MajorantError("solve_xi: iterate increased by " + std::to_string(rise) + " at step " +
                          std::to_string(it));
    const double step = (tau - next).lpNorm<Eigen::Infinity>();
    tau = next;
    if (step <= tol) {
      out.iterations = it;
      out.xi = tau;
      if (!((out.xi - eta).array() > 0.0).all())
        throw MajorantError("solve_xi: fixed point does not exceed eta componentwise");
      return out;
    }
  }
  throw MajorantError("solve_xi: no convergence in " + std::to_string(max_iters) + " iterations");
}

ContractionParams contraction_params(const Eigen::VectorXd& eta, const Eigen::VectorXd& xi, const PhiModel& phi) {
  if (eta.size() != xi.size() || eta.size() == 0) throw MajorantError("contraction_params: dimension mismatch");
  const double sigma = (eta.array() / xi.array()).minCoeff();
  if (!(sigma > 0.0 && sigma < 1.0))
    throw MajorantError("contraction_params: sigma = " + std::to_string(sigma) + " outside (0, 1)");
  const double k = (1.0 - phi.eval(sigma / 2.0)) / (1.0 - sigma / 2.0);
  if (!(k > 0.0 && k < 1.0))
    throw MajorantError("contraction_params: k = " + std::to_string(k) + " outside (0, 1)");
  return {sigma, k};
}

int a_priori_iterations(double sigma, double k, double tol) {
  if (!(sigma > 0.0 && sigma < 1.0) || !(k > 0.0 && k < 1.0) || !(tol > 0.0))
    throw MajorantError("a_priori_iterations: need sigma, k in (0, 1) and tol > 0");
  const double c = (1.0 - sigma) / (1.0 - k);
  int n = 1;
  while (std::pow(k, n) * c > tol) ++n;
  return n;
}

SpectralData spectral_stage(const ProblemSpec& problem, const SpectralOptions& opts) {
  problem.check_structure();
  SpectralData d;
  try {
    d.scalars = kernel_scalars(problem.kernel, opts.quad_tol);
  } catch (const QuadratureError& e) {
    throw SpectralError(std::string("kernel scalars: ") + e.what());
  }
  d.a = d.scalars.integral;
  d.radius = spectral_radius(d.a, opts.tol_eig);
  if (std::abs(d.radius - 1.0) > opts.radius_tol)
    throw SpectralError("spectral radius of A is " + std::to_string(d.radius) + ", expected 1");
  d.eta = perron_vector(d.a, opts.tol_eig) * problem.eta_scale;
  return d;
}

void majorant_stage(SpectralData& d, const ProblemSpec& problem, const SpectralOptions& opts) {
  const auto ex = build_b_matrix(problem.weights, d.scalars);
  d.w = ex.w;
  d.b = ex.b;
  const auto sol = solve_xi(d.a, d.b, problem.nonlins, d.eta, opts.tol_alg);
  d.xi = sol.xi;
  d.xi_start_scale = sol.start_scale;
  d.xi_iterations = sol.iterations;
  const auto cp = contraction_params(d.eta, d.xi, problem.phi);
  d.sigma = cp.sigma;
  d.k = cp.k;
}

SpectralData build_spectral_data(const ProblemSpec& problem, const SpectralOptions& opts) {
  auto d = spectral_stage(problem, opts);
  majorant_stage(d, problem, opts);
  return d;
}

NormalizedKernel normalize_kernel(const KernelModel& kernel, double quad_tol, double tol) {
  const auto scalars = kernel_scalars(kernel, quad_tol);
  const double rho = spectral_radius(scalars.integral, tol);
  return {kernel.scaled(1.0 / rho), rho};
}

}  // namespace convsolve
