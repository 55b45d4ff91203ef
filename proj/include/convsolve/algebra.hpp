#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>

#include "convsolve/kernels.hpp"
#include "convsolve/nonlinearities.hpp"
#include "convsolve/problem.hpp"

namespace convsolve {

// Dominant eigenvalue of an entrywise positive symmetric matrix by power
// iteration from the all-ones vector. Stops when the relative change of the
// eigenvalue estimate is at most tol.
double spectral_radius(const Eigen::MatrixXd& m, double tol, int max_iters = 100000);

struct UnitRadius {
  Eigen::MatrixXd a;
  double scale = 1.0;  // rho of the input
};

UnitRadius normalize_to_unit_radius(const Eigen::MatrixXd& m, double tol);

// Positive eta with A eta = eta, normalised so max_i eta_i = 1. `start`
// replaces the all-ones start vector.
Eigen::VectorXd perron_vector(const Eigen::MatrixXd& a, double tol,
                              const std::optional<Eigen::VectorXd>& start = std::nullopt,
                              int max_iters = 100000);

struct MajorantSolution {
  Eigen::VectorXd xi;
  double start_scale = 0.0;  // s with s * eta a supersolution
  int iterations = 0;
};

// Fixed point of T(tau)_i = sum_j (a_ij + b_ij) G_j(tau_j), reached by
// monotone decreasing iteration from a supersolution s * eta.
MajorantSolution solve_xi(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::span<const NonlinModel> nonlins,
                          const Eigen::VectorXd& eta, double tol, int max_iters = 1000000);

struct ContractionParams {
  double sigma = 0.0;  // min_i eta_i / xi_i
  double k = 0.0;      // (1 - phi(sigma/2)) / (1 - sigma/2)
};

ContractionParams contraction_params(const Eigen::VectorXd& eta, const Eigen::VectorXd& xi, const PhiModel& phi);

// Smallest n >= 1 with k^n (1 - sigma) / (1 - k) <= tol.
int a_priori_iterations(double sigma, double k, double tol);

struct SpectralOptions {
  double quad_tol = 1e-12;
  double tol_eig = 1e-14;
  double tol_alg = 1e-14;
  double radius_tol = 1e-9;  // accepted |rho(A) - 1|
};

struct SpectralData {
  KernelScalars scalars;
  Eigen::MatrixXd a;
  double radius = 1.0;
  Eigen::VectorXd eta;
  Eigen::VectorXd w;
  Eigen::MatrixXd b;
  Eigen::VectorXd xi;
  double sigma = 0.0;
  double k = 0.0;
  double xi_start_scale = 0.0;
  int xi_iterations = 0;
};

// Kernel scalars, radius check and Perron vector (throws SpectralError).
SpectralData spectral_stage(const ProblemSpec& problem, const SpectralOptions& opts);
// B, xi, sigma, k on top of spectral_stage (throws MajorantError).
void majorant_stage(SpectralData& data, const ProblemSpec& problem, const SpectralOptions& opts);
SpectralData build_spectral_data(const ProblemSpec& problem, const SpectralOptions& opts);

struct NormalizedKernel {
  KernelModel kernel;
  double scale = 1.0;  // rho of the original a_ij matrix
};

// Divides the kernel by rho(A) so that the a_ij matrix has unit radius.
NormalizedKernel normalize_kernel(const KernelModel& kernel, double quad_tol, double tol);

}  // namespace convsolve
