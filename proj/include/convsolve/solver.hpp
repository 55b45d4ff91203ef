#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "convsolve/algebra.hpp"
#include "convsolve/discretization.hpp"

namespace convsolve {

struct SolveOptions {
  double tol_stop = 1e-8;
  int max_iters = 10000;
  // Allowed discrete violation of monotonicity and of the [eta, xi] bounds.
  // Unset means 10 times the measured quadrature error.
  std::optional<double> mono_slack;
  bool use_a_priori = true;
  Evaluation evaluation = Evaluation::automatic;
};

// One step f^(n-1) -> f^(n).
struct TraceStep {
  int n = 0;
  double diff = 0.0;        // d_n = max_i sup_m |f^(n) - f^(n-1)|
  double envelope = 0.0;    // k^n (1 - sigma) / (1 - k)
  double rate_bound = 0.0;  // k^(n-1) (1 - sigma), the per-step bound for this step
  double mono_violation = 0.0;   // max (f^(n) - f^(n-1)), 0 when nonincreasing
  double lower_violation = 0.0;  // max (eta - f^(n))
  double upper_violation = 0.0;  // max (f^(n) - xi)
  int violation_count = 0;       // nodes with any positive violation (all within slack)
};

struct IterationTrace {
  std::vector<TraceStep> steps;
  double max_mono_violation() const;
  double max_lower_violation() const;
  double max_upper_violation() const;
  int total_violations() const;
};

enum class Termination { converged, a_priori, max_iterations };
std::string to_string(Termination t);

struct Asymptotics {
  double edge_left = 0.0;      // |f_i(-R) - eta_i|
  double edge_right = 0.0;     // |f_i(R) - eta_i|
  double tail_integral = 0.0;  // int_{R/2 < |x| < R} |f_i - eta_i|
  double half_tail_ratio = 0.0;  // outer quarter over inner quarter of that band
};

struct SolutionReport {
  FieldVector field;
  int iterations = 0;
  int a_priori_iterations = 0;
  Termination termination = Termination::max_iterations;
  double residual = 0.0;
  double quadrature_error = 0.0;
  double mono_slack = 0.0;
  IterationTrace trace;
  std::vector<Asymptotics> asymptotics;
  std::optional<double> uniqueness_deviation;
};

// ||W eta - eta|| for the mu == 1 version of the problem on the same grid,
// floored at a few ulps of max xi. The default slack scale.
double estimate_quadrature_error(const ProblemSpec& problem, const Grid& grid, const SpectralData& spectral,
                                 Evaluation mode = Evaluation::automatic);

// Successive approximations from `start` (xi everywhere in solve), asserting monotone
// decrease and the [eta, xi] bounds at every step within the slack.
SolutionReport iterate(const ProblemSpec& problem, const SpectralData& spectral, const OperatorPlan& plan,
                       const FieldVector& start, const SolveOptions& opts, double quadrature_error);

SolutionReport solve(const ProblemSpec& problem, const SpectralData& spectral, const OperatorPlan& plan,
                     const SolveOptions& opts);

// Restarts from scale * xi after checking it is a supersolution and returns
// the sup distance between the two limits. Stores it in `base`.
double uniqueness_probe(const ProblemSpec& problem, const SpectralData& spectral, const OperatorPlan& plan,
                        SolutionReport& base, double scale, const SolveOptions& opts);

std::vector<Asymptotics> asymptotics_report(const FieldVector& f, const Eigen::VectorXd& eta);

// sup of |f - W f| over the nodes and the continuation value.
double residual(const OperatorPlan& plan, const FieldVector& f, std::span<const NonlinModel> nonlins,
                Evaluation mode = Evaluation::automatic);

}  // namespace convsolve
