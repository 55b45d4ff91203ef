#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "convsolve/kernels.hpp"
#include "convsolve/nonlinearities.hpp"
#include "convsolve/problem.hpp"
#include "convsolve/weights.hpp"

namespace convsolve {

// Uniform nodes x_m = (m - n_cells/2) h on [-R, R]; 0 is always a node.
struct Grid {
  double radius = 0.0;
  int n_cells = 0;
  double h = 0.0;

  Grid() = default;
  Grid(double r, int cells);

  int size() const noexcept { return n_cells + 1; }
  int center() const noexcept { return n_cells / 2; }
  double node(int m) const noexcept { return (m - n_cells / 2) * h; }
  Eigen::VectorXd nodes() const;
  bool operator==(const Grid& o) const noexcept { return radius == o.radius && n_cells == o.n_cells; }
};

// Number of cells for a target spacing, rounded up to an even count.
int cells_for_spacing(double radius, double h);

// N rows of nodal values; `boundary` is the constant continuation outside
// [-R, R]. It tends to eta as the iteration converges.
struct FieldVector {
  Grid grid;
  Eigen::MatrixXd values;
  Eigen::VectorXd boundary;

  static FieldVector constant(const Grid& g, const Eigen::VectorXd& value, const Eigen::VectorXd& boundary);
  int components() const noexcept { return static_cast<int>(values.rows()); }
};

// Smallest R = r0 * 2^k with kernel tail beyond R/2 times g_bound and the
// excess mass of every weight beyond R/2 both below tol.
double choose_truncation(const KernelModel& kernel, std::span<const WeightModel> weights, double g_bound, double tol,
                         double r0 = 1.0, int max_doublings = 30);

enum class Evaluation { automatic, direct, fft };

class OperatorPlan {
 public:
  const Grid& grid() const noexcept { return grid_; }
  int components() const noexcept { return n_; }
  // K_ij(l h), l = 0..n_cells.
  const std::vector<double>& lags(int i, int j) const { return lags_[static_cast<std::size_t>(i * n_ + j)]; }
  // Quadrature weight of node m for component j: trapezoid plus singular part.
  const std::vector<double>& node_weights(int j) const { return weights_[static_cast<std::size_t>(j)]; }
  // Singular part alone.
  const std::vector<double>& singular_weights(int j) const { return singular_[static_cast<std::size_t>(j)]; }
  // Coefficient of G_j(boundary_j) at node m of row i: kernel mass outside
  // the grid plus the singular weight beyond R.
  const std::vector<double>& continuation(int i, int j) const {
    return continuation_[static_cast<std::size_t>(i * n_ + j)];
  }
  // a_ij; maps the continuation value to its image, boundary' = A G(boundary).
  const Eigen::MatrixXd& kernel_integrals() const noexcept { return a_; }
  // Largest |negative| roundoff that was clipped to zero while building weights.
  double clipped() const noexcept { return clipped_; }

  friend OperatorPlan build_plan(const ProblemSpec& problem, const Grid& grid);
  friend FieldVector apply_operator(const OperatorPlan& plan, const FieldVector& f,
                                    std::span<const NonlinModel> nonlins, Evaluation mode);

 private:
  struct Fft;
  Grid grid_;
  int n_ = 0;
  std::vector<std::vector<double>> lags_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<double>> singular_;
  std::vector<std::vector<double>> continuation_;
  Eigen::MatrixXd a_;
  double clipped_ = 0.0;
  std::shared_ptr<const Fft> fft_;
};

// Discrete operator: trapezoid weights on the grid for the regular part,
// linear-cofactor product weights against exact (mu - 1) cell moments for the
// singular part, and the field held at its boundary value outside [-R, R].
// The continuation term is the exact kernel mass minus the mass the grid
// weights capture, so with mu == 1 a constant field equal to its boundary c
// maps to A G(c) up to roundoff. Rejects any negative weight.
OperatorPlan build_plan(const ProblemSpec& problem, const Grid& grid);

FieldVector apply_operator(const OperatorPlan& plan, const FieldVector& f, std::span<const NonlinModel> nonlins,
                           Evaluation mode = Evaluation::automatic);

}  // namespace convsolve
