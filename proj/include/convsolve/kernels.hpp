#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace convsolve {

// K_ij(tau) = c_ij / sqrt(pi) * exp(-tau^2).
struct GaussianKernel {
  Eigen::MatrixXd coefficients;
};

// K_ij(tau) = int_{s_lo}^{s_hi} exp(-|tau| s) L_ij(s) ds with
// L_ij(s) = c_ij * s^{p_ij} * exp(-q_ij s). An infinite upper bound is cut
// at s_max and the dropped mass is reported through truncation_bound().
struct ExpMixtureKernel {
  double s_lo = 1.0;
  double s_hi = 2.0;
  Eigen::MatrixXd coefficients;
  Eigen::MatrixXd powers;  // p_ij; zero when empty
  Eigen::MatrixXd decays;  // q_ij; zero when empty
  double s_max = 200.0;
};

// Samples of K_ij on tau >= 0 (tau[0] == 0), extended evenly, linearly
// interpolated, zero beyond the last sample. values[i][j] is shared with
// values[j][i].
struct TabulatedKernel {
  std::vector<double> tau;
  std::vector<std::vector<std::vector<double>>> values;
};

class KernelModel {
 public:
  using Variant = std::variant<GaussianKernel, ExpMixtureKernel, TabulatedKernel>;

  explicit KernelModel(Variant v);

  static KernelModel gaussian(Eigen::MatrixXd coefficients);
  static KernelModel exp_mixture(double s_lo, double s_hi, Eigen::MatrixXd coefficients,
                                 Eigen::MatrixXd powers = {}, Eigen::MatrixXd decays = {},
                                 double s_max = 200.0);
  // CSV with columns tau, k_i_j for 1 <= i <= j <= n.
  static KernelModel from_csv(const std::string& path, int n);

  int size() const noexcept { return n_; }
  std::string_view name() const noexcept;
  const Variant& variant() const noexcept { return v_; }

  // Indices are zero-based.
  double eval(int i, int j, double tau) const;
  // int_c^inf K_ij(tau) dtau, for any real c.
  double upper_mass(int i, int j, double c) const;
  // int_{|tau| > R} K_ij(tau) dtau, R >= 0.
  double tail_mass(int i, int j, double r) const;

  // Same kernel with every entry multiplied by `factor`.
  KernelModel scaled(double factor) const;

  // Largest |tau| where the kernel is represented; infinity for analytic kernels.
  double support_radius() const;
  // Upper bound on the a_ij error caused by cutting an infinite s-range.
  double truncation_bound() const;

 private:
  void check_index(int i, int j) const;
  Variant v_;
  int n_ = 0;
};

struct KernelScalars {
  Eigen::MatrixXd integral;  // a_ij
  Eigen::MatrixXd sup;       // sup_tau K_ij
  Eigen::MatrixXd moment;    // int_0^inf tau K_ij
  double error_bound = 0.0;
};

// Closed forms for the builtin kernels, exact segment integrals for tables.
// With force_numeric the integrals are recomputed by adaptive quadrature over
// tau and the supremum by sampling.
KernelScalars kernel_scalars(const KernelModel& model, double quad_tol, bool force_numeric = false);

}  // namespace convsolve
