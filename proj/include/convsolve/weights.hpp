#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "convsolve/kernels.hpp"

namespace convsolve {

// mu(t) == 1; the weights-disabled variant. Fails condition a) by design.
struct UnitWeight {};

// mu(t) = 1 + eps * exp(-|t|) / sqrt(|t|)
struct ExpSqrtWeight {
  double epsilon = 0.1;
};

// mu(t) = 1 + eps / ((1 + t^2) |t|^alpha)
struct RationalPowerWeight {
  double epsilon = 1.0;
  double alpha = 0.5;
};

// mu(t) - 1 = r(|t|) |t|^(-gamma), with the cofactor r linearly interpolated
// between the samples, held constant on [0, t_first] and zero past t_last.
struct TabulatedExcess {
  std::vector<double> t;
  std::vector<double> cofactor;
  double gamma = 0.0;
};

// Moments of the excess mu - 1 over one cell.
struct CellMoments {
  double m0 = 0.0;  // int (mu - 1) dt
  double m1 = 0.0;  // int (mu - 1) t dt
};

class WeightModel {
 public:
  using Variant = std::variant<UnitWeight, ExpSqrtWeight, RationalPowerWeight, TabulatedExcess>;

  explicit WeightModel(Variant v);

  static WeightModel unit() { return WeightModel(UnitWeight{}); }
  static WeightModel exp_sqrt(double epsilon) { return WeightModel(ExpSqrtWeight{epsilon}); }
  static WeightModel rational_power(double epsilon, double alpha) {
    return WeightModel(RationalPowerWeight{epsilon, alpha});
  }
  // CSV with columns t, mu_minus_1 (t >= 0) and a "# gamma=<value>" line.
  static WeightModel from_csv(const std::string& path);
  // Samples of mu - 1 at t > 0 (t = 0 allowed only when gamma == 0).
  static WeightModel tabulated(std::vector<double> t, std::vector<double> mu_minus_1, double gamma);

  std::string_view name() const noexcept;
  const Variant& variant() const noexcept { return v_; }

  // mu(t). Throws DomainError at the singular point t = 0.
  double eval(double t) const;
  // mu(t) - 1, same domain as eval.
  double excess(double t) const;
  // Exponent gamma of the |t|^(-gamma) singularity at the origin.
  double singular_exponent() const noexcept;

  // int (mu - 1) dt over the whole line.
  double excess_integral() const;
  // int_{|t| > T} (mu - 1) dt.
  double excess_tail(double t) const;

  // Exact cell moments; valid when the cell contains or touches 0.
  CellMoments cell_moments(double t0, double t1) const;
  // Model-independent route: adaptive quadrature after the substitution
  // t = u^(1/(1-gamma)) near the origin. Used for models without closed forms.
  CellMoments cell_moments_numeric(double t0, double t1) const;

  // Largest |t| where the excess is represented; infinity for analytic weights.
  double support_radius() const;

  // Same family with a different epsilon (b1/b2 only).
  WeightModel with_epsilon(double epsilon) const;

 private:
  Variant v_;
};

struct ExcessIntegrals {
  Eigen::VectorXd w;  // int (mu_j - 1) dt
  Eigen::MatrixXd b;  // b_ij = w_j * sup K_ij
};

ExcessIntegrals build_b_matrix(std::span<const WeightModel> weights, const KernelScalars& scalars);

}  // namespace convsolve
