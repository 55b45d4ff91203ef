#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace convsolve {

// c1: G(u) = u^alpha eta^(1-alpha)
struct PowerNonlin {
  double alpha = 0.5;
  double eta = 1.0;
};

// c2: G(u) = (sqrt(u eta) + u^alpha eta^(1-alpha)) / 2
struct SqrtPowerNonlin {
  double alpha = 0.5;
  double eta = 1.0;
};

// c3: G(u) = (u^beta eta^(1-beta) + u^alpha eta^(1-alpha)) / 2
struct TwoPowerNonlin {
  double alpha = 0.5;
  double beta = 0.5;
  double eta = 1.0;
};

// c4: G(u) = gamma (1 - exp(-u^alpha eta^(1-alpha))), gamma = eta / (1 - exp(-eta))
struct ExpSaturationNonlin {
  double alpha = 0.5;
  double eta = 1.0;
};

// Monotone piecewise-cubic (PCHIP) interpolant through (u, g) samples with
// u[0] == 0, extended linearly past the last sample with the end slope.
class MonotoneTable {
 public:
  MonotoneTable(std::vector<double> x, std::vector<double> y);
  double operator()(double x) const;
  double prime(double x) const;
  double front_x() const noexcept { return x0_; }
  double back_x() const noexcept { return x1_; }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  double x0_ = 0.0;
  double x1_ = 0.0;
};

struct TabulatedNonlin {
  MonotoneTable table;
};

class NonlinModel {
 public:
  using Variant = std::variant<PowerNonlin, SqrtPowerNonlin, TwoPowerNonlin, ExpSaturationNonlin, TabulatedNonlin>;

  explicit NonlinModel(Variant v);

  static NonlinModel power(double alpha, double eta) { return NonlinModel(PowerNonlin{alpha, eta}); }
  static NonlinModel sqrt_power(double alpha, double eta) { return NonlinModel(SqrtPowerNonlin{alpha, eta}); }
  static NonlinModel two_powers(double alpha, double beta, double eta) {
    return NonlinModel(TwoPowerNonlin{alpha, beta, eta});
  }
  static NonlinModel exp_saturation(double alpha, double eta) {
    return NonlinModel(ExpSaturationNonlin{alpha, eta});
  }
  static NonlinModel tabulated(std::vector<double> u, std::vector<double> g);
  // CSV with columns u, g.
  static NonlinModel from_csv(const std::string& path);

  std::string_view name() const noexcept;
  const Variant& variant() const noexcept { return v_; }

  // G(u); throws DomainError for u < 0.
  double eval(double u) const;
  // G'(u) for u > 0. Diagnostics only; the solver never differentiates.
  double derivative(double u) const;

  // The eta parameter of the family (absent for tables).
  std::optional<double> declared_eta() const;
  // Same family rebuilt around a different eta.
  NonlinModel with_eta(double eta) const;

 private:
  Variant v_;
};

// sigma^p
struct PowerPhi {
  double exponent = 0.5;
};

struct TabulatedPhi {
  MonotoneTable table;
};

class PhiModel {
 public:
  using Variant = std::variant<PowerPhi, TabulatedPhi>;

  explicit PhiModel(Variant v);
  static PhiModel power(double exponent) { return PhiModel(PowerPhi{exponent}); }
  // CSV with columns sigma, phi covering [0, 1].
  static PhiModel from_csv(const std::string& path);
  // The pairing used with each builtin family: alpha for c1/c4,
  // max(1/2, alpha) for c2, max(alpha, beta) for c3.
  static PhiModel paired_with(const NonlinModel& nl);

  std::string_view name() const noexcept;
  const Variant& variant() const noexcept { return v_; }

  // phi(sigma); throws DomainError outside [0, 1].
  double eval(double sigma) const;

 private:
  Variant v_;
};

struct ConditionIvResult {
  bool pass = false;
  double worst_margin = 0.0;  // min of G(sigma u) - phi(sigma) G(u)
  double worst_sigma = 0.0;
  double worst_u = 0.0;
};

// Samples G(sigma u) >= phi(sigma) G(u) on [0, 1] x [eta_j, xi_j]. The sigma
// axis mixes a uniform and a logarithmic grid so small sigma is probed.
ConditionIvResult check_condition_iv(const NonlinModel& nl, const PhiModel& phi, double eta_j, double xi_j,
                                     int samples, double tol = 1e-12);

// G(lo)/lo - (G(hi) - G(lo))/(hi - lo); positive for strictly concave G with G(0) = 0.
double chord_slope_gap(const NonlinModel& nl, double u_lo, double u_hi);

}  // namespace convsolve
