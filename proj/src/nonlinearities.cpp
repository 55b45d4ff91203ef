#include "convsolve/nonlinearities.hpp"

#include <algorithm>
#include <cmath>

// Boost 1.74 pchip calls unqualified isnan.
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>

#include "convsolve/csv.hpp"
#include "convsolve/errors.hpp"

namespace convsolve {

struct MonotoneTable::Impl {
  boost::math::interpolators::pchip<std::vector<double>> spline;
  double y1;
  double end_slope;
};

MonotoneTable::MonotoneTable(std::vector<double> x, std::vector<double> y) {
  if (x.size() != y.size() || x.size() < 4)
    throw StructuralError("monotone table: need at least four (x, y) rows of equal length");
  for (std::size_t k = 1; k < x.size(); ++k)
    if (!(x[k] > x[k - 1])) throw StructuralError("monotone table: x must be strictly increasing");
  for (double v : y)
    if (!std::isfinite(v)) throw StructuralError("monotone table: values must be finite");
  x0_ = x.front();
  x1_ = x.back();
  const double y1 = y.back();
  boost::math::interpolators::pchip<std::vector<double>> spline(std::move(x), std::move(y));
  const double slope = spline.prime(x1_);
  impl_ = std::make_shared<const Impl>(Impl{std::move(spline), y1, slope});
}

double MonotoneTable::operator()(double x) const {
  if (x > x1_) return impl_->y1 + impl_->end_slope * (x - x1_);
  return impl_->spline(std::max(x, x0_));
}

double MonotoneTable::prime(double x) const {
  if (x >= x1_) return impl_->end_slope;
  return impl_->spline.prime(std::max(x, x0_));
}

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw StructuralError(std::string(what) + " must be positive and finite");
}

double scaled_power(double u, double p, double eta) { return std::pow(u, p) * std::pow(eta, 1.0 - p); }

double saturation_gamma(double eta) { return eta / -std::expm1(-eta); }

}  // namespace

NonlinModel::NonlinModel(Variant v) : v_(std::move(v)) {
  std::visit(
      [](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, TabulatedNonlin>) {
          if (g.table.front_x() != 0.0) throw StructuralError("custom_tabulated: u must start at 0");
        } else {
          require_positive(g.alpha, "nonlinearity alpha");
          require_positive(g.eta, "nonlinearity eta");
          if constexpr (std::is_same_v<T, TwoPowerNonlin>) require_positive(g.beta, "nonlinearity beta");
        }
      },
      v_);
}

NonlinModel NonlinModel::tabulated(std::vector<double> u, std::vector<double> g) {
  return NonlinModel(TabulatedNonlin{MonotoneTable(std::move(u), std::move(g))});
}

NonlinModel NonlinModel::from_csv(const std::string& path) {
  const auto table = read_csv(path);
  return tabulated(table.column("u"), table.column("g"));
}

std::string_view NonlinModel::name() const noexcept {
  switch (v_.index()) {
    case 0: return "c1_power";
    case 1: return "c2_sqrt_power";
    case 2: return "c3_two_powers";
    case 3: return "c4_exp_saturation";
    default: return "custom_tabulated";
  }
}

double NonlinModel::eval(double u) const {
  if (u < 0.0 || std::isnan(u)) throw DomainError(std::string(name()) + ": G(u) needs u >= 0");
  return std::visit(
      [u](const auto& g) -> double {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, PowerNonlin>) {
          return scaled_power(u, g.alpha, g.eta);
        } else if constexpr (std::is_same_v<T, SqrtPowerNonlin>) {
          return 0.5 * (std::sqrt(u * g.eta) + scaled_power(u, g.alpha, g.eta));
        } else if constexpr (std::is_same_v<T, TwoPowerNonlin>) {
          return 0.5 * (scaled_power(u, g.beta, g.eta) + scaled_power(u, g.alpha, g.eta));
        } else if constexpr (std::is_same_v<T, ExpSaturationNonlin>) {
          return saturation_gamma(g.eta) * -std::expm1(-scaled_power(u, g.alpha, g.eta));
        } else {
          return g.table(u);
        }
      },
      v_);
}

double NonlinModel::derivative(double u) const {
  if (!(u > 0.0)) throw DomainError(std::string(name()) + ": G'(u) needs u > 0");
  return std::visit(
      [u](const auto& g) -> double {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, PowerNonlin>) {
          return g.alpha * scaled_power(u, g.alpha, g.eta) / u;
        } else if constexpr (std::is_same_v<T, SqrtPowerNonlin>) {
          return 0.5 * (0.5 * std::sqrt(g.eta / u) + g.alpha * scaled_power(u, g.alpha, g.eta) / u);
        } else if constexpr (std::is_same_v<T, TwoPowerNonlin>) {
          return 0.5 * (g.beta * scaled_power(u, g.beta, g.eta) + g.alpha * scaled_power(u, g.alpha, g.eta)) / u;
        } else if constexpr (std::is_same_v<T, ExpSaturationNonlin>) {
          const double inner = scaled_power(u, g.alpha, g.eta);
          return saturation_gamma(g.eta) * g.alpha * inner / u * std::exp(-inner);
        } else {
          return g.table.prime(u);
        }
      },
      v_);
}

std::optional<double> NonlinModel::declared_eta() const {
  return std::visit(
      [](const auto& g) -> std::optional<double> {
        if constexpr (std::is_same_v<std::decay_t<decltype(g)>, TabulatedNonlin>)
          return std::nullopt;
        else
          return g.eta;
      },
      v_);
}

NonlinModel NonlinModel::with_eta(double eta) const {
  Variant v = v_;
  std::visit(
      [eta, this](auto& g) {
        if constexpr (std::is_same_v<std::decay_t<decltype(g)>, TabulatedNonlin>)
          throw StructuralError(std::string(name()) + ": tabulated nonlinearity has no eta parameter");
        else
          g.eta = eta;
      },
      v);
  return NonlinModel(std::move(v));
}

PhiModel::PhiModel(Variant v) : v_(std::move(v)) {
  if (const auto* p = std::get_if<PowerPhi>(&v_)) {
    if (!(p->exponent > 0.0 && p->exponent <= 1.0)) throw StructuralError("phi exponent must lie in (0, 1]");
  } else {
    const auto& t = std::get<TabulatedPhi>(v_).table;
    if (t.front_x() != 0.0 || t.back_x() != 1.0) throw StructuralError("tabulated phi must cover [0, 1]");
  }
}

PhiModel PhiModel::from_csv(const std::string& path) {
  const auto table = read_csv(path);
  return PhiModel(TabulatedPhi{MonotoneTable(table.column("sigma"), table.column("phi"))});
}

PhiModel PhiModel::paired_with(const NonlinModel& nl) {
  return std::visit(
      [&nl](const auto& g) -> PhiModel {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, PowerNonlin> || std::is_same_v<T, ExpSaturationNonlin>) {
          return power(std::min(g.alpha, 1.0));
        } else if constexpr (std::is_same_v<T, SqrtPowerNonlin>) {
          return power(std::min(std::max(0.5, g.alpha), 1.0));
        } else if constexpr (std::is_same_v<T, TwoPowerNonlin>) {
          return power(std::min(std::max(g.alpha, g.beta), 1.0));
        } else {
          throw StructuralError(std::string(nl.name()) + ": no builtin phi pairing; declare phi explicitly");
        }
      },
      nl.variant());
}

std::string_view PhiModel::name() const noexcept { return v_.index() == 0 ? "power" : "custom"; }

double PhiModel::eval(double sigma) const {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw DomainError("phi(sigma) needs sigma in [0, 1]");
  if (const auto* p = std::get_if<PowerPhi>(&v_)) return std::pow(sigma, p->exponent);
  return std::get<TabulatedPhi>(v_).table(sigma);
}

ConditionIvResult check_condition_iv(const NonlinModel& nl, const PhiModel& phi, double eta_j, double xi_j,
                                     int samples, double tol) {
  if (!(xi_j > eta_j) || !(eta_j > 0.0)) throw DomainError("condition IV check needs 0 < eta_j < xi_j");
  if (samples < 2) throw DomainError("condition IV check needs at least two samples");
  std::vector<double> sigmas;
  for (int a = 0; a < samples; ++a) {
    sigmas.push_back(static_cast<double>(a) / (samples - 1));
    sigmas.push_back(std::pow(10.0, -8.0 + 8.0 * a / (samples - 1)));
  }
  std::sort(sigmas.begin(), sigmas.end());
  ConditionIvResult r{true, std::numeric_limits<double>::infinity(), 1.0, eta_j};
  for (int b = 0; b < samples; ++b) {
    const double u = eta_j + (xi_j - eta_j) * b / (samples - 1);
    const double gu = nl.eval(u);
    for (double s : sigmas) {
      const double margin = nl.eval(s * u) - phi.eval(s) * gu;
      if (margin < r.worst_margin) r = {true, margin, s, u};
    }
  }
  r.pass = r.worst_margin >= -tol;
  return r;
}

double chord_slope_gap(const NonlinModel& nl, double u_lo, double u_hi) {
  if (!(u_lo > 0.0) || !(u_hi > u_lo)) throw DomainError("chord_slope_gap needs 0 < u_lo < u_hi");
  const double g_lo = nl.eval(u_lo);
  return g_lo / u_lo - (nl.eval(u_hi) - g_lo) / (u_hi - u_lo);
}

}  // namespace convsolve
