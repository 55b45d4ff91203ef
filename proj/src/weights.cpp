#include "convsolve/weights.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "convsolve/csv.hpp"
#include "convsolve/errors.hpp"

namespace convsolve {

namespace {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrtPi = std::sqrt(std::numbers::pi);

template <class F>
double adaptive(F&& f, double a, double b, double tol = 1e-14) {
  double err = 0.0;
  double v = 0.0;
  if (std::isinf(b) && std::isfinite(a)) {
    // Slow algebraic tails (b2 moments decay like t^(-1-alpha)) defeat the mapped GK rule.
    thread_local boost::math::quadrature::exp_sinh<double> rule;
    // Far abscissas overflow t = u^p into inf * 0; the integrand is negligible there.
    auto guarded = [&](double x) {
      const double y = f(x);
      return (x > 1e100 && !std::isfinite(y)) ? 0.0 : y;
    };
    v = rule.integrate(guarded, a, b, tol, &err);
  } else {
    v = gauss_kronrod<double, 31>::integrate(f, a, b, 25, tol, &err);
  }
  if (!std::isfinite(v)) throw QuadratureError("weight quadrature diverged");
  return v;
}

// int_a^b e^{-t} t^{-1/2} dt for 0 <= a <= b, stable for large arguments.
double lower_gamma_half_diff(double a, double b) {
  const double ra = std::sqrt(a);
  const double rb = std::sqrt(b);
  if (ra > 0.5) return kSqrtPi * (std::erfc(ra) - std::erfc(rb));
  return kSqrtPi * (std::erf(rb) - std::erf(ra));
}

// Exact moments of (c0 + c1 t) t^{-g} over [a, b] with 0 <= a < b.
CellMoments linear_cofactor_moments(double c0, double c1, double g, double a, double b) {
  if (a <= 0.5 * b) {
    auto prim = [&](double t, double p) { return t > 0.0 ? std::pow(t, p) / p : 0.0; };
    const double m0 = c0 * (prim(b, 1.0 - g) - prim(a, 1.0 - g)) + c1 * (prim(b, 2.0 - g) - prim(a, 2.0 - g));
    const double m1 = c0 * (prim(b, 2.0 - g) - prim(a, 2.0 - g)) + c1 * (prim(b, 3.0 - g) - prim(a, 3.0 - g));
    return {m0, m1};
  }
  auto f0 = [&](double t) { return (c0 + c1 * t) * std::pow(t, -g); };
  auto f1 = [&](double t) { return (c0 + c1 * t) * std::pow(t, 1.0 - g); };
  return {gauss<double, 20>::integrate(f0, a, b), gauss<double, 20>::integrate(f1, a, b)};
}

}  // namespace

WeightModel::WeightModel(Variant v) : v_(std::move(v)) {
  std::visit(
      [](auto& w) {
        using T = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<T, ExpSqrtWeight>) {
          if (!(w.epsilon > 0.0) || !std::isfinite(w.epsilon))
            throw StructuralError("b1_exp_sqrt: epsilon must be positive");
        } else if constexpr (std::is_same_v<T, RationalPowerWeight>) {
          if (!(w.epsilon > 0.0) || !std::isfinite(w.epsilon))
            throw StructuralError("b2_rational_alpha: epsilon must be positive");
          if (!(w.alpha > 0.0 && w.alpha < 1.0))
            throw StructuralError("b2_rational_alpha: alpha must lie in (0, 1)");
        } else if constexpr (std::is_same_v<T, TabulatedExcess>) {
          if (w.t.size() < 2 || w.t.size() != w.cofactor.size())
            throw StructuralError("tabulated_excess: need at least two (t, value) rows");
          if (!(w.gamma >= 0.0 && w.gamma < 1.0))
            throw StructuralError("tabulated_excess: gamma must lie in [0, 1)");
          if (w.t.front() < 0.0 || (w.gamma > 0.0 && w.t.front() == 0.0))
            throw StructuralError("tabulated_excess: t must be positive (t = 0 only allowed when gamma = 0)");
          for (std::size_t k = 1; k < w.t.size(); ++k)
            if (!(w.t[k] > w.t[k - 1])) throw StructuralError("tabulated_excess: t must be strictly increasing");
          for (double c : w.cofactor)
            if (!(c >= 0.0) || !std::isfinite(c))
              throw StructuralError("tabulated_excess: values must be finite and nonnegative");
        }
      },
      v_);
}

WeightModel WeightModel::tabulated(std::vector<double> t, std::vector<double> mu_minus_1, double gamma) {
  if (t.size() != mu_minus_1.size()) throw StructuralError("tabulated_excess: column lengths differ");
  TabulatedExcess w{std::move(t), std::move(mu_minus_1), gamma};
  for (std::size_t k = 0; k < w.t.size(); ++k)
    if (w.t[k] > 0.0) w.cofactor[k] *= std::pow(w.t[k], gamma);
  return WeightModel(std::move(w));
}

WeightModel WeightModel::from_csv(const std::string& path) {
  const auto table = read_csv(path);
  const auto it = table.meta.find("gamma");
  if (it == table.meta.end())
    throw StructuralError(path + ": tabulated excess must declare its singularity exponent ('# gamma=...')");
  double gamma = 0.0;
  try {
    gamma = std::stod(it->second);
  } catch (const std::exception&) {
    throw StructuralError(path + ": unreadable gamma '" + it->second + "'");
  }
  return tabulated(table.column("t"), table.column("mu_minus_1"), gamma);
}

std::string_view WeightModel::name() const noexcept {
  switch (v_.index()) {
    case 0: return "unit";
    case 1: return "b1_exp_sqrt";
    case 2: return "b2_rational_alpha";
    default: return "tabulated_excess";
  }
}

double WeightModel::singular_exponent() const noexcept {
  switch (v_.index()) {
    case 0: return 0.0;
    case 1: return 0.5;
    case 2: return std::get<RationalPowerWeight>(v_).alpha;
    default: return std::get<TabulatedExcess>(v_).gamma;
  }
}

namespace {

// (mu - 1) * t^gamma for t >= 0; bounded at the origin.
double cofactor(const WeightModel::Variant& v, double t) {
  if (std::holds_alternative<UnitWeight>(v)) return 0.0;
  if (const auto* b1 = std::get_if<ExpSqrtWeight>(&v)) return b1->epsilon * std::exp(-t);
  if (const auto* b2 = std::get_if<RationalPowerWeight>(&v)) return b2->epsilon / (1.0 + t * t);
  const auto& tab = std::get<TabulatedExcess>(v);
  if (t > tab.t.back()) return 0.0;
  if (t <= tab.t.front()) return tab.cofactor.front();
  const auto k = static_cast<std::size_t>(std::upper_bound(tab.t.begin(), tab.t.end(), t) - tab.t.begin());
  if (k >= tab.t.size()) return tab.cofactor.back();
  const double w = (t - tab.t[k - 1]) / (tab.t[k] - tab.t[k - 1]);
  return (1.0 - w) * tab.cofactor[k - 1] + w * tab.cofactor[k];
}

}  // namespace

double WeightModel::excess(double t) const {
  if (std::holds_alternative<UnitWeight>(v_)) return 0.0;
  const double a = std::abs(t);
  const double g = singular_exponent();
  if (a == 0.0) {
    if (g > 0.0 || !std::holds_alternative<TabulatedExcess>(v_))
      throw DomainError(std::string(name()) + ": weight is singular at t = 0; use cell moments");
    return cofactor(v_, 0.0);
  }
  return cofactor(v_, a) * std::pow(a, -g);
}

double WeightModel::eval(double t) const { return 1.0 + excess(t); }

double WeightModel::support_radius() const {
  if (const auto* tab = std::get_if<TabulatedExcess>(&v_)) return tab->t.back();
  return kInf;
}

namespace {

CellMoments positive_moments_numeric(const WeightModel::Variant& v, double g, double t0, double t1) {
  if (t1 <= t0) return {};
  if (t0 == 0.0 && g > 0.0) {
    // t = u^{1/(1-g)}: (mu - 1) dt = cofactor(t) du / (1 - g)
    const double p = 1.0 / (1.0 - g);
    const double u1 = std::pow(t1, 1.0 - g);
    auto f0 = [&](double u) { return cofactor(v, std::pow(u, p)); };
    auto f1 = [&](double u) {
      const double t = std::pow(u, p);
      return cofactor(v, t) * t;
    };
    return {adaptive(f0, 0.0, u1) * p, adaptive(f1, 0.0, u1) * p};
  }
  auto e = [&](double t) { return cofactor(v, t) * std::pow(t, -g); };
  return {adaptive(e, t0, t1), adaptive([&](double t) { return e(t) * t; }, t0, t1)};
}

CellMoments positive_moments_exact(const WeightModel::Variant& v, double g, double t0, double t1) {
  if (t1 <= t0 || std::holds_alternative<UnitWeight>(v)) return {};
  if (const auto* b1 = std::get_if<ExpSqrtWeight>(&v)) {
    const double gdiff = lower_gamma_half_diff(t0, t1);
    const double edge = std::sqrt(t1) * std::exp(-t1) - std::sqrt(t0) * std::exp(-t0);
    return {b1->epsilon * gdiff, b1->epsilon * (0.5 * gdiff - edge)};
  }
  if (std::holds_alternative<RationalPowerWeight>(v)) return positive_moments_numeric(v, g, t0, t1);
  const auto& tab = std::get<TabulatedExcess>(v);
  CellMoments acc;
  auto add_piece = [&](double a, double b, double c0, double c1) {
    a = std::max(a, t0);
    b = std::min(b, t1);
    if (b <= a) return;
    const auto m = linear_cofactor_moments(c0, c1, g, a, b);
    acc.m0 += m.m0;
    acc.m1 += m.m1;
  };
  add_piece(0.0, tab.t.front(), tab.cofactor.front(), 0.0);
  for (std::size_t k = 0; k + 1 < tab.t.size(); ++k) {
    const double slope = (tab.cofactor[k + 1] - tab.cofactor[k]) / (tab.t[k + 1] - tab.t[k]);
    add_piece(tab.t[k], tab.t[k + 1], tab.cofactor[k] - slope * tab.t[k], slope);
  }
  return acc;
}

template <class Positive>
CellMoments signed_moments(double t0, double t1, Positive&& positive) {
  if (t1 < t0) throw DomainError("cell moments: need t0 <= t1");
  if (t1 == t0) return {};
  if (t1 <= 0.0) {
    const auto r = positive(-t1, -t0);
    return {r.m0, -r.m1};
  }
  if (t0 < 0.0) {
    const auto left = positive(0.0, -t0);
    const auto right = positive(0.0, t1);
    return {left.m0 + right.m0, right.m1 - left.m1};
  }
  return positive(t0, t1);
}

}  // namespace

CellMoments WeightModel::cell_moments(double t0, double t1) const {
  const double g = singular_exponent();
  return signed_moments(t0, t1, [&](double a, double b) { return positive_moments_exact(v_, g, a, b); });
}

CellMoments WeightModel::cell_moments_numeric(double t0, double t1) const {
  const double g = singular_exponent();
  return signed_moments(t0, t1, [&](double a, double b) {
    if (std::holds_alternative<UnitWeight>(v_)) return CellMoments{};
    // Split at table knots so the adaptive rule never straddles a kink.
    if (const auto* tab = std::get_if<TabulatedExcess>(&v_)) {
      std::vector<double> cuts{a};
      for (double k : tab->t)
        if (k > a && k < b) cuts.push_back(k);
      cuts.push_back(std::min(b, std::max(a, tab->t.back())));
      CellMoments acc;
      for (std::size_t q = 0; q + 1 < cuts.size(); ++q) {
        const auto m = positive_moments_numeric(v_, g, cuts[q], cuts[q + 1]);
        acc.m0 += m.m0;
        acc.m1 += m.m1;
      }
      return acc;
    }
    return positive_moments_numeric(v_, g, a, b);
  });
}

double WeightModel::excess_integral() const {
  if (std::holds_alternative<UnitWeight>(v_)) return 0.0;
  if (const auto* b1 = std::get_if<ExpSqrtWeight>(&v_)) return 2.0 * b1->epsilon * kSqrtPi;
  if (const auto* b2 = std::get_if<RationalPowerWeight>(&v_))
    return b2->epsilon * std::numbers::pi / std::cos(std::numbers::pi * b2->alpha / 2.0);
  const auto& tab = std::get<TabulatedExcess>(v_);
  return 2.0 * positive_moments_exact(v_, tab.gamma, 0.0, tab.t.back()).m0;
}

double WeightModel::excess_tail(double t) const {
  if (t < 0.0) throw DomainError("excess_tail: T must be nonnegative");
  if (t == 0.0) return excess_integral();
  if (std::holds_alternative<UnitWeight>(v_)) return 0.0;
  if (const auto* b1 = std::get_if<ExpSqrtWeight>(&v_))
    return 2.0 * b1->epsilon * kSqrtPi * std::erfc(std::sqrt(t));
  if (const auto* b2 = std::get_if<RationalPowerWeight>(&v_)) {
    const double a = b2->alpha;
    const double v = adaptive([a](double s) { return std::pow(s, -a) / (1.0 + s * s); }, t, kInf, 1e-12);
    return 2.0 * b2->epsilon * v;
  }
  const auto& tab = std::get<TabulatedExcess>(v_);
  if (t >= tab.t.back()) return 0.0;
  return 2.0 * positive_moments_exact(v_, tab.gamma, t, tab.t.back()).m0;
}

WeightModel WeightModel::with_epsilon(double epsilon) const {
  if (std::holds_alternative<ExpSqrtWeight>(v_)) return exp_sqrt(epsilon);
  if (const auto* b2 = std::get_if<RationalPowerWeight>(&v_)) return rational_power(epsilon, b2->alpha);
  throw StructuralError(std::string(name()) + ": weight has no epsilon parameter");
}

ExcessIntegrals build_b_matrix(std::span<const WeightModel> weights, const KernelScalars& scalars) {
  const auto n = static_cast<Eigen::Index>(weights.size());
  if (n != scalars.sup.rows() || n != scalars.sup.cols())
    throw StructuralError("build_b_matrix: " + std::to_string(n) + " weights for a " +
                          std::to_string(scalars.sup.rows()) + "x" + std::to_string(scalars.sup.cols()) +
                          " kernel");
  ExcessIntegrals out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index j = 0; j < n; ++j) out.w(j) = weights[static_cast<std::size_t>(j)].excess_integral();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out.b(i, j) = out.w(j) * scalars.sup(i, j);
  return out;
}

}  // namespace convsolve
