#include "convsolve/kernels.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "convsolve/csv.hpp"
#include "convsolve/errors.hpp"

namespace convsolve {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
double integrate(F&& f, double a, double b, double tol) {
  double err = 0.0;
  const double v = gauss_kronrod<double, 61>::integrate(f, a, b, 20, tol, &err);
  if (!std::isfinite(v) || !std::isfinite(err) || err > 1e3 * tol * std::max(1.0, std::abs(v)))
    throw QuadratureError("kernel quadrature did not settle on [" + std::to_string(a) + ", " +
                          std::to_string(b) + "]");
  return v;
}

bool symmetric(const Eigen::MatrixXd& m) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() == 0.0;
}

struct ExpMixtureOps {
  const ExpMixtureKernel& k;

  double s_end() const { return std::isinf(k.s_hi) ? std::max(k.s_max, k.s_lo) : k.s_hi; }
  double p(int i, int j) const { return k.powers.size() ? k.powers(i, j) : 0.0; }
  double q(int i, int j) const { return k.decays.size() ? k.decays(i, j) : 0.0; }
  double profile(int i, int j, double s) const {
    return k.coefficients(i, j) * std::pow(s, p(i, j)) * std::exp(-q(i, j) * s);
  }
  template <class G>
  double s_integral(int i, int j, G&& g, double tol = 1e-14) const {
    return integrate([&](double s) { return profile(i, j, s) * g(s); }, k.s_lo, s_end(), tol);
  }
};

// Exact integral of a linear segment between (x0, y0) and (x1, y1) over [a, b].
double segment_integral(double x0, double y0, double x1, double y1, double a, double b) {
  if (b <= a) return 0.0;
  const double slope = (y1 - y0) / (x1 - x0);
  const double ya = y0 + slope * (a - x0);
  const double yb = y0 + slope * (b - x0);
  return 0.5 * (ya + yb) * (b - a);
}

double table_interp(const std::vector<double>& x, const std::vector<double>& y, double t) {
  if (t > x.back()) return 0.0;
  const auto it = std::upper_bound(x.begin(), x.end(), t);
  if (it == x.end()) return y.back();
  const auto k = static_cast<std::size_t>(it - x.begin());
  if (k == 0) return y.front();
  const double w = (t - x[k - 1]) / (x[k] - x[k - 1]);
  return (1.0 - w) * y[k - 1] + w * y[k];
}

// int_c^T of the interpolant, c >= 0.
double table_upper(const std::vector<double>& x, const std::vector<double>& y, double c) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double a = std::max(c, x[k]);
    if (a >= x[k + 1]) continue;
    acc += segment_integral(x[k], y[k], x[k + 1], y[k + 1], a, x[k + 1]);
  }
  return acc;
}

}  // namespace

KernelModel::KernelModel(Variant v) : v_(std::move(v)) {
  std::visit(
      [this](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, GaussianKernel>) {
          n_ = static_cast<int>(k.coefficients.rows());
          if (n_ < 1 || !symmetric(k.coefficients))
            throw StructuralError("gaussian_a1: coefficient matrix must be square and symmetric");
          if (!(k.coefficients.array() > 0.0).all() || !k.coefficients.allFinite())
            throw StructuralError("gaussian_a1: coefficients must be positive and finite");
        } else if constexpr (std::is_same_v<T, ExpMixtureKernel>) {
          n_ = static_cast<int>(k.coefficients.rows());
          if (n_ < 1 || !symmetric(k.coefficients))
            throw StructuralError("exp_mixture_a2: coefficient matrix must be square and symmetric");
          if (!(k.coefficients.array() > 0.0).all())
            throw StructuralError("exp_mixture_a2: coefficients must be positive");
          for (const auto* m : {&k.powers, &k.decays})
            if (m->size() && (m->rows() != n_ || !symmetric(*m)))
              throw StructuralError("exp_mixture_a2: power/decay matrices must match the coefficients");
          if (!(k.s_lo > 0.0) || !(k.s_hi > k.s_lo))
            throw StructuralError("exp_mixture_a2: need 0 < a < b");
          if (std::isinf(k.s_hi) && !(k.s_max > k.s_lo))
            throw StructuralError("exp_mixture_a2: s_max must exceed a");
        } else {
          n_ = static_cast<int>(k.values.size());
          if (n_ < 1) throw StructuralError("tabulated kernel: no entries");
          if (k.tau.size() < 2 || k.tau.front() != 0.0)
            throw StructuralError("tabulated kernel: tau must start at 0 with at least two rows");
          if (!std::is_sorted(k.tau.begin(), k.tau.end()) ||
              std::adjacent_find(k.tau.begin(), k.tau.end()) != k.tau.end())
            throw StructuralError("tabulated kernel: tau must be strictly increasing");
          for (const auto& row : k.values) {
            if (static_cast<int>(row.size()) != n_)
              throw StructuralError("tabulated kernel: value matrix must be square");
            for (const auto& col : row) {
              if (col.size() != k.tau.size())
                throw StructuralError("tabulated kernel: column length differs from tau");
              for (double v : col)
                if (!(v >= 0.0) || !std::isfinite(v))
                  throw StructuralError("tabulated kernel: values must be finite and nonnegative");
            }
          }
        }
      },
      v_);
}

KernelModel KernelModel::gaussian(Eigen::MatrixXd coefficients) {
  return KernelModel(GaussianKernel{std::move(coefficients)});
}

KernelModel KernelModel::exp_mixture(double s_lo, double s_hi, Eigen::MatrixXd coefficients,
                                     Eigen::MatrixXd powers, Eigen::MatrixXd decays, double s_max) {
  return KernelModel(ExpMixtureKernel{s_lo, s_hi, std::move(coefficients), std::move(powers),
                                      std::move(decays), s_max});
}

KernelModel KernelModel::from_csv(const std::string& path, int n) {
  if (n < 1) throw StructuralError("tabulated kernel: n must be positive");
  const auto table = read_csv(path);
  TabulatedKernel k;
  k.tau = table.column("tau");
  k.values.assign(n, std::vector<std::vector<double>>(n));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const auto name = "k_" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
      k.values[i][j] = table.column(name);
      k.values[j][i] = k.values[i][j];
    }
  return KernelModel(std::move(k));
}

std::string_view KernelModel::name() const noexcept {
  switch (v_.index()) {
    case 0: return "gaussian_a1";
    case 1: return "exp_mixture_a2";
    default: return "tabulated";
  }
}

void KernelModel::check_index(int i, int j) const {
  if (i < 0 || j < 0 || i >= n_ || j >= n_)
    throw DomainError("kernel index (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") out of range for N = " + std::to_string(n_));
}

double KernelModel::eval(int i, int j, double tau) const {
  check_index(i, j);
  const double t = std::abs(tau);
  if (const auto* g = std::get_if<GaussianKernel>(&v_))
    return g->coefficients(i, j) * std::exp(-t * t) / std::sqrt(std::numbers::pi);
  if (const auto* e = std::get_if<ExpMixtureKernel>(&v_))
    return ExpMixtureOps{*e}.s_integral(i, j, [t](double s) { return std::exp(-t * s); });
  const auto& tk = std::get<TabulatedKernel>(v_);
  return table_interp(tk.tau, tk.values[i][j], t);
}

double KernelModel::upper_mass(int i, int j, double c) const {
  check_index(i, j);
  if (const auto* g = std::get_if<GaussianKernel>(&v_)) return 0.5 * g->coefficients(i, j) * std::erfc(c);
  const double total = [&] {
    if (const auto* e = std::get_if<ExpMixtureKernel>(&v_))
      return ExpMixtureOps{*e}.s_integral(i, j, [](double s) { return 2.0 / s; });
    const auto& tk = std::get<TabulatedKernel>(v_);
    return 2.0 * table_upper(tk.tau, tk.values[i][j], 0.0);
  }();
  if (c < 0.0) return total - upper_mass(i, j, -c);
  if (const auto* e = std::get_if<ExpMixtureKernel>(&v_))
    return ExpMixtureOps{*e}.s_integral(i, j, [c](double s) { return std::exp(-c * s) / s; });
  const auto& tk = std::get<TabulatedKernel>(v_);
  return table_upper(tk.tau, tk.values[i][j], c);
}

double KernelModel::tail_mass(int i, int j, double r) const {
  if (r < 0.0) throw DomainError("tail_mass: radius must be nonnegative");
  return 2.0 * upper_mass(i, j, r);
}

KernelModel KernelModel::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw StructuralError("kernel scale must be positive");
  Variant v = v_;
  std::visit(
      [factor](auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, TabulatedKernel>) {
          for (auto& row : k.values)
            for (auto& col : row)
              for (auto& x : col) x *= factor;
        } else {
          k.coefficients *= factor;
        }
      },
      v);
  return KernelModel(std::move(v));
}

double KernelModel::support_radius() const {
  if (const auto* tk = std::get_if<TabulatedKernel>(&v_)) return tk->tau.back();
  return kInf;
}

double KernelModel::truncation_bound() const {
  const auto* e = std::get_if<ExpMixtureKernel>(&v_);
  if (!e || !std::isinf(e->s_hi) || e->s_max <= e->s_lo) return 0.0;
  ExpMixtureOps ops{*e};
  double worst = 0.0;
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      const double tail = integrate([&](double s) { return 2.0 * ops.profile(i, j, s) / s; }, e->s_max,
                                    kInf, 1e-10);
      worst = std::max(worst, tail);
    }
  return worst;
}

KernelScalars kernel_scalars(const KernelModel& model, double quad_tol, bool force_numeric) {
  if (!(quad_tol > 0.0)) throw StructuralError("quad_tol must be positive");
  const int n = model.size();
  KernelScalars out{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), 0.0};
  const auto& v = model.variant();

  if (force_numeric) {
    const double support = model.support_radius();
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        auto k = [&](double t) { return model.eval(i, j, t); };
        double a = 0.0;
        double m = 0.0;
        if (const auto* tk = std::get_if<TabulatedKernel>(&v)) {
          for (std::size_t s = 0; s + 1 < tk->tau.size(); ++s) {
            a += 2.0 * integrate(k, tk->tau[s], tk->tau[s + 1], quad_tol);
            m += integrate([&](double t) { return t * k(t); }, tk->tau[s], tk->tau[s + 1], quad_tol);
          }
        } else {
          a = 2.0 * integrate(k, 0.0, kInf, quad_tol);
          m = integrate([&](double t) { return t * k(t); }, 0.0, kInf, quad_tol);
        }
        const double span = std::isinf(support) ? 10.0 : support;
        double s = 0.0;
        for (int q = 0; q <= 4000; ++q) s = std::max(s, k(span * q / 4000.0));
        out.integral(i, j) = out.integral(j, i) = a;
        out.moment(i, j) = out.moment(j, i) = m;
        out.sup(i, j) = out.sup(j, i) = s;
      }
    out.error_bound = quad_tol;
    return out;
  }

  if (const auto* g = std::get_if<GaussianKernel>(&v)) {
    const double rpi = std::sqrt(std::numbers::pi);
    out.integral = g->coefficients;
    out.sup = g->coefficients / rpi;
    out.moment = g->coefficients / (2.0 * rpi);
  } else if (const auto* e = std::get_if<ExpMixtureKernel>(&v)) {
    ExpMixtureOps ops{*e};
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double tol = std::min(quad_tol, 1e-12);
        out.integral(i, j) = out.integral(j, i) = ops.s_integral(i, j, [](double s) { return 2.0 / s; }, tol);
        out.sup(i, j) = out.sup(j, i) = ops.s_integral(i, j, [](double) { return 1.0; }, tol);
        out.moment(i, j) = out.moment(j, i) = ops.s_integral(i, j, [](double s) { return 1.0 / (s * s); }, tol);
      }
    out.error_bound = model.truncation_bound();
  } else {
    const auto& tk = std::get<TabulatedKernel>(v);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const auto& y = tk.values[i][j];
        double m = 0.0;
        for (std::size_t s = 0; s + 1 < tk.tau.size(); ++s) {
          const double t0 = tk.tau[s];
          const double t1 = tk.tau[s + 1];
          m += (t1 - t0) / 6.0 * (t0 * (2.0 * y[s] + y[s + 1]) + t1 * (y[s] + 2.0 * y[s + 1]));
        }
        out.integral(i, j) = 2.0 * table_upper(tk.tau, y, 0.0);
        out.sup(i, j) = *std::max_element(y.begin(), y.end());
        out.moment(i, j) = m;
      }
  }
  if (!out.integral.allFinite() || !out.moment.allFinite() || !out.sup.allFinite())
    throw QuadratureError("kernel scalars are not finite");
  return out;
}

}  // namespace convsolve
