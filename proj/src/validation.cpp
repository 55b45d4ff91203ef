#include "convsolve/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "convsolve/algebra.hpp"
#include "convsolve/errors.hpp"

namespace convsolve {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> log_space(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = std::exp(a + (b - a) * k / (n - 1));
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

// Running minimum of a margin with the sample that produced it.
struct Worst {
  double value = kInf;
  double point = 0.0;
  std::string where;
  void offer(double v, double p, const std::string& w) {
    if (v < value) {
      value = v;
      point = p;
      where = w;
    }
  }
};

ConditionResult make(const std::string& id, bool pass, std::string detail, const Worst& w, double tol) {
  return {id, pass, std::move(detail), std::isfinite(w.value) ? w.point : 0.0, std::isfinite(w.value) ? w.value : 0.0,
          tol};
}

std::string pair_name(int i, int j) { return "K_" + std::to_string(i + 1) + std::to_string(j + 1); }

ConditionResult check_kernel_shape(const ProblemSpec& spec, int samples, double tol) {
  const int n = spec.size();
  // Starting at 1e-4 keeps the Gaussian above the underflow threshold at 16.
  std::vector<double> taus{0.0};
  for (double t : log_space(1e-4, 16.0, samples)) taus.push_back(t);
  const double support = spec.kernel.support_radius();
  Worst w;
  std::string failure;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (double t : taus) {
        if (t > support) continue;
        const double v = spec.kernel.eval(i, j, t);
        const double scale = std::max(std::abs(v), 1e-300);
        const double asym = std::max(std::abs(v - spec.kernel.eval(j, i, t)), std::abs(v - spec.kernel.eval(i, j, -t)));
        w.offer(v, t, pair_name(i, j) + " positivity");
        if (asym > tol * scale && failure.empty())
          failure = pair_name(i, j) + " not even/symmetric at tau=" + fmt(t) + " (gap " + fmt(asym) + ")";
      }
  bool pass = failure.empty() && w.value > 0.0;
  std::string detail;
  if (!failure.empty())
    detail = failure;
  else if (!(w.value > 0.0))
    detail = w.where + " fails at tau=" + fmt(w.point) + " (value " + fmt(w.value) + ")";
  else
    detail = "even, symmetric and positive on " + std::to_string(taus.size()) + " lags";
  if (pass && std::isfinite(support))
    detail += "; caveat: tabulated kernel is zero beyond |tau| = " + fmt(support);
  return make("1", pass, detail, w, tol);
}

ConditionResult check_kernel_scalars(const ProblemSpec& spec, const ValidationOptions& opts,
                                     const std::optional<KernelScalars>& scalars, double radius,
                                     const std::string& spectral_error) {
  Worst w;
  if (!scalars) return make("2", false, "kernel scalars unavailable: " + spectral_error, w, opts.radius_tol);
  const auto& s = *scalars;
  const int n = spec.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(s.integral(i, j)) || !std::isfinite(s.moment(i, j)) || !std::isfinite(s.sup(i, j)) ||
          !(s.integral(i, j) > 0.0))
        return make("2", false, pair_name(i, j) + ": integral or first moment not finite and positive", w,
                    opts.radius_tol);
    }
  if (!spectral_error.empty()) return make("2", false, spectral_error, w, opts.radius_tol);
  w.offer(-std::abs(radius - 1.0), radius, "radius");
  const bool pass = std::abs(radius - 1.0) <= opts.radius_tol;
  return make("2", pass,
              pass ? "finite first moments; spectral radius " + fmt(radius)
                   : "spectral radius of A is " + fmt(radius) + ", not 1",
              w, opts.radius_tol);
}

std::vector<double> weight_samples(int samples) {
  std::vector<double> ts;
  for (double t : log_space(1e-6, 100.0, samples)) {
    ts.push_back(t);
    ts.push_back(-t);
  }
  return ts;
}

ConditionResult check_weight_excess(const ProblemSpec& spec, int samples, double tol) {
  Worst w;
  bool finite_support = false;
  for (std::size_t j = 0; j < spec.weights.size(); ++j) {
    const auto& mu = spec.weights[j];
    const double support = mu.support_radius();
    finite_support = finite_support || std::isfinite(support);
    for (double t : weight_samples(samples)) {
      if (std::abs(t) > support) continue;
      w.offer(mu.excess(t), t, "mu_" + std::to_string(j + 1));
    }
  }
  const bool pass = w.value > 0.0;
  std::string detail = pass ? "mu_j > 1 on all samples"
                            : w.where + "(t) - 1 = " + fmt(w.value) + " at t=" + fmt(w.point) + ", mu_j > 1 violated";
  if (pass && finite_support) detail += "; caveat: tabulated excess checked on its support only";
  return make("a", pass, detail, w, tol);
}

ConditionResult check_weight_summable(const ProblemSpec& spec, double tol) {
  Worst w;
  for (std::size_t j = 0; j < spec.weights.size(); ++j) {
    const auto& mu = spec.weights[j];
    const std::string name = "mu_" + std::to_string(j + 1);
    double total = 0.0;
    try {
      total = mu.excess_integral();
    } catch (const Error& e) {
      return make("b", false, name + ": excess integral failed: " + e.what(), w, tol);
    }
    if (!std::isfinite(total) || total < 0.0) return make("b", false, name + ": excess integral not finite", w, tol);
    // Decay at geometrically growing |t|.
    double prev = kInf;
    for (double t = 10.0; t <= 1e6; t *= 10.0) {
      const double e = mu.excess(t);
      if (e > prev * (1.0 + tol)) return make("b", false, name + " - 1 grows at t=" + fmt(t), w, tol);
      prev = e;
    }
    const double far = mu.excess(1e6);
    const double ref = std::max(1.0, mu.excess(1.0));
    w.offer(-far, 1e6, name);
    if (far > 1e-6 * ref)
      return make("b", false, name + " - 1 does not vanish at infinity (" + fmt(far) + " at t=1e6)", w, tol);
  }
  return make("b", true, "excess summable with zero limit", w, tol);
}

double g_upper_sample(const ProblemSpec& spec, const std::optional<Eigen::VectorXd>& xi,
                      const std::optional<Eigen::VectorXd>& eta, std::size_t j) {
  if (xi) return 2.0 * (*xi)(static_cast<Eigen::Index>(j));
  double e = 1.0;
  if (eta) e = (*eta)(static_cast<Eigen::Index>(j));
  else if (auto d = spec.nonlins[j].declared_eta()) e = *d;
  return 8.0 * e;
}

ConditionResult check_monotone(const ProblemSpec& spec, int samples, double tol,
                               const std::optional<Eigen::VectorXd>& xi, const std::optional<Eigen::VectorXd>& eta) {
  Worst w;
  for (std::size_t j = 0; j < spec.nonlins.size(); ++j) {
    const auto& g = spec.nonlins[j];
    const double top = g_upper_sample(spec, xi, eta, j);
    double prev = g.eval(0.0);
    for (int k = 1; k <= samples; ++k) {
      const double u = top * k / samples;
      const double v = g.eval(u);
      if (!std::isfinite(v)) return make("I", false, "G_" + std::to_string(j + 1) + " not finite at u=" + fmt(u), w, tol);
      w.offer(v - prev, u, "G_" + std::to_string(j + 1));
      prev = v;
    }
  }
  const bool pass = w.value > 0.0;
  return make("I", pass,
              pass ? "G_j strictly increasing on samples"
                   : w.where + " not increasing near u=" + fmt(w.point) + " (step " + fmt(w.value) + ")",
              w, tol);
}

ConditionResult check_fixed_values(const ProblemSpec& spec, double tol, const std::optional<Eigen::VectorXd>& eta) {
  Worst w;
  std::string failure;
  for (std::size_t j = 0; j < spec.nonlins.size(); ++j) {
    const auto& g = spec.nonlins[j];
    const std::string name = "G_" + std::to_string(j + 1);
    const double g0 = g.eval(0.0);
    w.offer(-std::abs(g0), 0.0, name + "(0)");
    if (std::abs(g0) > tol && failure.empty()) failure = name + "(0) = " + fmt(g0) + " != 0";
    if (auto d = g.declared_eta()) {
      const double gap = std::abs(g.eval(*d) - *d);
      w.offer(-gap, *d, name + " declared eta");
      if (gap > tol * std::max(1.0, *d) && failure.empty())
        failure = name + "(eta) != eta at declared eta=" + fmt(*d);
    }
    if (eta) {
      const double e = (*eta)(static_cast<Eigen::Index>(j));
      const double gap = std::abs(g.eval(e) - e);
      w.offer(-gap, e, name + " computed eta");
      if (gap > tol * std::max(1.0, e) && failure.empty()) {
        failure = name + "(eta_" + std::to_string(j + 1) + ") = " + fmt(g.eval(e)) + " but the Perron vector gives eta=" +
                  fmt(e);
        if (auto d = g.declared_eta()) failure += " (declared " + fmt(*d) + ")";
      }
    }
  }
  std::string detail = failure.empty() ? "G_j(0) = 0 and G_j(eta_j) = eta_j" : failure;
  if (failure.empty() && !eta) detail += " (declared eta only; Perron vector unavailable)";
  return make("II", failure.empty(), detail, w, tol);
}

ConditionResult check_concave(const ProblemSpec& spec, int samples, double tol,
                              const std::optional<Eigen::VectorXd>& xi, const std::optional<Eigen::VectorXd>& eta) {
  Worst w;
  for (std::size_t j = 0; j < spec.nonlins.size(); ++j) {
    const auto& g = spec.nonlins[j];
    const double top = g_upper_sample(spec, xi, eta, j);
    const double du = top / samples;
    for (int k = 1; k < samples; ++k) {
      const double u = du * k;
      const double d2 = g.eval(u - du) - 2.0 * g.eval(u) + g.eval(u + du);
      w.offer(-d2, u, "G_" + std::to_string(j + 1));
    }
  }
  const bool pass = w.value > tol;
  return make("III", pass,
              pass ? "negative second differences on samples"
                   : w.where + " not strictly concave near u=" + fmt(w.point) + " (second difference " +
                         fmt(-w.value) + ")",
              w, tol);
}

ConditionResult check_phi(const ProblemSpec& spec, int samples, double tol, const std::optional<Eigen::VectorXd>& eta,
                          const std::optional<Eigen::VectorXd>& xi, const std::string& majorant_error) {
  Worst w;
  const auto& phi = spec.phi;
  if (std::abs(phi.eval(0.0)) > tol || std::abs(phi.eval(1.0) - 1.0) > tol)
    return make("IV", false, "phi(0) = 0 and phi(1) = 1 required", w, tol);
  const double ds = 1.0 / samples;
  for (int k = 1; k <= samples; ++k) {
    const double s = ds * k;
    if (phi.eval(s) < phi.eval(s - ds) - tol)
      return make("IV", false, "phi decreases near sigma=" + fmt(s), w, tol);
    if (k < samples && phi.eval(s - ds) - 2.0 * phi.eval(s) + phi.eval(s + ds) > tol)
      return make("IV", false, "phi not concave near sigma=" + fmt(s), w, tol);
  }
  if (!eta) return make("IV", false, "Perron vector unavailable, cannot sample [eta, xi]", w, tol);
  std::string caveat;
  for (std::size_t j = 0; j < spec.nonlins.size(); ++j) {
    const double e = (*eta)(static_cast<Eigen::Index>(j));
    double top = 2.0 * e;
    if (xi) top = (*xi)(static_cast<Eigen::Index>(j));
    const auto r = check_condition_iv(spec.nonlins[j], phi, e, top, samples, tol);
    w.offer(r.worst_margin, r.worst_sigma, "G_" + std::to_string(j + 1) + " at u=" + fmt(r.worst_u));
  }
  if (!xi) caveat = "; majorant unavailable (" + majorant_error + "), sampled u in [eta, 2 eta]";
  const bool pass = w.value >= -tol;
  return make("IV", pass,
              pass ? "G_j(sigma u) >= phi(sigma) G_j(u) on samples" + caveat
                   : "G(sigma u) < phi(sigma) G(u) for " + w.where + ", sigma=" + fmt(w.point) + " (margin " +
                         fmt(w.value) + ")" + caveat,
              w, tol);
}

}  // namespace

bool ValidationReport::passed() const {
  return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) { return c.pass; });
}

const ConditionResult& ValidationReport::at(const std::string& id) const {
  for (const auto& c : conditions)
    if (c.id == id) return c;
  throw StructuralError("validation report has no condition " + id);
}

std::vector<std::string> ValidationReport::failed_ids() const {
  std::vector<std::string> out;
  for (const auto& c : conditions)
    if (!c.pass) out.push_back(c.id);
  return out;
}

ValidationReport validate_problem(const ProblemSpec& spec, const ValidationOptions& opts) {
  spec.check_structure();
  if (opts.samples < 2) throw StructuralError("validate_problem: samples must be at least 2");
  if (!(opts.tol > 0.0)) throw StructuralError("validate_problem: tol must be positive");

  // Spectral quantities are needed for II and IV; failures here become
  // condition 2 evidence instead of exceptions.
  std::optional<KernelScalars> scalars;
  std::optional<Eigen::VectorXd> eta;
  std::optional<Eigen::VectorXd> xi;
  double radius = 0.0;
  std::string spectral_error;
  std::string majorant_error;
  try {
    scalars = kernel_scalars(spec.kernel, opts.quad_tol);
    radius = spectral_radius(scalars->integral, 1e-15);
    eta = perron_vector(scalars->integral / radius, 1e-14) * spec.eta_scale;
  } catch (const Error& e) {
    spectral_error = e.what();
  }
  if (eta) {
    try {
      const Eigen::MatrixXd a = scalars->integral / radius;
      const auto ex = build_b_matrix(spec.weights, *scalars);
      xi = solve_xi(a, ex.b, spec.nonlins, *eta, 1e-14).xi;
    } catch (const Error& e) {
      majorant_error = e.what();
    }
  }

  ValidationReport report;
  report.conditions.push_back(check_kernel_shape(spec, opts.samples, opts.tol));
  report.conditions.push_back(check_kernel_scalars(spec, opts, scalars, radius, spectral_error));
  report.conditions.push_back(check_weight_excess(spec, opts.samples, opts.tol));
  report.conditions.push_back(check_weight_summable(spec, opts.tol));
  report.conditions.push_back(check_monotone(spec, opts.samples, opts.tol, xi, eta));
  report.conditions.push_back(check_fixed_values(spec, opts.tol, eta));
  report.conditions.push_back(check_concave(spec, opts.samples, opts.tol, xi, eta));
  report.conditions.push_back(check_phi(spec, opts.samples, opts.tol, eta, xi, majorant_error));
  return report;
}

}  // namespace convsolve
