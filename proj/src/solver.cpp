#include "convsolve/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "convsolve/errors.hpp"

namespace convsolve {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Trapezoid integral of |f_i - eta_i| over nodes with lo <= |x| <= hi.
double band_integral(const FieldVector& f, int i, double eta, double lo, double hi) {
  const auto& g = f.grid;
  double s = 0.0;
  for (int m = 0; m < g.n_cells; ++m) {
    const double a = std::abs(g.node(m));
    const double b = std::abs(g.node(m + 1));
    if (std::min(a, b) < lo - 1e-12 * g.radius || std::max(a, b) > hi + 1e-12 * g.radius) continue;
    s += 0.5 * g.h * (std::abs(f.values(i, m) - eta) + std::abs(f.values(i, m + 1) - eta));
  }
  return s;
}

}  // namespace

double IterationTrace::max_mono_violation() const {
  double v = 0.0;
  for (const auto& s : steps) v = std::max(v, s.mono_violation);
  return v;
}

double IterationTrace::max_lower_violation() const {
  double v = 0.0;
  for (const auto& s : steps) v = std::max(v, s.lower_violation);
  return v;
}

double IterationTrace::max_upper_violation() const {
  double v = 0.0;
  for (const auto& s : steps) v = std::max(v, s.upper_violation);
  return v;
}

int IterationTrace::total_violations() const {
  int c = 0;
  for (const auto& s : steps) c += s.violation_count;
  return c;
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::converged:
      return "converged";
    case Termination::a_priori:
      return "a_priori";
    case Termination::max_iterations:
      return "max_iterations";
  }
  return "unknown";
}

double estimate_quadrature_error(const ProblemSpec& problem, const Grid& grid, const SpectralData& spectral,
                                 Evaluation mode) {
  ProblemSpec unit = problem;
  unit.weights.assign(problem.weights.size(), WeightModel::unit());
  const auto plan = build_plan(unit, grid);
  const auto f = FieldVector::constant(grid, spectral.eta, spectral.eta);
  const auto w = apply_operator(plan, f, unit.nonlins, mode);
  const double err = std::max((w.values - f.values).cwiseAbs().maxCoeff(), (w.boundary - f.boundary).cwiseAbs().maxCoeff());
  const double floor = 64.0 * kEps * spectral.xi.maxCoeff();
  return std::max(err, floor);
}

SolutionReport iterate(const ProblemSpec& problem, const SpectralData& spectral, const OperatorPlan& plan,
                       const FieldVector& start, const SolveOptions& opts, double quadrature_error) {
  if (!(opts.tol_stop > 0.0)) throw SolveError("solve: tol_stop must be positive");
  if (opts.max_iters < 1) throw SolveError("solve: max_iters must be at least 1");
  const double slack = opts.mono_slack.value_or(10.0 * quadrature_error);
  if (!(slack >= 0.0)) throw SolveError("solve: mono_slack must be nonnegative");
  const int n_comp = plan.components();
  const int nodes = plan.grid().size();
  const double sigma = spectral.sigma;
  const double k = spectral.k;

  // Upper bound for the iterates: xi for the standard start, the start itself otherwise.
  Eigen::VectorXd upper = start.values.rowwise().maxCoeff().cwiseMax(start.boundary).cwiseMax(spectral.xi);

  SolutionReport rep;
  rep.quadrature_error = quadrature_error;
  rep.mono_slack = slack;
  const bool certified = sigma > 0.0 && sigma < 1.0 && k > 0.0 && k < 1.0;
  rep.a_priori_iterations = certified ? a_priori_iterations(sigma, k, opts.tol_stop) : 0;

  FieldVector f = start;
  for (int n = 1;; ++n) {
    FieldVector g = apply_operator(plan, f, problem.nonlins, opts.evaluation);
    TraceStep st;
    st.n = n;
    if (certified) {
      st.envelope = std::pow(k, n) * (1.0 - sigma) / (1.0 - k);
      st.rate_bound = std::pow(k, n - 1) * (1.0 - sigma);
    }
    // Node index `nodes` stands for the continuation outside [-R, R].
    for (int i = 0; i < n_comp; ++i)
      for (int m = 0; m <= nodes; ++m) {
        const double now = m < nodes ? g.values(i, m) : g.boundary(i);
        const double rise = now - (m < nodes ? f.values(i, m) : f.boundary(i));
        const double low = spectral.eta(i) - now;
        const double high = now - upper(i);
        st.diff = std::max(st.diff, std::abs(rise));
        st.mono_violation = std::max(st.mono_violation, rise);
        st.lower_violation = std::max(st.lower_violation, low);
        st.upper_violation = std::max(st.upper_violation, high);
        if (rise > 0.0 || low > 0.0 || high > 0.0) ++st.violation_count;
        if (rise > slack)
          throw SolveError("solve: iterate increased by " + std::to_string(rise) + " (slack " + std::to_string(slack) +
                               "); discretization too coarse?",
                           i, m, n);
        if (low > slack || high > slack)
          throw SolveError("solve: iterate left [eta, xi] by " + std::to_string(std::max(low, high)), i, m, n);
      }
    rep.trace.steps.push_back(st);
    f = std::move(g);
    if (st.diff <= opts.tol_stop) {
      rep.termination = Termination::converged;
    } else if (opts.use_a_priori && certified && n >= rep.a_priori_iterations) {
      rep.termination = Termination::a_priori;
    } else if (n >= opts.max_iters) {
      rep.termination = Termination::max_iterations;
    } else {
      continue;
    }
    rep.iterations = n;
    break;
  }
  rep.residual = residual(plan, f, problem.nonlins, opts.evaluation);
  rep.asymptotics = asymptotics_report(f, spectral.eta);
  rep.field = std::move(f);
  return rep;
}

SolutionReport solve(const ProblemSpec& problem, const SpectralData& spectral, const OperatorPlan& plan,
                     const SolveOptions& opts) {
  const double qerr = estimate_quadrature_error(problem, plan.grid(), spectral, opts.evaluation);
  const auto start = FieldVector::constant(plan.grid(), spectral.xi, spectral.xi);
  return iterate(problem, spectral, plan, start, opts, qerr);
}

double uniqueness_probe(const ProblemSpec& problem, const SpectralData& spectral, const OperatorPlan& plan,
                        SolutionReport& base, double scale, const SolveOptions& opts) {
  if (!(scale >= 1.0)) throw SolveError("uniqueness_probe: scale must be at least 1");
  const auto start = FieldVector::constant(plan.grid(), scale * spectral.xi, scale * spectral.xi);
  const auto image = apply_operator(plan, start, problem.nonlins, opts.evaluation);
  const double excess = std::max((image.values - start.values).maxCoeff(), (image.boundary - start.boundary).maxCoeff());
  if (excess > base.mono_slack)
    throw SolveError("uniqueness_probe: scale * xi is not a supersolution (W exceeds it by " + std::to_string(excess) +
                     ")");
  SolveOptions o = opts;
  o.mono_slack = base.mono_slack;
  const auto other = iterate(problem, spectral, plan, start, o, base.quadrature_error);
  const double dev = (other.field.values - base.field.values).cwiseAbs().maxCoeff();
  base.uniqueness_deviation = dev;
  return dev;
}

std::vector<Asymptotics> asymptotics_report(const FieldVector& f, const Eigen::VectorXd& eta) {
  const double r = f.grid.radius;
  std::vector<Asymptotics> out;
  for (int i = 0; i < f.components(); ++i) {
    Asymptotics a;
    a.edge_left = std::abs(f.values(i, 0) - eta(i));
    a.edge_right = std::abs(f.values(i, f.grid.n_cells) - eta(i));
    a.tail_integral = band_integral(f, i, eta(i), 0.5 * r, r);
    const double inner = band_integral(f, i, eta(i), 0.5 * r, 0.75 * r);
    const double outer = band_integral(f, i, eta(i), 0.75 * r, r);
    a.half_tail_ratio = inner > 0.0 ? outer / inner : 0.0;
    out.push_back(a);
  }
  return out;
}

double residual(const OperatorPlan& plan, const FieldVector& f, std::span<const NonlinModel> nonlins, Evaluation mode) {
  const auto w = apply_operator(plan, f, nonlins, mode);
  return std::max((f.values - w.values).cwiseAbs().maxCoeff(), (f.boundary - w.boundary).cwiseAbs().maxCoeff());
}

}  // namespace convsolve
