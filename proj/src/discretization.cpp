#include "convsolve/discretization.hpp"

#include <fftw3.h>

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "convsolve/errors.hpp"

namespace convsolve {

using boost::math::quadrature::gauss;

Grid::Grid(double r, int cells) : radius(r), n_cells(cells) {
  if (!(r > 0.0) || !std::isfinite(r)) throw StructuralError("grid: radius must be positive");
  if (cells <= 0 || cells % 2 != 0) throw StructuralError("grid: n_cells must be a positive even integer");
  h = 2.0 * r / cells;
}

Eigen::VectorXd Grid::nodes() const {
  Eigen::VectorXd x(size());
  for (int m = 0; m < size(); ++m) x(m) = node(m);
  return x;
}

int cells_for_spacing(double radius, double h) {
  if (!(h > 0.0) || !(radius > 0.0)) throw StructuralError("grid: spacing and radius must be positive");
  const int half = static_cast<int>(std::ceil(radius / h - 1e-9));
  return 2 * std::max(half, 1);
}

FieldVector FieldVector::constant(const Grid& g, const Eigen::VectorXd& value, const Eigen::VectorXd& boundary) {
  FieldVector f;
  f.grid = g;
  f.values = value.replicate(1, g.size());
  f.boundary = boundary;
  return f;
}

double choose_truncation(const KernelModel& kernel, std::span<const WeightModel> weights, double g_bound, double tol,
                         double r0, int max_doublings) {
  if (!(tol > 0.0) || !(r0 > 0.0)) throw StructuralError("choose_truncation: tol and r0 must be positive");
  const int n = kernel.size();
  double r = r0;
  for (int d = 0; d <= max_doublings; ++d, r *= 2.0) {
    double kt = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) kt = std::max(kt, kernel.tail_mass(i, j, r / 2.0));
    if (kt * g_bound > tol) continue;
    bool ok = true;
    for (const auto& w : weights) ok = ok && w.excess_tail(r / 2.0) <= tol;
    if (ok) return r;
  }
  throw SolveError("choose_truncation: tails still above " + std::to_string(tol) + " at R = " + std::to_string(r / 2.0));
}

struct OperatorPlan::Fft {
  int length = 0;  // circular length, 2 * nodes
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<std::vector<std::complex<double>>> spectra;  // per (i, j)

  ~Fft() {
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

namespace {

struct RealBuf {
  double* p;
  explicit RealBuf(int n) : p(fftw_alloc_real(static_cast<std::size_t>(n))) {}
  ~RealBuf() { fftw_free(p); }
};
struct ComplexBuf {
  fftw_complex* p;
  explicit ComplexBuf(int n) : p(fftw_alloc_complex(static_cast<std::size_t>(n))) {}
  ~ComplexBuf() { fftw_free(p); }
};

}  // namespace

OperatorPlan build_plan(const ProblemSpec& problem, const Grid& grid) {
  problem.check_structure();
  const int n = problem.size();
  if (grid.n_cells <= 0) throw SolveError("build_plan: empty grid");
  const int cells = grid.n_cells;
  const int nodes = grid.size();
  const double h = grid.h;
  // Continuation band on each side carrying the singular weight beyond R.
  const int ext = cells / 4;
  const int max_lag = cells + ext;
  constexpr double eps = std::numeric_limits<double>::epsilon();

  OperatorPlan plan;
  plan.grid_ = grid;
  plan.n_ = n;

  std::vector<std::vector<double>> lag_table(static_cast<std::size_t>(n * n));
  plan.lags_.resize(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto& t = lag_table[static_cast<std::size_t>(i * n + j)];
      if (j < i) {
        t = lag_table[static_cast<std::size_t>(j * n + i)];
      } else {
        t.resize(static_cast<std::size_t>(max_lag + 1));
        for (int l = 0; l <= max_lag; ++l) t[static_cast<std::size_t>(l)] = problem.kernel.eval(i, j, l * h);
      }
      plan.lags_[static_cast<std::size_t>(i * n + j)].assign(t.begin(), t.begin() + nodes);
    }

  // Product weights of one cell: the linear interpolant of the cofactor
  // integrated against (mu - 1). Cells touching the singular point use the
  // exact moments; elsewhere the excess is smooth and a Gauss rule against the
  // two hat functions avoids the cancellation in t1 m0 - m1 far from 0.
  auto cell_split = [&](int j, double t0, double t1, int node_hint) {
    const auto& mu = problem.weights[static_cast<std::size_t>(j)];
    double left = 0.0;
    double right = 0.0;
    if (std::holds_alternative<UnitWeight>(mu.variant())) return std::pair{left, right};
    if (t0 <= 0.0 && t1 >= 0.0) {
      const auto mom = mu.cell_moments(t0, t1);
      left = (t1 * mom.m0 - mom.m1) / h;
      right = (mom.m1 - t0 * mom.m0) / h;
      const double noise = 64.0 * eps * (std::abs(t0) + std::abs(t1)) * std::abs(mom.m0) / h;
      for (double* w : {&left, &right}) {
        if (*w < 0.0) {
          if (*w < -noise)
            throw SolveError("build_plan: negative singular weight " + std::to_string(*w), j, node_hint);
          plan.clipped_ = std::max(plan.clipped_, -*w);
          *w = 0.0;
        }
      }
      return std::pair{left, right};
    }
    std::vector<double> cuts{t0};
    if (const auto* tab = std::get_if<TabulatedExcess>(&mu.variant()))
      for (double k : tab->t)
        for (double c : {k, -k})
          if (c > t0 && c < t1) cuts.push_back(c);
    cuts.push_back(t1);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t q = 0; q + 1 < cuts.size(); ++q) {
      left += gauss<double, 20>::integrate([&](double t) { return mu.excess(t) * (t1 - t); }, cuts[q], cuts[q + 1]);
      right += gauss<double, 20>::integrate([&](double t) { return mu.excess(t) * (t - t0); }, cuts[q], cuts[q + 1]);
    }
    left /= h;
    right /= h;
    if (!(left >= 0.0 && right >= 0.0))
      throw SolveError("build_plan: negative singular weight", j, node_hint);
    return std::pair{left, right};
  };

  plan.weights_.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(nodes), 0.0));
  plan.singular_ = plan.weights_;
  // Singular weights of the continuation band, indexed by distance k = 0..ext
  // beyond the edge; the band is even about 0 so one side suffices when the
  // weight is even, but both sides are built to stay general.
  std::vector<std::vector<double>> band_right(static_cast<std::size_t>(n), std::vector<double>(ext + 1, 0.0));
  std::vector<std::vector<double>> band_left = band_right;
  for (int j = 0; j < n; ++j) {
    auto& nu = plan.singular_[static_cast<std::size_t>(j)];
    for (int c = 0; c < cells; ++c) {
      const auto [l, r] = cell_split(j, grid.node(c), grid.node(c + 1), c);
      nu[static_cast<std::size_t>(c)] += l;
      nu[static_cast<std::size_t>(c + 1)] += r;
    }
    for (int c = 0; c < ext; ++c) {
      const double a = grid.radius + c * h;
      const auto [l, r] = cell_split(j, a, a + h, cells + c);
      band_right[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)] += l;
      band_right[static_cast<std::size_t>(j)][static_cast<std::size_t>(c + 1)] += r;
      const auto [l2, r2] = cell_split(j, -a - h, -a, -c);
      band_left[static_cast<std::size_t>(j)][static_cast<std::size_t>(c + 1)] += l2;
      band_left[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)] += r2;
    }
    auto& w = plan.weights_[static_cast<std::size_t>(j)];
    for (int m = 0; m < nodes; ++m) {
      const double trap = (m == 0 || m == cells) ? 0.5 : 1.0;
      w[static_cast<std::size_t>(m)] = h * trap + nu[static_cast<std::size_t>(m)];
      if (!(w[static_cast<std::size_t>(m)] >= 0.0)) throw SolveError("build_plan: negative node weight", j, m);
    }
  }

  // Continuation: exact kernel mass not captured by the grid trapezoid, plus
  // the singular band.
  const auto scalars = kernel_scalars(problem.kernel, 1e-13);
  plan.a_ = scalars.integral;
  plan.continuation_.assign(static_cast<std::size_t>(n * n), std::vector<double>(static_cast<std::size_t>(nodes), 0.0));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      auto& cont = plan.continuation_[static_cast<std::size_t>(i * n + j)];
      const auto& t = lag_table[static_cast<std::size_t>(i * n + j)];
      const double a = scalars.integral(i, j);
      std::vector<double> prefix(static_cast<std::size_t>(nodes));
      double run = 0.0;
      for (int l = 0; l < nodes; ++l) prefix[static_cast<std::size_t>(l)] = run += t[static_cast<std::size_t>(l)];
      for (int m = 0; m < nodes; ++m) {
        const auto lo = static_cast<std::size_t>(m);
        const auto hi = static_cast<std::size_t>(cells - m);
        const double captured = h * (prefix[lo] + prefix[hi] - t[0] - 0.5 * (t[lo] + t[hi]));
        double regular = a - captured;
        if (regular < 0.0) {
          if (regular < -64.0 * eps * nodes * a)
            throw SolveError("build_plan: grid captures more kernel mass than the kernel has", i, m);
          plan.clipped_ = std::max(plan.clipped_, -regular);
          regular = 0.0;
        }
        double band = 0.0;
        for (int k = 0; k <= ext; ++k) {
          band += band_right[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] *
                  t[static_cast<std::size_t>(cells - m + k)];
          band += band_left[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] *
                  t[static_cast<std::size_t>(m + k)];
        }
        cont[static_cast<std::size_t>(m)] = regular + band;
      }
    }
  }

  // Circulant embedding of the symmetric Toeplitz lag matrix.
  auto fft = std::make_shared<OperatorPlan::Fft>();
  fft->length = 2 * nodes;
  const int len = fft->length;
  const int spec_len = len / 2 + 1;
  RealBuf rb(len);
  ComplexBuf cb(spec_len);
  fft->forward = fftw_plan_dft_r2c_1d(len, rb.p, cb.p, FFTW_ESTIMATE);
  fft->backward = fftw_plan_dft_c2r_1d(len, cb.p, rb.p, FFTW_ESTIMATE);
  if (!fft->forward || !fft->backward) throw SolveError("build_plan: FFTW planning failed");
  fft->spectra.resize(static_cast<std::size_t>(n * n));
  for (int p = 0; p < n * n; ++p) {
    const auto& t = plan.lags_[static_cast<std::size_t>(p)];
    std::fill(rb.p, rb.p + len, 0.0);
    rb.p[0] = t[0];
    for (int l = 1; l < nodes; ++l) {
      rb.p[l] = t[static_cast<std::size_t>(l)];
      rb.p[len - l] = t[static_cast<std::size_t>(l)];
    }
    fftw_execute_dft_r2c(fft->forward, rb.p, cb.p);
    auto& s = fft->spectra[static_cast<std::size_t>(p)];
    s.resize(static_cast<std::size_t>(spec_len));
    for (int q = 0; q < spec_len; ++q) s[static_cast<std::size_t>(q)] = {cb.p[q][0], cb.p[q][1]};
  }
  plan.fft_ = std::move(fft);
  return plan;
}

FieldVector apply_operator(const OperatorPlan& plan, const FieldVector& f, std::span<const NonlinModel> nonlins,
                           Evaluation mode) {
  const int n = plan.n_;
  const int nodes = plan.grid_.size();
  if (!(f.grid == plan.grid_) || f.values.rows() != n || f.values.cols() != nodes)
    throw SolveError("apply_operator: field does not match the plan grid");
  if (static_cast<int>(nonlins.size()) != n) throw SolveError("apply_operator: wrong number of nonlinearities");

  Eigen::MatrixXd v(n, nodes);
  for (int j = 0; j < n; ++j) {
    const auto& w = plan.weights_[static_cast<std::size_t>(j)];
    for (int m = 0; m < nodes; ++m) {
      const double u = f.values(j, m);
      if (u < 0.0 || !std::isfinite(u)) throw SolveError("apply_operator: field value must be finite and >= 0", j, m);
      v(j, m) = w[static_cast<std::size_t>(m)] * nonlins[static_cast<std::size_t>(j)].eval(u);
    }
  }

  if (f.boundary.size() != n || !(f.boundary.array() >= 0.0).all())
    throw SolveError("apply_operator: boundary value must be nonnegative with one entry per component");
  Eigen::VectorXd g_edge(n);
  for (int j = 0; j < n; ++j) g_edge(j) = nonlins[static_cast<std::size_t>(j)].eval(f.boundary(j));

  FieldVector out;
  out.grid = plan.grid_;
  out.boundary = plan.a_ * g_edge;
  out.values = Eigen::MatrixXd::Zero(n, nodes);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto& c = plan.continuation_[static_cast<std::size_t>(i * n + j)];
      for (int m = 0; m < nodes; ++m) out.values(i, m) += c[static_cast<std::size_t>(m)] * g_edge(j);
    }

  if (mode == Evaluation::automatic) mode = nodes >= 256 ? Evaluation::fft : Evaluation::direct;
  if (mode == Evaluation::direct) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const auto& t = plan.lags_[static_cast<std::size_t>(i * n + j)];
        for (int m = 0; m < nodes; ++m) {
          double s = 0.0;
          for (int q = 0; q < nodes; ++q) s += t[static_cast<std::size_t>(std::abs(m - q))] * v(j, q);
          out.values(i, m) += s;
        }
      }
    return out;
  }

  const auto& fft = *plan.fft_;
  const int len = fft.length;
  const int spec_len = len / 2 + 1;
  RealBuf rb(len);
  ComplexBuf cb(spec_len);
  std::vector<std::vector<std::complex<double>>> vs(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    std::fill(rb.p, rb.p + len, 0.0);
    for (int m = 0; m < nodes; ++m) rb.p[m] = v(j, m);
    fftw_execute_dft_r2c(fft.forward, rb.p, cb.p);
    auto& s = vs[static_cast<std::size_t>(j)];
    s.resize(static_cast<std::size_t>(spec_len));
    for (int q = 0; q < spec_len; ++q) s[static_cast<std::size_t>(q)] = {cb.p[q][0], cb.p[q][1]};
  }
  for (int i = 0; i < n; ++i) {
    std::vector<std::complex<double>> acc(static_cast<std::size_t>(spec_len));
    for (int j = 0; j < n; ++j) {
      const auto& k = fft.spectra[static_cast<std::size_t>(i * n + j)];
      const auto& s = vs[static_cast<std::size_t>(j)];
      for (int q = 0; q < spec_len; ++q) acc[static_cast<std::size_t>(q)] += k[static_cast<std::size_t>(q)] * s[static_cast<std::size_t>(q)];
    }
    for (int q = 0; q < spec_len; ++q) {
      cb.p[q][0] = acc[static_cast<std::size_t>(q)].real();
      cb.p[q][1] = acc[static_cast<std::size_t>(q)].imag();
    }
    fftw_execute_dft_c2r(fft.backward, cb.p, rb.p);
    for (int m = 0; m < nodes; ++m) out.values(i, m) += rb.p[m] / len;
  }
  return out;
}

}  // namespace convsolve
