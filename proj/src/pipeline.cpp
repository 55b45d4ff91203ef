#include "convsolve/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "convsolve/errors.hpp"

namespace convsolve {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kSchemaVersion = 1;

double number(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  if (!j[key].is_number()) throw ConfigError("'" + key + "' must be a number");
  return j[key].get<double>();
}

double required_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  if (!j[key].is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  return j[key].get<double>();
}

double number_or_inf(const json& v, const std::string& where) {
  if (v.is_string() && (v == "inf" || v == "infinity")) return std::numeric_limits<double>::infinity();
  if (!v.is_number()) throw ConfigError(where + " must be a number or \"inf\"");
  return v.get<double>();
}

std::string type_of(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw ConfigError(where + ": expected an object with a string 'type'");
  return j["type"].get<std::string>();
}

Eigen::MatrixXd matrix(const json& v, const std::string& where) {
  if (v.is_number()) return Eigen::MatrixXd::Constant(1, 1, v.get<double>());
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a square array of arrays");
  const auto n = static_cast<Eigen::Index>(v.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
      throw ConfigError(where + ": row " + std::to_string(i + 1) + " has the wrong length");
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!row[static_cast<std::size_t>(k)].is_number()) throw ConfigError(where + ": entries must be numbers");
      m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

std::string path_of(const json& j, const fs::path& base, const std::string& where) {
  if (!j.contains("path") || !j["path"].is_string()) throw ConfigError(where + ": tabulated entries need 'path'");
  fs::path p = j["path"].get<std::string>();
  if (p.is_relative()) p = base / p;
  return p.string();
}

KernelModel parse_kernel(const json& j, const fs::path& base, int n_hint) {
  const std::string t = type_of(j, "kernel");
  if (t == "gaussian") {
    if (!j.contains("coefficients")) throw ConfigError("kernel: missing 'coefficients'");
    return KernelModel::gaussian(matrix(j["coefficients"], "kernel.coefficients"));
  }
  if (t == "exp_mixture") {
    if (!j.contains("coefficients")) throw ConfigError("kernel: missing 'coefficients'");
    const auto c = matrix(j["coefficients"], "kernel.coefficients");
    const Eigen::MatrixXd p = j.contains("powers") ? matrix(j["powers"], "kernel.powers") : Eigen::MatrixXd();
    const Eigen::MatrixXd q = j.contains("decays") ? matrix(j["decays"], "kernel.decays") : Eigen::MatrixXd();
    const double lo = required_number(j, "s_lo", "kernel");
    if (!j.contains("s_hi")) throw ConfigError("kernel: missing 's_hi'");
    const double hi = number_or_inf(j["s_hi"], "kernel.s_hi");
    return KernelModel::exp_mixture(lo, hi, c, p, q, number(j, "s_max", 200.0));
  }
  if (t == "tabulated") {
    const int n = j.contains("size") ? j["size"].get<int>() : n_hint;
    return KernelModel::from_csv(path_of(j, base, "kernel"), n);
  }
  throw ConfigError("kernel: unknown type '" + t + "'");
}

WeightModel parse_weight(const json& j, const fs::path& base, const std::string& where) {
  const std::string t = type_of(j, where);
  if (t == "unit") return WeightModel::unit();
  if (t == "exp_sqrt") return WeightModel::exp_sqrt(required_number(j, "epsilon", where));
  if (t == "rational_power")
    return WeightModel::rational_power(required_number(j, "epsilon", where), required_number(j, "alpha", where));
  if (t == "tabulated") return WeightModel::from_csv(path_of(j, base, where));
  throw ConfigError(where + ": unknown type '" + t + "'");
}

double eta_value(const json& j, double computed, const std::string& where) {
  if (!j.contains("eta") || (j["eta"].is_string() && j["eta"] == "auto")) return computed;
  if (!j["eta"].is_number()) throw ConfigError(where + ": 'eta' must be a number or \"auto\"");
  return j["eta"].get<double>();
}

NonlinModel parse_nonlin(const json& j, const fs::path& base, double eta, const std::string& where) {
  const std::string t = type_of(j, where);
  if (t == "power") return NonlinModel::power(required_number(j, "alpha", where), eta_value(j, eta, where));
  if (t == "sqrt_power") return NonlinModel::sqrt_power(required_number(j, "alpha", where), eta_value(j, eta, where));
  if (t == "two_powers")
    return NonlinModel::two_powers(required_number(j, "alpha", where), required_number(j, "beta", where),
                                   eta_value(j, eta, where));
  if (t == "exp_saturation")
    return NonlinModel::exp_saturation(required_number(j, "alpha", where), eta_value(j, eta, where));
  if (t == "tabulated") return NonlinModel::from_csv(path_of(j, base, where));
  throw ConfigError(where + ": unknown type '" + t + "'");
}

PhiModel parse_phi(const json& j, const fs::path& base, const std::vector<NonlinModel>& nonlins) {
  if (j.is_null() || (j.is_string() && j == "auto")) {
    // The largest paired exponent serves every component at once.
    double p = 0.0;
    for (const auto& g : nonlins) p = std::max(p, std::get<PowerPhi>(PhiModel::paired_with(g).variant()).exponent);
    return PhiModel::power(p);
  }
  const std::string t = type_of(j, "phi");
  if (t == "power") return PhiModel::power(required_number(j, "exponent", "phi"));
  if (t == "tabulated") return PhiModel::from_csv(path_of(j, base, "phi"));
  throw ConfigError("phi: unknown type '" + t + "'");
}

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    a.push_back(r);
  }
  return a;
}

json numerics_json(const Numerics& n) {
  json j{{"quad_tol", n.quad_tol},
         {"tol_eig", n.tol_eig},
         {"tol_alg", n.tol_alg},
         {"tol_trunc", n.tol_trunc},
         {"tol_stop", n.tol_stop},
         {"max_iters", n.max_iters},
         {"use_a_priori", n.use_a_priori},
         {"strict_radius", n.strict_radius},
         {"radius_tol", n.radius_tol},
         {"validation_samples", n.validation_samples},
         {"validation_tol", n.validation_tol},
         {"uniqueness_scale", n.uniqueness_scale}};
  if (n.n_cells) j["n_cells"] = *n.n_cells;
  else j["h"] = n.h;
  j["mono_slack"] = n.mono_slack ? json(*n.mono_slack) : json(nullptr);
  return j;
}

json spectral_json(const SpectralData& d, double kernel_scale, int a_priori) {
  return json{{"kernel_scale", kernel_scale},
              {"a", mat(d.a)},
              {"spectral_radius", d.radius},
              {"eta", vec(d.eta)},
              {"w", vec(d.w)},
              {"b", mat(d.b)},
              {"xi", vec(d.xi)},
              {"xi_start_scale", d.xi_start_scale},
              {"xi_iterations", d.xi_iterations},
              {"sigma", d.sigma},
              {"k", d.k},
              {"a_priori_iterations", a_priori}};
}

json solution_json(const SolutionReport& s, const ProblemSpec& spec) {
  json trace = json::array();
  for (const auto& st : s.trace.steps)
    trace.push_back({{"n", st.n},
                     {"d", st.diff},
                     {"envelope", st.envelope},
                     {"rate_bound", st.rate_bound},
                     {"mono_violation", st.mono_violation},
                     {"lower_violation", st.lower_violation},
                     {"upper_violation", st.upper_violation},
                     {"violation_count", st.violation_count}});
  json asym = json::array();
  for (std::size_t i = 0; i < s.asymptotics.size(); ++i) {
    const auto& a = s.asymptotics[i];
    asym.push_back({{"component", spec.label(static_cast<int>(i))},
                    {"edge_deviation", std::max(a.edge_left, a.edge_right)},
                    {"edge_deviation_left", a.edge_left},
                    {"edge_deviation_right", a.edge_right},
                    {"tail_integral", a.tail_integral},
                    {"half_tail_ratio", a.half_tail_ratio}});
  }
  json limits = json::array();
  for (int i = 0; i < s.field.components(); ++i)
    limits.push_back({{"component", spec.label(i)},
                      {"minus", s.field.values(i, 0)},
                      {"plus", s.field.values(i, s.field.grid.n_cells)},
                      {"continuation", s.field.boundary(i)}});
  json j{{"iterations", s.iterations},
         {"a_priori_iterations", s.a_priori_iterations},
         {"termination", to_string(s.termination)},
         {"residual", s.residual},
         {"quadrature_error", s.quadrature_error},
         {"mono_slack", s.mono_slack},
         {"bounds",
          {{"max_mono_violation", s.trace.max_mono_violation()},
           {"max_lower_violation", s.trace.max_lower_violation()},
           {"max_upper_violation", s.trace.max_upper_violation()},
           {"violations_within_slack", s.trace.total_violations()}}},
         {"limits", limits},
         {"trace", trace},
         {"asymptotics", asym}};
  j["uniqueness_deviation"] = s.uniqueness_deviation ? json(*s.uniqueness_deviation) : json(nullptr);
  return j;
}

struct Logger {
  bool quiet;
  void operator()(const std::string& s) const {
    if (!quiet) std::cerr << s << '\n';
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string describe_failures(const ValidationReport& v) {
  std::string msg = "validation failed:";
  for (const auto& c : v.conditions)
    if (!c.pass) msg += " condition " + c.id + ") " + c.detail + ";";
  msg.pop_back();
  return msg;
}

ValidationOptions validation_options(const Numerics& n) {
  return {n.validation_samples, n.validation_tol, n.quad_tol, n.radius_tol};
}

SpectralOptions spectral_options(const Numerics& n) { return {n.quad_tol, n.tol_eig, n.tol_alg, n.radius_tol}; }

Grid make_grid(const Numerics& n, double radius) {
  return Grid(radius, n.n_cells ? *n.n_cells : cells_for_spacing(radius, n.h));
}

double truncation_for(const ProblemSpec& spec, const SpectralData& d, const Numerics& n) {
  double g_bound = 0.0;
  for (int j = 0; j < spec.size(); ++j) g_bound = std::max(g_bound, spec.nonlins[static_cast<std::size_t>(j)].eval(d.xi(j)));
  return choose_truncation(spec.kernel, spec.weights, g_bound, n.tol_trunc);
}

SolveOptions solve_options(const Numerics& n) {
  SolveOptions o;
  o.tol_stop = n.tol_stop;
  o.max_iters = n.max_iters;
  o.mono_slack = n.mono_slack;
  o.use_a_priori = n.use_a_priori;
  return o;
}

}  // namespace

Mode parse_mode(const std::string& s) {
  if (s == "solve") return Mode::solve;
  if (s == "validate" || s == "validate-only") return Mode::validate;
  if (s == "sweep") return Mode::sweep;
  throw ConfigError("unknown mode '" + s + "' (expected solve, validate or sweep)");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::solve:
      return "solve";
    case Mode::validate:
      return "validate";
    case Mode::sweep:
      return "sweep";
  }
  return "solve";
}

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  RunConfig cfg;
  cfg.source = doc;
  cfg.base_dir = base_dir;
  if (!doc.contains("problem") || !doc["problem"].is_object()) throw ConfigError("config: missing 'problem' object");
  cfg.problem = doc["problem"];
  for (const char* key : {"kernel", "weights", "nonlinearities"})
    if (!cfg.problem.contains(key)) throw ConfigError(std::string("problem: missing '") + key + "'");
  if (!cfg.problem["weights"].is_array() || !cfg.problem["nonlinearities"].is_array())
    throw ConfigError("problem: 'weights' and 'nonlinearities' must be arrays");

  try {
    if (doc.contains("numerics")) {
      const auto& j = doc["numerics"];
      if (!j.is_object()) throw ConfigError("numerics must be an object");
      auto& n = cfg.numerics;
      n.quad_tol = number(j, "quad_tol", n.quad_tol);
      n.tol_eig = number(j, "tol_eig", n.tol_eig);
      n.tol_alg = number(j, "tol_alg", n.tol_alg);
      n.tol_trunc = number(j, "tol_trunc", n.tol_trunc);
      n.tol_stop = number(j, "tol_stop", n.tol_stop);
      n.radius_tol = number(j, "radius_tol", n.radius_tol);
      n.validation_tol = number(j, "validation_tol", n.validation_tol);
      n.uniqueness_scale = number(j, "uniqueness_scale", n.uniqueness_scale);
      n.h = number(j, "h", n.h);
      if (j.contains("n_cells") && !j["n_cells"].is_null()) n.n_cells = j["n_cells"].get<int>();
      if (j.contains("max_iters")) n.max_iters = j["max_iters"].get<int>();
      if (j.contains("validation_samples")) n.validation_samples = j["validation_samples"].get<int>();
      if (j.contains("mono_slack") && !j["mono_slack"].is_null()) n.mono_slack = j["mono_slack"].get<double>();
      if (j.contains("use_a_priori")) n.use_a_priori = j["use_a_priori"].get<bool>();
      if (j.contains("strict_radius")) n.strict_radius = j["strict_radius"].get<bool>();
    }
    if (doc.contains("output")) {
      const auto& o = doc["output"];
      if (o.contains("profile")) cfg.profile_name = o["profile"].get<std::string>();
      if (o.contains("report")) cfg.report_name = o["report"].get<std::string>();
    }
    if (doc.contains("mode")) cfg.mode = parse_mode(doc["mode"].get<std::string>());
    if (doc.contains("sweep")) {
      const auto& s = doc["sweep"];
      if (!s.contains("epsilons") || !s["epsilons"].is_array()) throw ConfigError("sweep: missing 'epsilons' array");
      cfg.sweep_epsilons = s["epsilons"].get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  const auto& n = cfg.numerics;
  for (double t : {n.quad_tol, n.tol_eig, n.tol_alg, n.tol_trunc, n.tol_stop, n.radius_tol, n.validation_tol, n.h})
    if (!(t > 0.0)) throw ConfigError("numerics: tolerances and h must be positive");
  if (n.n_cells && (*n.n_cells <= 0 || *n.n_cells % 2 != 0)) throw ConfigError("numerics: n_cells must be even and positive");
  if (n.max_iters < 1) throw ConfigError("numerics: max_iters must be positive");
  if (n.validation_samples < 2) throw ConfigError("numerics: validation_samples must be at least 2");
  if (n.mono_slack && *n.mono_slack < 0.0) throw ConfigError("numerics: mono_slack must be nonnegative");
  if (n.uniqueness_scale != 0.0 && n.uniqueness_scale < 1.0)
    throw ConfigError("numerics: uniqueness_scale must be 0 (off) or at least 1");
  if (cfg.mode == Mode::sweep && cfg.sweep_epsilons.empty()) throw ConfigError("sweep mode needs sweep.epsilons");
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

ResolvedProblem resolve_problem(const RunConfig& cfg) {
  const auto& p = cfg.problem;
  const int n_hint = static_cast<int>(p["weights"].size());
  std::optional<KernelModel> kernel;
  std::vector<WeightModel> weights;
  double eta_scale = 1.0;
  std::vector<std::string> labels;
  try {
    kernel.emplace(parse_kernel(p["kernel"], cfg.base_dir, n_hint));
    for (std::size_t j = 0; j < p["weights"].size(); ++j)
      weights.push_back(parse_weight(p["weights"][j], cfg.base_dir, "weights[" + std::to_string(j) + "]"));
    eta_scale = number(p, "eta_scale", 1.0);
    if (p.contains("labels")) labels = p["labels"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  } catch (const StructuralError& e) {
    throw ConfigError(e.what());
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  const int n = kernel->size();
  if (static_cast<int>(p["nonlinearities"].size()) != n || static_cast<int>(weights.size()) != n)
    throw ConfigError("problem: kernel is " + std::to_string(n) + "x" + std::to_string(n) + " but " +
                      std::to_string(weights.size()) + " weights and " + std::to_string(p["nonlinearities"].size()) +
                      " nonlinearities were given");
  if (!(eta_scale > 0.0)) throw ConfigError("problem: eta_scale must be positive");

  ResolvedProblem out{ProblemSpec{*kernel, weights, {}, PhiModel::power(1.0), labels, eta_scale}, 1.0, {}};
  // Spectral normalisation and the Perron vector come first so "auto" eta can
  // be resolved.
  KernelScalars scalars;
  try {
    scalars = kernel_scalars(*kernel, cfg.numerics.quad_tol);
  } catch (const QuadratureError& e) {
    throw SpectralError(std::string("kernel scalars: ") + e.what());
  }
  const double rho = spectral_radius(scalars.integral, cfg.numerics.tol_eig);
  if (cfg.numerics.strict_radius && std::abs(rho - 1.0) > cfg.numerics.radius_tol)
    throw SpectralError("spectral radius of A is " + fmt(rho) + " and strict_radius forbids rescaling");
  out.kernel_scale = rho;
  if (rho != 1.0) out.spec.kernel = kernel->scaled(1.0 / rho);
  out.eta = perron_vector(scalars.integral / rho, cfg.numerics.tol_eig) * eta_scale;

  try {
    for (int j = 0; j < n; ++j)
      out.spec.nonlins.push_back(parse_nonlin(p["nonlinearities"][static_cast<std::size_t>(j)], cfg.base_dir, out.eta(j),
                                              "nonlinearities[" + std::to_string(j) + "]"));
    out.spec.phi = parse_phi(p.contains("phi") ? p["phi"] : json(nullptr), cfg.base_dir, out.spec.nonlins);
    out.spec.check_structure();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  } catch (const StructuralError& e) {
    throw ConfigError(e.what());
  }
  return out;
}

void emit_profile(const FieldVector& f, const Eigen::VectorXd& eta, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  const int n = f.components();
  out << "x";
  for (int i = 1; i <= n; ++i) out << ",f_" << i;
  for (int i = 1; i <= n; ++i) out << ",eta_gap_" << i;
  out << '\n';
  out.precision(17);
  for (int m = 0; m < f.grid.size(); ++m) {
    out << f.grid.node(m);
    for (int i = 0; i < n; ++i) out << ',' << f.values(i, m);
    for (int i = 0; i < n; ++i) out << ',' << f.values(i, m) - eta(i);
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

void emit_report(const json& report, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << report.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

json to_json(const ValidationReport& v) {
  json conds = json::array();
  for (const auto& c : v.conditions)
    conds.push_back({{"id", c.id},
                     {"pass", c.pass},
                     {"detail", c.detail},
                     {"worst_point", c.worst_point},
                     {"worst_value", c.worst_value},
                     {"tol", c.tol}});
  return json{{"passed", v.passed()}, {"conditions", conds}};
}

RunResult run(const RunConfig& cfg, const RunOptions& opts) {
  const Logger log{opts.quiet};
  const Mode mode = opts.mode.value_or(cfg.mode);
  RunResult res;
  res.report = json{{"schema_version", kSchemaVersion},
                    {"mode", to_string(mode)},
                    {"config", cfg.source},
                    {"tolerances", numerics_json(cfg.numerics)}};
  const auto& num = cfg.numerics;

  auto fail = [&](int code, const std::string& stage, const std::string& msg) {
    res.exit_code = code;
    res.message = msg;
    res.report["error"] = {{"stage", stage}, {"exit_code", code}, {"message", msg}};
    log("error [" + stage + "]: " + msg);
  };
  auto finish = [&]() {
    if (opts.write_files) {
      try {
        fs::create_directories(opts.out_dir);
        emit_report(res.report, opts.out_dir / cfg.report_name);
      } catch (const std::exception& e) {
        log(std::string("warning: ") + e.what());
      }
    }
    return res;
  };

  if (mode == Mode::sweep && cfg.sweep_epsilons.empty()) {
    fail(kExitConfig, "config", "sweep mode needs sweep.epsilons");
    return finish();
  }

  std::optional<ResolvedProblem> rp;
  try {
    rp = resolve_problem(cfg);
  } catch (const ConfigError& e) {
    fail(kExitConfig, "config", e.what());
    return finish();
  } catch (const Error& e) {
    fail(kExitSpectral, "spectral", e.what());
    return finish();
  }
  if (rp->kernel_scale != 1.0) log("kernel rescaled by 1/" + fmt(rp->kernel_scale) + " to unit spectral radius");

  auto validate = [&](const ProblemSpec& spec) -> bool {
    res.validation = validate_problem(spec, validation_options(num));
    res.report["validation"] = to_json(*res.validation);
    for (const auto& c : res.validation->conditions)
      log("condition " + c.id + ") " + (c.pass ? "pass" : "FAIL") + ": " + c.detail);
    if (res.validation->passed()) return true;
    fail(kExitValidation, "validation", describe_failures(*res.validation));
    return false;
  };

  if (mode == Mode::validate) {
    try {
      validate(rp->spec);
    } catch (const Error& e) {
      fail(kExitConfig, "validation", e.what());
    }
    return finish();
  }

  auto spectral_for = [&](const ProblemSpec& spec, const char*& stage) {
    stage = "spectral";
    auto d = spectral_stage(spec, spectral_options(num));
    stage = "majorant";
    majorant_stage(d, spec, spectral_options(num));
    return d;
  };

  if (mode == Mode::sweep) {
    std::vector<ProblemSpec> specs;
    try {
      for (double eps : cfg.sweep_epsilons) {
        ProblemSpec s = rp->spec;
        for (auto& w : s.weights) w = w.with_epsilon(eps);
        specs.push_back(std::move(s));
      }
    } catch (const Error& e) {
      fail(kExitConfig, "config", std::string("sweep: ") + e.what());
      return finish();
    }
    std::vector<SpectralData> datas;
    std::vector<json> checks;
    double radius = 0.0;
    for (std::size_t q = 0; q < specs.size(); ++q) {
      if (!validate(specs[q])) return finish();
      checks.push_back(res.report["validation"]);
      const char* stage = "spectral";
      try {
        datas.push_back(spectral_for(specs[q], stage));
        radius = std::max(radius, truncation_for(specs[q], datas.back(), num));
      } catch (const SpectralError& e) {
        fail(kExitSpectral, stage, e.what());
        return finish();
      } catch (const MajorantError& e) {
        fail(kExitMajorant, stage, e.what());
        return finish();
      } catch (const Error& e) {
        fail(kExitSolve, "truncation", e.what());
        return finish();
      }
    }
    res.report.erase("validation");
    const Grid grid = make_grid(num, radius);
    res.grid = grid;
    res.report["grid"] = {{"radius", grid.radius}, {"n_cells", grid.n_cells}, {"h", grid.h}};
    json entries = json::array();
    const fs::path stem = fs::path(cfg.profile_name).stem();
    const std::string ext = fs::path(cfg.profile_name).extension().string();
    for (std::size_t q = 0; q < specs.size(); ++q) {
      try {
        const auto plan = build_plan(specs[q], grid);
        auto sol = solve(specs[q], datas[q], plan, solve_options(num));
        const double bump = (sol.field.values.colwise() - datas[q].eta).maxCoeff();
        const std::string profile = stem.string() + "_" + std::to_string(q + 1) + ext;
        entries.push_back({{"epsilon", cfg.sweep_epsilons[q]},
                           {"profile", profile},
                           {"max_eta_gap", bump},
                           {"validation", checks[q]},
                           {"spectral", spectral_json(datas[q], rp->kernel_scale, sol.a_priori_iterations)},
                           {"solve", solution_json(sol, specs[q])}});
        log("epsilon " + fmt(cfg.sweep_epsilons[q]) + ": " + std::to_string(sol.iterations) + " iterations, max f - eta " +
            fmt(bump));
        if (opts.write_files) {
          fs::create_directories(opts.out_dir);
          emit_profile(sol.field, datas[q].eta, opts.out_dir / profile);
        }
        if (sol.termination == Termination::max_iterations) {
          res.report["entries"] = entries;
          fail(kExitSolve, "solve", "epsilon " + fmt(cfg.sweep_epsilons[q]) + ": iteration cap reached");
          return finish();
        }
      } catch (const Error& e) {
        res.report["entries"] = entries;
        fail(kExitSolve, "solve", "epsilon " + fmt(cfg.sweep_epsilons[q]) + ": " + e.what());
        return finish();
      }
    }
    res.report["entries"] = entries;
    res.message = "sweep finished";
    return finish();
  }

  // Solve.
  try {
    if (!validate(rp->spec)) return finish();
  } catch (const Error& e) {
    fail(kExitConfig, "validation", e.what());
    return finish();
  }
  const auto& spec = rp->spec;
  const char* stage = "spectral";
  try {
    res.spectral = spectral_for(spec, stage);
  } catch (const SpectralError& e) {
    fail(kExitSpectral, stage, e.what());
    return finish();
  } catch (const MajorantError& e) {
    fail(kExitMajorant, stage, e.what());
    return finish();
  } catch (const Error& e) {
    fail(std::string(stage) == "majorant" ? kExitMajorant : kExitSpectral, stage, e.what());
    return finish();
  }
  const auto& sd = *res.spectral;
  const int a_priori = a_priori_iterations(sd.sigma, sd.k, num.tol_stop);
  res.report["spectral"] = spectral_json(sd, rp->kernel_scale, a_priori);
  log("xi = " + fmt(sd.xi.maxCoeff()) + " (max), sigma = " + fmt(sd.sigma) + ", k = " + fmt(sd.k) +
      ", a-priori iterations " + std::to_string(a_priori));

  try {
    const double radius = truncation_for(spec, sd, num);
    const Grid grid = make_grid(num, radius);
    res.grid = grid;
    res.report["grid"] = {{"radius", grid.radius}, {"n_cells", grid.n_cells}, {"h", grid.h}};
    log("grid R = " + fmt(grid.radius) + ", n_cells = " + std::to_string(grid.n_cells));
    const auto plan = build_plan(spec, grid);
    auto sol = solve(spec, sd, plan, solve_options(num));
    log(to_string(sol.termination) + " after " + std::to_string(sol.iterations) + " iterations, residual " +
        fmt(sol.residual));
    if (sol.termination == Termination::max_iterations) {
      res.solution = std::move(sol);
      res.report["solve"] = solution_json(*res.solution, spec);
      fail(kExitSolve, "solve", "iteration cap of " + std::to_string(num.max_iters) + " reached");
      return finish();
    }
    if (num.uniqueness_scale > 0.0) {
      const double dev = uniqueness_probe(spec, sd, plan, sol, num.uniqueness_scale, solve_options(num));
      log("uniqueness probe from " + fmt(num.uniqueness_scale) + " xi: deviation " + fmt(dev));
    }
    res.solution = std::move(sol);
    res.report["solve"] = solution_json(*res.solution, spec);
    if (opts.write_files) {
      fs::create_directories(opts.out_dir);
      emit_profile(res.solution->field, sd.eta, opts.out_dir / cfg.profile_name);
    }
  } catch (const SolveError& e) {
    std::string where;
    if (e.component() >= 0) where += " [component " + std::to_string(e.component() + 1) + "]";
    if (e.node() >= 0) where += " [node " + std::to_string(e.node()) + "]";
    if (e.step() >= 0) where += " [step " + std::to_string(e.step()) + "]";
    fail(kExitSolve, "solve", e.what() + where);
    return finish();
  } catch (const Error& e) {
    fail(kExitSolve, "solve", e.what());
    return finish();
  }
  res.message = "solved";
  return finish();
}

}  // namespace convsolve
