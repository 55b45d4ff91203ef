#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "convsolve/errors.hpp"
#include "convsolve/solver.hpp"
#include "convsolve/validation.hpp"

namespace convsolve {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitValidation = 2,
  kExitSpectral = 3,
  kExitMajorant = 4,
  kExitSolve = 5,
};

enum class Mode { solve, validate, sweep };
Mode parse_mode(const std::string& s);
std::string to_string(Mode m);

struct Numerics {
  double quad_tol = 1e-12;
  double tol_eig = 1e-14;
  double tol_alg = 1e-14;
  double tol_trunc = 1e-8;
  double tol_stop = 1e-8;
  std::optional<int> n_cells;
  double h = 1.0 / 64.0;  // used when n_cells is absent
  int max_iters = 10000;
  std::optional<double> mono_slack;
  bool use_a_priori = true;
  bool strict_radius = false;  // refuse to rescale a kernel with rho(A) != 1
  double radius_tol = 1e-9;
  int validation_samples = 400;
  double validation_tol = 1e-10;
  double uniqueness_scale = 2.0;  // 0 disables the probe
};

struct RunConfig {
  nlohmann::json source;  // the parsed document, echoed into the report
  nlohmann::json problem;
  std::filesystem::path base_dir;
  Numerics numerics;
  Mode mode = Mode::solve;
  std::string profile_name = "profile.csv";
  std::string report_name = "report.json";
  std::vector<double> sweep_epsilons;
};

// Thrown for unreadable or inconsistent configuration documents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

// Problem with the kernel rescaled to unit radius and every "auto" eta and
// phi resolved.
struct ResolvedProblem {
  ProblemSpec spec;
  double kernel_scale = 1.0;  // rho(A) of the kernel as configured
  Eigen::VectorXd eta;
};

// Throws ConfigError for bad descriptions and SpectralError when the kernel
// cannot be normalised.
ResolvedProblem resolve_problem(const RunConfig& cfg);

struct RunOptions {
  std::filesystem::path out_dir = ".";
  std::optional<Mode> mode;  // overrides the config
  bool quiet = false;
  bool write_files = true;
};

struct RunResult {
  int exit_code = kExitOk;
  std::string message;
  nlohmann::json report;
  std::optional<ValidationReport> validation;
  std::optional<SpectralData> spectral;
  std::optional<SolutionReport> solution;
  std::optional<Grid> grid;
};

RunResult run(const RunConfig& cfg, const RunOptions& opts = {});

void emit_profile(const FieldVector& f, const Eigen::VectorXd& eta, const std::filesystem::path& path);
void emit_report(const nlohmann::json& report, const std::filesystem::path& path);

nlohmann::json to_json(const ValidationReport& v);

}  // namespace convsolve
