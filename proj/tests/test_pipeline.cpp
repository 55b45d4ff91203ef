#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "convsolve/csv.hpp"
#include "convsolve/pipeline.hpp"
#include "test_util.hpp"

using namespace convsolve;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kConfigs = fs::path(CONVSOLVE_SOURCE_DIR) / "configs";

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "convsolve_tests" / name;
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_file(const std::string& name, const fs::path& out, std::optional<Mode> mode = std::nullopt) {
  RunOptions o;
  o.out_dir = out;
  o.quiet = true;
  o.mode = mode;
  return run(load_config(kConfigs / name), o);
}

json scalar_doc() { return json::parse(slurp(kConfigs / "flagship.json")); }

}  // namespace

TEST_CASE("scalar config solves and writes both outputs") {
  const auto out = fresh_dir("flagship");
  const auto r = run_file("flagship.json", out);
  REQUIRE(r.exit_code == kExitOk);
  REQUIRE(fs::exists(out / "report.json"));
  REQUIRE(fs::exists(out / "profile.csv"));

  const auto t = read_csv((out / "profile.csv").string());
  CHECK(t.columns == std::vector<std::string>{"x", "f_1", "eta_gap_1"});
  CHECK(static_cast<int>(t.rows.size()) == r.grid->n_cells + 1);
  CHECK(r.grid->n_cells == 4096);
  bool has_zero = false;
  for (const auto& row : t.rows) {
    has_zero = has_zero || row[0] == 0.0;
    CHECK(row[1] >= 1.0 - 1e-12);
    CHECK(row[1] <= 1.44 + 1e-12);
    CHECK(row[2] == doctest::Approx(row[1] - 1.0).epsilon(1e-12));
  }
  CHECK(has_zero);

  const auto rep = json::parse(slurp(out / "report.json"));
  CHECK(rep["schema_version"] == 1);
  CHECK(rep["spectral"]["sigma"].get<double>() == doctest::Approx(0.6944444).epsilon(1e-7));
  CHECK(rep["spectral"]["k"].get<double>() == doctest::Approx(0.6292254).epsilon(1e-7));
  CHECK(rep["spectral"]["xi"][0].get<double>() == doctest::Approx(1.44).epsilon(1e-10));
  CHECK(rep["spectral"]["a_priori_iterations"] == 40);
  CHECK(rep["solve"]["termination"] == "converged");
  CHECK(rep["solve"]["iterations"].get<int>() <= 40);
  CHECK(rep["solve"].contains("uniqueness_deviation"));
  CHECK(rep["validation"].is_object());
  CHECK_FALSE(rep.contains("error"));
}

TEST_CASE("reports are byte-reproducible") {
  const auto a = fresh_dir("repro_a"), b = fresh_dir("repro_b");
  REQUIRE(run_file("flagship.json", a).exit_code == kExitOk);
  REQUIRE(run_file("flagship.json", b).exit_code == kExitOk);
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
  CHECK(slurp(a / "profile.csv") == slurp(b / "profile.csv"));
}

TEST_CASE("validate mode stops after validation") {
  const auto out = fresh_dir("validate");
  const auto r = run_file("flagship.json", out, Mode::validate);
  CHECK(r.exit_code == kExitOk);
  const auto rep = json::parse(slurp(out / "report.json"));
  CHECK(rep["mode"] == "validate");
  CHECK(rep.contains("validation"));
  CHECK_FALSE(rep.contains("solve"));
  CHECK_FALSE(rep.contains("spectral"));
  CHECK_FALSE(fs::exists(out / "profile.csv"));
  CHECK(parse_mode("validate-only") == Mode::validate);
}

TEST_CASE("sweep produces one entry per epsilon") {
  const auto out = fresh_dir("sweep");
  const auto r = run_file("flagship.json", out, Mode::sweep);
  REQUIRE(r.exit_code == kExitOk);
  const auto rep = json::parse(slurp(out / "report.json"));
  const auto& e = rep["entries"];
  REQUIRE(e.size() == 3);
  double prev = 0.0;
  for (const auto& entry : e) {
    const double gap = entry["max_eta_gap"].get<double>();
    CHECK(gap > prev);
    prev = gap;
    CHECK(fs::exists(out / entry["profile"].get<std::string>()));
    CHECK(entry["solve"]["termination"] == "converged");
  }
}

TEST_CASE("negative configurations name the failed condition") {
  const struct {
    const char* file;
    const char* cond;
  } cases[] = {{"mu_one.json", "condition a)"}, {"linear_g.json", "condition III)"}, {"mismatched_phi.json", "condition IV)"}};
  for (const auto& c : cases) {
    const auto out = fresh_dir(std::string("neg_") + c.file);
    const auto r = run_file(c.file, out);
    CHECK_MESSAGE(r.exit_code == kExitValidation, c.file);
    CHECK_MESSAGE(r.message.find(c.cond) != std::string::npos, r.message);
    const auto rep = json::parse(slurp(out / "report.json"));
    CHECK(rep["error"]["stage"] == "validation");
    CHECK(rep["error"]["exit_code"] == kExitValidation);
  }
}

TEST_CASE("config errors exit with 1") {
  auto doc = scalar_doc();
  doc["problem"]["kernel"]["type"] = "lorentzian";
  RunOptions o;
  o.write_files = false;
  o.quiet = true;
  CHECK_THROWS_AS(resolve_problem(parse_config(doc)), ConfigError);
  CHECK(run(parse_config(doc), o).exit_code == kExitConfig);
  CHECK_THROWS_AS(load_config("/nonexistent/convsolve.json"), ConfigError);

  auto mismatch = scalar_doc();
  mismatch["problem"]["weights"].push_back({{"type", "unit"}});
  CHECK(run(parse_config(mismatch), o).exit_code == kExitConfig);

  auto no_sweep = scalar_doc();
  no_sweep.erase("sweep");
  o.mode = Mode::sweep;
  CHECK(run(parse_config(no_sweep), o).exit_code == kExitConfig);
}

TEST_CASE("kernels off unit radius are rescaled unless strict") {
  auto doc = scalar_doc();
  doc["problem"]["kernel"]["coefficients"] = {{2.0}};
  RunOptions o;
  o.write_files = false;
  o.quiet = true;
  o.mode = Mode::validate;
  const auto cfg = parse_config(doc);
  const auto rp = resolve_problem(cfg);
  CHECK(rp.kernel_scale == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(run(cfg, o).exit_code == kExitOk);

  doc["numerics"]["strict_radius"] = true;
  o.mode = Mode::solve;
  const auto r = run(parse_config(doc), o);
  CHECK(r.exit_code == kExitSpectral);
  CHECK(r.report["error"]["stage"] == "spectral");
}

TEST_CASE("iteration cap exits with 5") {
  auto doc = scalar_doc();
  doc["numerics"]["max_iters"] = 3;
  doc["numerics"]["use_a_priori"] = false;
  RunOptions o;
  o.write_files = false;
  o.quiet = true;
  const auto r = run(parse_config(doc), o);
  CHECK(r.exit_code == kExitSolve);
  CHECK(r.report["solve"]["iterations"] == 3);
}

TEST_CASE("auto eta and phi are resolved") {
  const auto cfg = load_config(kConfigs / "coupled_n2.json");
  const auto rp = resolve_problem(cfg);
  REQUIRE(rp.spec.size() == 2);
  for (int j = 0; j < 2; ++j) CHECK(rp.spec.nonlins[j].eval(rp.eta(j)) == doctest::Approx(rp.eta(j)).epsilon(1e-13));
  CHECK(std::get<PowerPhi>(rp.spec.phi.variant()).exponent == 0.5);
  CHECK(rp.spec.label(0) == "u");
  CHECK(validate_problem(rp.spec).passed());
}

TEST_CASE("tabulated inputs resolve relative to the config") {
  const auto dir = fresh_dir("tabulated");
  fs::create_directories(dir);
  std::ofstream(dir / "g.csv") << "u,g\n0,0\n0.5,0.7\n1,1\n2,1.4\n4,1.9\n";
  std::ofstream(dir / "w.csv") << "# gamma=0.5\nt,mu_minus_1\n0.5,0.1\n4,0.01\n8,0\n";
  auto doc = scalar_doc();
  doc["problem"]["nonlinearities"] = {{{"type", "tabulated"}, {"path", "g.csv"}}};
  doc["problem"]["weights"] = {{{"type", "tabulated"}, {"path", "w.csv"}}};
  std::ofstream(dir / "cfg.json") << doc.dump(2);
  const auto cfg = load_config(dir / "cfg.json");
  const auto rp = resolve_problem(cfg);
  CHECK(rp.spec.weights[0].support_radius() == 8.0);
  CHECK(rp.spec.nonlins[0].eval(1.0) == doctest::Approx(1.0));
}
