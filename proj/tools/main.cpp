#include <CLI11.hpp>
#include <iostream>

#include "convsolve/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Monotone iteration solver for nonlinear singular convolution systems on the line"};
  std::string config;
  std::string mode;
  std::string out_dir = ".";
  bool quiet = false;
  app.add_option("--config", config, "JSON run configuration")->required();
  app.add_option("--mode", mode, "solve | validate | sweep (overrides the config)");
  app.add_option("--out-dir", out_dir, "directory for the profile CSV and report JSON");
  app.add_flag("--quiet", quiet, "only print errors");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : convsolve::kExitConfig;
  }

  convsolve::RunOptions opts;
  opts.out_dir = out_dir;
  opts.quiet = quiet;
  try {
    if (!mode.empty()) opts.mode = convsolve::parse_mode(mode);
    const auto cfg = convsolve::load_config(config);
    const auto res = convsolve::run(cfg, opts);
    if (res.exit_code != convsolve::kExitOk && quiet) std::cerr << "error: " << res.message << '\n';
    if (res.exit_code == convsolve::kExitOk && !quiet) std::cerr << res.message << '\n';
    return res.exit_code;
  } catch (const convsolve::ConfigError& e) {
    std::cerr << "error [config]: " << e.what() << '\n';
    return convsolve::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return convsolve::kExitConfig;
  }
}
