#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

// Independent adaptive quadrature used as an oracle in tests.
template <class F>
double oracle_integral(F&& f, double a, double b) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14, &err);
}

inline std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto dir = std::filesystem::temp_directory_path() / "convsolve_tests";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}
