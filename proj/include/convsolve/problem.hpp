#pragma once

#include <string>
#include <vector>

#include "convsolve/kernels.hpp"
#include "convsolve/nonlinearities.hpp"
#include "convsolve/weights.hpp"

namespace convsolve {

// One instance of the system
//   f_i(x) = sum_j int K_ij(x - t) mu_j(t) G_j(f_j(t)) dt,  i = 1..N.
// Immutable once built; N is the kernel size.
struct ProblemSpec {
  KernelModel kernel;
  std::vector<WeightModel> weights;
  std::vector<NonlinModel> nonlins;
  PhiModel phi;
  std::vector<std::string> labels;
  // Multiplies the max-normalised Perron vector.
  double eta_scale = 1.0;

  int size() const noexcept { return kernel.size(); }
  // Throws StructuralError on list-length mismatches or a bad eta_scale.
  void check_structure() const;
  std::string label(int i) const;
};

}  // namespace convsolve
