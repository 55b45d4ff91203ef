#include "convsolve/problem.hpp"

#include <cmath>

#include "convsolve/errors.hpp"

namespace convsolve {

void ProblemSpec::check_structure() const {
  const auto n = static_cast<std::size_t>(size());
  if (n == 0) throw StructuralError("problem: system size must be at least 1");
  if (weights.size() != n)
    throw StructuralError("problem: expected " + std::to_string(n) + " weights, got " + std::to_string(weights.size()));
  if (nonlins.size() != n)
    throw StructuralError("problem: expected " + std::to_string(n) + " nonlinearities, got " +
                          std::to_string(nonlins.size()));
  if (!labels.empty() && labels.size() != n)
    throw StructuralError("problem: expected " + std::to_string(n) + " labels, got " + std::to_string(labels.size()));
  if (!(eta_scale > 0.0) || !std::isfinite(eta_scale)) throw StructuralError("problem: eta_scale must be positive");
}

std::string ProblemSpec::label(int i) const {
  if (i >= 0 && static_cast<std::size_t>(i) < labels.size()) return labels[static_cast<std::size_t>(i)];
  return "f_" + std::to_string(i + 1);
}

}  // namespace convsolve
