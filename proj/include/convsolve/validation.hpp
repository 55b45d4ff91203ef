#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "convsolve/problem.hpp"

namespace convsolve {

struct ConditionResult {
  std::string id;  // "1", "2", "a", "b", "I", "II", "III", "IV"
  bool pass = false;
  std::string detail;
  double worst_point = 0.0;  // sample where the margin was smallest
  double worst_value = 0.0;  // that margin (negative means violated)
  double tol = 0.0;
};

struct ValidationReport {
  std::vector<ConditionResult> conditions;

  bool passed() const;
  const ConditionResult& at(const std::string& id) const;
  std::vector<std::string> failed_ids() const;
};

struct ValidationOptions {
  int samples = 400;
  double tol = 1e-10;
  double quad_tol = 1e-12;
  double radius_tol = 1e-9;
};

// Samples every structural condition of the system. eta is recomputed from
// the kernel; condition II is checked against the declared eta of each
// nonlinearity and against that computed eta.
ValidationReport validate_problem(const ProblemSpec& spec, const ValidationOptions& opts = {});

inline const std::vector<std::string>& condition_ids() {
  static const std::vector<std::string> ids{"1", "2", "a", "b", "I", "II", "III", "IV"};
  return ids;
}

}  // namespace convsolve
