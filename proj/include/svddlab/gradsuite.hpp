#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace svddlab {

struct GradCase {
  std::string name;
  std::function<double()> max_error;  // runs grad_check(s), returns the worst error
};

struct GradRow {
  std::string name;
  double max_error = 0.0;
  bool pass = false;
};

inline constexpr double kGradTolerance = 1e-4;

/// One case per autodiff op plus the five training losses composed with a
/// small two-layer encoder (gradients w.r.t. every parameter tensor).
std::vector<GradCase> default_grad_cases();

std::vector<GradRow> run_grad_suite(const std::vector<GradCase>& cases, double tolerance = kGradTolerance);

/// Fixed-width table: name, max_error, pass/fail.
void print_grad_table(std::ostream& out, const std::vector<GradRow>& rows);

}  // namespace svddlab
