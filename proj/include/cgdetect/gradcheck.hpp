#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace cgd {

struct GradCheckOptions {
  double tolerance = 1e-5;
  /// Perturbation is rel_step * max(1, |x_i|).
  double rel_step = 1e-5;
  /// Denominator floor for the relative error, so coordinates whose true
  /// gradient is ~0 are judged on absolute error.
  double abs_floor = 1e-6;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coord = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t coords_checked = 0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Scalar objective over a flat parameter vector.
using Objective = std::function<double(std::span<const double>)>;

/// Compares `analytic` against central differences of `f` at `point`.
/// Checks `coords` if non-empty, otherwise every coordinate. Relative error
/// per coordinate is |a - n| / max(|a|, |n|, abs_floor).
/// Throws NumericError if f returns a non-finite value.
GradCheckReport gradient_check(const Objective& f, std::span<const double> point,
                               std::span<const double> analytic, const GradCheckOptions& opt = {},
                               std::span<const std::size_t> coords = {});

/// Central difference derivative of f along coordinate i.
double central_difference(const Objective& f, std::span<const double> point, std::size_t i,
                          double rel_step = 1e-5);

}  // namespace cgd
