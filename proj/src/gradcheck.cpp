#include "cgdetect/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cgdetect/errors.hpp"

namespace cgd {

double central_difference(const Objective& f, std::span<const double> point, std::size_t i,
                          double rel_step) {
  std::vector<double> x(point.begin(), point.end());
  const double h = rel_step * std::max(1.0, std::abs(x[i]));
  x[i] = point[i] + h;
  const double up = f(x);
  x[i] = point[i] - h;
  const double down = f(x);
  if (!std::isfinite(up) || !std::isfinite(down)) {
    throw NumericError("gradient_check: non-finite objective at coordinate " + std::to_string(i));
  }
  return (up - down) / (2.0 * h);
}

GradCheckReport gradient_check(const Objective& f, std::span<const double> point,
                               std::span<const double> analytic, const GradCheckOptions& opt,
                               std::span<const std::size_t> coords) {
  if (analytic.size() != point.size()) {
    throw NumericError("gradient_check: analytic gradient length does not match point");
  }
  GradCheckReport report;
  report.tolerance = opt.tolerance;
  auto check = [&](std::size_t i) {
    if (!std::isfinite(analytic[i])) {
      throw NumericError("gradient_check: non-finite analytic gradient at " + std::to_string(i));
    }
    const double numeric = central_difference(f, point, i, opt.rel_step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), opt.abs_floor});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (report.coords_checked == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_coord = i;
      report.analytic_at_worst = analytic[i];
      report.numeric_at_worst = numeric;
    }
    ++report.coords_checked;
  };
  if (coords.empty()) {
    for (std::size_t i = 0; i < point.size(); ++i) check(i);
  } else {
    for (std::size_t i : coords) {
      if (i >= point.size()) throw NumericError("gradient_check: coordinate out of range");
      check(i);
    }
  }
  report.passed = report.max_rel_error < opt.tolerance;
  return report;
}

}  // namespace cgd
