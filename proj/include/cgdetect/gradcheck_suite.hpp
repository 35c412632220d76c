#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgdetect/gradcheck.hpp"

namespace cgd {

struct SuiteOptions {
  std::uint64_t seed = 0;
  /// Negative control: scales one coordinate of the analytic SoftPool input
  /// gradient so that its check must fail.
  bool perturb_softpool = false;
  /// Sampled parameters in the whole-model check.
  std::size_t model_coords = 50;
};

struct SuiteEntry {
  std::string op;
  GradCheckReport report;
};

/// Finite-difference checks at 64-bit of every backward pass: conv2d (stride
/// 1 and 2), batchnorm (train mode), ReLU away from the kink, linear,
/// SoftPool, max pooling, global average pooling, softmax cross-entropy and
/// a tiny whole model (crop 32, width 0.25).
std::vector<SuiteEntry> run_gradcheck_suite(const SuiteOptions& opt = {});

/// One report line: op, tolerance, measured error, worst coordinate, verdict.
std::string format_suite_entry(const SuiteEntry& e);

}  // namespace cgd
