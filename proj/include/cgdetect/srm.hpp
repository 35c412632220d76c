#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cgdetect/tensor.hpp"

// Fixed high-pass residual kernels from the spatial rich model (SRM).
//
// The bank holds 30 kernels: 8 first-order, 4 second-order, 8 third-order,
// 4 EDGE3x3, 1 SQUARE3x3, 4 EDGE5x5 and 1 SQUARE5x5. All taps are integers
// on a 5x5 grid centred at (2, 2); each kernel has an integer normalizer the
// raw correlation is divided by. Subsets:
//
//   first_order   8   first_*
//   second_order  4   second_*
//   third_order   8   third_*
//   all_3x3      17   first_*, second_*, edge3_*, square3
//   all_5x5      13   third_*, edge5_*, square5
//   all_30       30   every kernel, in bank order
//
// The first- and second-order kernels count as "filled" 3x3 kernels and the
// third-order kernels as "filled" 5x5 kernels, so all_3x3 and all_5x5
// partition the bank.

namespace cgd {

enum class SrmFamily { first_order, second_order, third_order, edge3x3, square3x3, edge5x5, square5x5 };

std::string_view to_string(SrmFamily family);

struct SrmKernel {
  std::string name;
  SrmFamily family;
  std::array<int, 25> taps;  // row-major 5x5
  int normalizer;

  int tap(int dy, int dx) const { return taps[static_cast<std::size_t>((dy + 2) * 5 + dx + 2)]; }
  /// 3 for kernels confined to the central 3x3, else 5.
  int support() const;
};

struct FilterSubset {
  std::string name;
  std::vector<std::string> members;  // kernel names in bank order
};

class FilterBank {
 public:
  /// Validates zero-sum taps and the checksum of the raw kernel data.
  FilterBank(std::vector<SrmKernel> kernels, std::uint64_t expected_checksum);

  const std::vector<SrmKernel>& kernels() const { return kernels_; }
  const SrmKernel& kernel(std::string_view name) const;
  std::size_t size() const { return kernels_.size(); }

  /// Resolves a subset name (see file comment) or "single:<kernel name>".
  FilterSubset subset(std::string_view name) const;
  static std::vector<std::string> subset_names();

 private:
  std::vector<SrmKernel> kernels_;
};

/// The raw 30-kernel table, before validation.
std::vector<SrmKernel> srm_kernel_table();

/// FNV-1a over names, families, normalizers and taps.
std::uint64_t bank_checksum(const std::vector<SrmKernel>& kernels);

/// Checksum of the shipped kernel table.
extern const std::uint64_t kSrmBankChecksum;

/// The shipped bank. Throws DataError if the embedded table is corrupted.
const FilterBank& load_bank();

/// Correlates every subset kernel with each of R, G, B (reflect padding,
/// stride 1). Output channel order is kernel-major: k0R, k0G, k0B, k1R, ...
/// Expects pixels in the 0-255 range; no truncation is applied.
template <typename T>
Tensor4<T> apply_bank(const FilterBank& bank, const Tensor4<T>& rgb, const FilterSubset& subset);

/// Human-readable listing of every kernel: name, family, normalizer, taps.
std::string dump_kernels(const FilterBank& bank);

}  // namespace cgd
