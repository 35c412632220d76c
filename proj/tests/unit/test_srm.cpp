#include <gtest/gtest.h>

#include <map>
#include <set>

#include "cgdetect/srm.hpp"
#include "oracles.hpp"

using namespace cgd;

namespace {

Tensor4<double> ramp(std::size_t h, std::size_t w, double slope_x, double slope_y) {
  Tensor4<double> t({1, 3, h, w});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) t(0, c, y, x) = 100 + slope_x * double(x) + slope_y * double(y);
  return t;
}

}  // namespace

TEST(SrmBank, ThirtyKernelsInSevenFamilies) {
  const auto& bank = load_bank();
  ASSERT_EQ(bank.size(), 30u);
  std::map<SrmFamily, int> count;
  for (const auto& k : bank.kernels()) ++count[k.family];
  EXPECT_EQ(count[SrmFamily::first_order], 8);
  EXPECT_EQ(count[SrmFamily::second_order], 4);
  EXPECT_EQ(count[SrmFamily::third_order], 8);
  EXPECT_EQ(count[SrmFamily::edge3x3], 4);
  EXPECT_EQ(count[SrmFamily::square3x3], 1);
  EXPECT_EQ(count[SrmFamily::edge5x5], 4);
  EXPECT_EQ(count[SrmFamily::square5x5], 1);
}

TEST(SrmBank, EveryKernelIsZeroSumWithPositiveNormalizer) {
  for (const auto& k : load_bank().kernels()) {
    int s = 0;
    for (int t : k.taps) s += t;
    EXPECT_EQ(s, 0) << k.name;
    EXPECT_GT(k.normalizer, 0) << k.name;
  }
}

TEST(SrmBank, SubsetSizes) {
  const auto& bank = load_bank();
  const std::map<std::string, std::size_t> expected{{"first_order", 8}, {"second_order", 4},
                                                    {"third_order", 8}, {"all_3x3", 17},
                                                    {"all_5x5", 13},    {"all_30", 30}};
  for (const auto& [name, n] : expected) EXPECT_EQ(bank.subset(name).members.size(), n) << name;
  EXPECT_EQ(bank.subset("single:square5").members, std::vector<std::string>{"square5"});
  EXPECT_THROW(bank.subset("all_31"), ConfigError);
  EXPECT_THROW(bank.subset("single:nope"), ConfigError);
}

TEST(SrmBank, SizeSubsetsPartitionTheBank) {
  const auto& bank = load_bank();
  const auto a = bank.subset("all_3x3").members;
  const auto b = bank.subset("all_5x5").members;
  std::set<std::string> all(a.begin(), a.end());
  for (const auto& m : b) EXPECT_TRUE(all.insert(m).second) << m << " in both";
  EXPECT_EQ(all.size(), 30u);
  for (const auto& m : a) EXPECT_EQ(bank.kernel(m).support(), 3) << m;
  for (const auto& m : b) EXPECT_EQ(bank.kernel(m).support(), 5) << m;
}

TEST(SrmBank, ChecksumGuardsTheTable) {
  auto table = srm_kernel_table();
  EXPECT_EQ(bank_checksum(table), kSrmBankChecksum);
  auto tampered = table;
  std::swap(tampered[0].taps[12], tampered[0].taps[13]);  // still zero-sum
  EXPECT_THROW(FilterBank(tampered, kSrmBankChecksum), DataError);
  auto unbalanced = table;
  unbalanced[3].taps[0] += 1;
  EXPECT_THROW(FilterBank(unbalanced, bank_checksum(unbalanced)), DataError);
}

TEST(SrmApply, NinetyChannelsFromAllKernels) {
  const auto& bank = load_bank();
  const auto x = oracle::random_tensor<float>({2, 3, 16, 16}, 1, 0, 255);
  EXPECT_EQ(apply_bank(bank, x, bank.subset("all_30")).shape(), (Shape4{2, 90, 16, 16}));
  EXPECT_EQ(apply_bank(bank, x, bank.subset("second_order")).shape(), (Shape4{2, 12, 16, 16}));
  EXPECT_THROW(apply_bank(bank, Tensor4<float>({1, 1, 8, 8}), bank.subset("all_30")), ShapeError);
}

TEST(SrmApply, ConstantImageGivesZeroResidual) {
  const auto& bank = load_bank();
  const Tensor4<double> x({1, 3, 12, 12}, 137.0);
  const auto y = apply_bank(bank, x, bank.subset("all_30"));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(SrmApply, LinearRampInterior) {
  // On f = x only the first-order kernels respond, with the direction's dx.
  const auto& bank = load_bank();
  const auto x = ramp(12, 12, 1.0, 0.0);
  const auto sub = bank.subset("all_30");
  const auto y = apply_bank(bank, x, sub);
  const std::map<std::string, double> first{{"first_E", 1},   {"first_SE", 1}, {"first_S", 0},
                                            {"first_SW", -1}, {"first_W", -1}, {"first_NW", -1},
                                            {"first_N", 0},   {"first_NE", 1}};
  for (std::size_t k = 0; k < sub.members.size(); ++k) {
    const auto it = first.find(sub.members[k]);
    const double want = it == first.end() ? 0.0 : it->second;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t r = 2; r < 10; ++r)
        for (std::size_t q = 2; q < 10; ++q) ASSERT_NEAR(y(0, 3 * k + c, r, q), want, 1e-12) << sub.members[k];
  }
}

TEST(SrmApply, MatchesLoopOracleWithReflectPadding) {
  const auto& bank = load_bank();
  const auto sub = bank.subset("all_30");
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto x = oracle::random_tensor<double>({2, 3, 7, 9}, seed, 0, 255);
    const auto y = apply_bank(bank, x, sub);
    for (std::size_t k = 0; k < sub.members.size(); ++k) {
      const auto& kern = bank.kernel(sub.members[k]);
      for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 0; c < 3; ++c) {
          const auto ref = oracle::srm_residual(x, n, c, kern);
          const double* got = y.plane(n, 3 * k + c);
          for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(got[i], ref[i], 1e-9) << kern.name;
        }
    }
  }
}

TEST(SrmApply, FloatPathMatchesOracle) {
  const auto& bank = load_bank();
  const auto sub = bank.subset("all_5x5");
  const auto x = oracle::random_tensor<float>({1, 3, 10, 10}, 9, 0, 255);
  const auto y = apply_bank(bank, x, sub);
  for (std::size_t k = 0; k < sub.members.size(); ++k) {
    const auto ref = oracle::srm_residual(x, 0, 1, bank.kernel(sub.members[k]));
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(y.plane(0, 3 * k + 1)[i], ref[i], 1e-3);
  }
}

TEST(SrmApply, LinearAndShiftInvariant) {
  const auto& bank = load_bank();
  const auto sub = bank.subset("all_30");
  const auto a = oracle::random_tensor<double>({1, 3, 8, 8}, 1, 0, 255);
  const auto b = oracle::random_tensor<double>({1, 3, 8, 8}, 2, 0, 255);
  Tensor4<double> mix(a.shape()), shifted(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    mix[i] = 0.3 * a[i] - 1.7 * b[i];
    shifted[i] = a[i] + 42.0;
  }
  const auto ya = apply_bank(bank, a, sub), yb = apply_bank(bank, b, sub);
  const auto ym = apply_bank(bank, mix, sub), ys = apply_bank(bank, shifted, sub);
  for (std::size_t i = 0; i < ya.size(); ++i) {
    ASSERT_NEAR(ym[i], 0.3 * ya[i] - 1.7 * yb[i], 1e-5);
    ASSERT_NEAR(ys[i], ya[i], 1e-9);
  }
}

TEST(SrmApply, ChannelOrderIsKernelMajor) {
  const auto& bank = load_bank();
  Tensor4<double> x({1, 3, 6, 6});
  for (std::size_t i = 0; i < 36; ++i) x.plane(0, 1)[i] = double(i % 6) * double(i / 6);  // only G varies
  const auto y = apply_bank(bank, x, bank.subset("second_order"));
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < 36; ++i) {
      EXPECT_EQ(y.plane(0, 3 * k)[i], 0.0);
      EXPECT_EQ(y.plane(0, 3 * k + 2)[i], 0.0);
    }
  }
}

TEST(SrmBank, DumpListsEveryKernel) {
  const std::string d = dump_kernels(load_bank());
  for (const auto& k : load_bank().kernels()) EXPECT_NE(d.find(k.name), std::string::npos);
}
