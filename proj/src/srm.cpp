#include "cgdetect/srm.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <iomanip>
#include <utility>

namespace cgd {
namespace {

using Grid = std::array<int, 25>;

struct Direction {
  const char* name;
  int dy;
  int dx;
};

constexpr std::array<Direction, 8> kDirections{{{"E", 0, 1},
                                                {"SE", 1, 1},
                                                {"S", 1, 0},
                                                {"SW", 1, -1},
                                                {"W", 0, -1},
                                                {"NW", -1, -1},
                                                {"N", -1, 0},
                                                {"NE", -1, 1}}};

void put(Grid& g, int dy, int dx, int v) { g[static_cast<std::size_t>((dy + 2) * 5 + dx + 2)] = v; }

// Quarter turn clockwise about the centre.
Grid rotate_cw(const Grid& g) {
  Grid out{};
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) out[static_cast<std::size_t>(c * 5 + (4 - r))] = g[static_cast<std::size_t>(r * 5 + c)];
  }
  return out;
}

Grid from_rows(std::initializer_list<std::array<int, 5>> rows) {
  Grid g{};
  std::size_t r = 0;
  for (const auto& row : rows) {
    std::copy(row.begin(), row.end(), g.begin() + static_cast<std::ptrdiff_t>(5 * r));
    ++r;
  }
  return g;
}

constexpr std::array<int, 5> kZeroRow{0, 0, 0, 0, 0};

int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

}  // namespace

std::string_view to_string(SrmFamily family) {
  switch (family) {
    case SrmFamily::first_order: return "first_order";
    case SrmFamily::second_order: return "second_order";
    case SrmFamily::third_order: return "third_order";
    case SrmFamily::edge3x3: return "edge3x3";
    case SrmFamily::square3x3: return "square3x3";
    case SrmFamily::edge5x5: return "edge5x5";
    case SrmFamily::square5x5: return "square5x5";
  }
  return "unknown";
}

int SrmKernel::support() const {
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      if ((std::abs(dy) == 2 || std::abs(dx) == 2) && tap(dy, dx) != 0) return 5;
    }
  }
  return 3;
}

std::vector<SrmKernel> srm_kernel_table() {
  std::vector<SrmKernel> bank;
  for (const auto& d : kDirections) {
    Grid g{};
    put(g, 0, 0, -1);
    put(g, d.dy, d.dx, 1);
    bank.push_back({std::string("first_") + d.name, SrmFamily::first_order, g, 1});
  }
  const std::array<std::pair<const char*, Direction>, 4> axes{
      {{"H", {"", 0, 1}}, {"V", {"", 1, 0}}, {"D", {"", 1, 1}}, {"A", {"", 1, -1}}}};
  for (const auto& [name, d] : axes) {
    Grid g{};
    put(g, -d.dy, -d.dx, 1);
    put(g, 0, 0, -2);
    put(g, d.dy, d.dx, 1);
    bank.push_back({std::string("second_") + name, SrmFamily::second_order, g, 2});
  }
  for (const auto& d : kDirections) {
    Grid g{};
    put(g, -d.dy, -d.dx, 1);
    put(g, 0, 0, -3);
    put(g, d.dy, d.dx, 3);
    put(g, 2 * d.dy, 2 * d.dx, -1);
    bank.push_back({std::string("third_") + d.name, SrmFamily::third_order, g, 3});
  }

  const std::array<const char*, 4> sides{"N", "E", "S", "W"};
  Grid edge3 = from_rows({kZeroRow, {0, -1, 2, -1, 0}, {0, 2, -4, 2, 0}, kZeroRow, kZeroRow});
  for (const char* side : sides) {
    bank.push_back({std::string("edge3_") + side, SrmFamily::edge3x3, edge3, 4});
    edge3 = rotate_cw(edge3);
  }
  bank.push_back({"square3",
                  SrmFamily::square3x3,
                  from_rows({kZeroRow, {0, -1, 2, -1, 0}, {0, 2, -4, 2, 0}, {0, -1, 2, -1, 0}, kZeroRow}),
                  4});

  Grid edge5 = from_rows(
      {{-1, 2, -2, 2, -1}, {2, -6, 8, -6, 2}, {-2, 8, -12, 8, -2}, kZeroRow, kZeroRow});
  for (const char* side : sides) {
    bank.push_back({std::string("edge5_") + side, SrmFamily::edge5x5, edge5, 12});
    edge5 = rotate_cw(edge5);
  }
  bank.push_back({"square5",
                  SrmFamily::square5x5,
                  from_rows({{-1, 2, -2, 2, -1},
                             {2, -6, 8, -6, 2},
                             {-2, 8, -12, 8, -2},
                             {2, -6, 8, -6, 2},
                             {-1, 2, -2, 2, -1}}),
                  12});
  return bank;
}

std::uint64_t bank_checksum(const std::vector<SrmKernel>& kernels) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 1099511628211ULL;
  };
  auto mix_int = [&mix](int v) {
    const auto u = static_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) mix(static_cast<std::uint8_t>(u >> (8 * i)));
  };
  for (const auto& k : kernels) {
    for (char ch : k.name) mix(static_cast<std::uint8_t>(ch));
    mix_int(static_cast<int>(k.family));
    mix_int(k.normalizer);
    for (int t : k.taps) mix_int(t);
  }
  return h;
}

const std::uint64_t kSrmBankChecksum = 0xfd6ed6c19436d7c6ULL;

FilterBank::FilterBank(std::vector<SrmKernel> kernels, std::uint64_t expected_checksum)
    : kernels_(std::move(kernels)) {
  if (bank_checksum(kernels_) != expected_checksum) {
    throw DataError("SRM kernel table corrupted: checksum mismatch");
  }
  for (const auto& k : kernels_) {
    if (std::accumulate(k.taps.begin(), k.taps.end(), 0) != 0) {
      throw DataError("SRM kernel " + k.name + " is not zero-sum");
    }
    if (k.normalizer <= 0) throw DataError("SRM kernel " + k.name + " has bad normalizer");
  }
}

const SrmKernel& FilterBank::kernel(std::string_view name) const {
  for (const auto& k : kernels_) {
    if (k.name == name) return k;
  }
  throw ConfigError("unknown SRM kernel: " + std::string(name));
}

std::vector<std::string> FilterBank::subset_names() {
  return {"first_order", "second_order", "third_order", "all_3x3", "all_5x5", "all_30"};
}

FilterSubset FilterBank::subset(std::string_view name) const {
  FilterSubset s{std::string(name), {}};
  constexpr std::string_view single = "single:";
  if (name.starts_with(single)) {
    s.members.push_back(kernel(name.substr(single.size())).name);
    return s;
  }
  auto select = [&](auto pred) {
    for (const auto& k : kernels_) {
      if (pred(k.family)) s.members.push_back(k.name);
    }
  };
  if (name == "first_order") {
    select([](SrmFamily f) { return f == SrmFamily::first_order; });
  } else if (name == "second_order") {
    select([](SrmFamily f) { return f == SrmFamily::second_order; });
  } else if (name == "third_order") {
    select([](SrmFamily f) { return f == SrmFamily::third_order; });
  } else if (name == "all_3x3") {
    select([](SrmFamily f) {
      return f == SrmFamily::first_order || f == SrmFamily::second_order ||
             f == SrmFamily::edge3x3 || f == SrmFamily::square3x3;
    });
  } else if (name == "all_5x5") {
    select([](SrmFamily f) {
      return f == SrmFamily::third_order || f == SrmFamily::edge5x5 || f == SrmFamily::square5x5;
    });
  } else if (name == "all_30") {
    select([](SrmFamily) { return true; });
  } else {
    throw ConfigError("unknown filter subset: " + std::string(name));
  }
  return s;
}

const FilterBank& load_bank() {
  static const FilterBank bank(srm_kernel_table(), kSrmBankChecksum);
  return bank;
}

template <typename T>
Tensor4<T> apply_bank(const FilterBank& bank, const Tensor4<T>& rgb, const FilterSubset& subset) {
  if (rgb.c() != 3) {
    throw ShapeError("apply_bank: expected 3 channels, got " + std::to_string(rgb.c()));
  }
  if (rgb.h() < 5 || rgb.w() < 5) throw ShapeError("apply_bank: image smaller than 5x5");
  if (subset.members.empty()) throw ConfigError("apply_bank: empty subset");

  struct Tap {
    int dy, dx;
    T weight;
  };
  struct Prepared {
    std::vector<Tap> taps;
    T normalizer;
  };
  std::vector<Prepared> kernels;
  for (const auto& name : subset.members) {
    const SrmKernel& k = bank.kernel(name);
    Prepared p{{}, static_cast<T>(k.normalizer)};
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) {
        if (k.tap(dy, dx) != 0) p.taps.push_back({dy, dx, static_cast<T>(k.tap(dy, dx))});
      }
    }
    kernels.push_back(std::move(p));
  }

  const int h = static_cast<int>(rgb.h());
  const int w = static_cast<int>(rgb.w());
  const int pw = w + 4;
  Tensor4<T> out({rgb.n(), 3 * kernels.size(), rgb.h(), rgb.w()});
  std::vector<T> padded(static_cast<std::size_t>((h + 4) * pw));
  for (std::size_t n = 0; n < rgb.n(); ++n) {
    for (std::size_t c = 0; c < 3; ++c) {
      const T* src = rgb.plane(n, c);
      for (int y = -2; y < h + 2; ++y) {
        const T* line = src + reflect(y, h) * w;
        T* dst = padded.data() + (y + 2) * pw;
        for (int x = -2; x < w + 2; ++x) dst[x + 2] = line[reflect(x, w)];
      }
      for (std::size_t k = 0; k < kernels.size(); ++k) {
        T* plane = out.plane(n, 3 * k + c);
        for (const Tap& t : kernels[k].taps) {
          for (int y = 0; y < h; ++y) {
            const T* in = padded.data() + (y + 2 + t.dy) * pw + 2 + t.dx;
            T* o = plane + y * w;
            for (int x = 0; x < w; ++x) o[x] += t.weight * in[x];
          }
        }
        const T norm = kernels[k].normalizer;
        for (std::size_t i = 0; i < rgb.shape().plane(); ++i) plane[i] /= norm;
      }
    }
  }
  require_finite(out, "apply_bank");
  return out;
}

template Tensor4<float> apply_bank(const FilterBank&, const Tensor4<float>&, const FilterSubset&);
template Tensor4<double> apply_bank(const FilterBank&, const Tensor4<double>&,
                                    const FilterSubset&);

std::string dump_kernels(const FilterBank& bank) {
  std::ostringstream os;
  os << "# " << bank.size() << " SRM kernels, checksum 0x" << std::hex
     << bank_checksum(bank.kernels()) << std::dec << "\n";
  for (const auto& k : bank.kernels()) {
    os << k.name << "  family=" << to_string(k.family) << "  normalizer=" << k.normalizer
       << "  support=" << k.support() << "x" << k.support() << "\n";
    for (int r = 0; r < 5; ++r) {
      os << " ";
      for (int c = 0; c < 5; ++c) os << std::setw(4) << k.taps[static_cast<std::size_t>(r * 5 + c)];
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace cgd
