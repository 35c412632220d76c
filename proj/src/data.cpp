#include "cgdetect/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace cgd {

std::string_view to_string(Label l) { return l == Label::cg ? "cg" : "pg"; }

Label parse_label(std::string_view s) {
  if (s == "cg") return Label::cg;
  if (s == "pg") return Label::pg;
  throw DataError("unknown label '" + std::string(s) + "' (expected cg or pg)");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed;
  for (std::uint64_t v : {a, b}) {
    z += 0x9E3779B97F4A7C15ULL ^ (v * 0xD6E8FEB86659FD93ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
  }
  return z;
}

// ------------------------------------------------------------------ manifest

std::size_t Manifest::count(Label l) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [l](const auto& r) { return r.label == l; }));
}

void Manifest::validate() const {
  if (records.empty()) throw DataError("manifest is empty");
  std::set<std::string_view> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.path).second) throw DataError("duplicate manifest path: " + r.path);
  }
}

Manifest parse_manifest(std::string_view text, const std::filesystem::path& root) {
  Manifest m{root, {}};
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw DataError("manifest line " + std::to_string(line_no) + ": expected <path>\\t<cg|pg>");
    }
    m.records.push_back({std::string(line.substr(0, tab)), parse_label(line.substr(tab + 1))});
  }
  m.validate();
  return m;
}

std::string format_manifest(const Manifest& m) {
  std::string out;
  for (const auto& r : m.records) {
    out += r.path;
    out += '\t';
    out += to_string(r.label);
    out += '\n';
  }
  return out;
}

Manifest read_manifest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_manifest(ss.str(), file.parent_path());
  } catch (const DataError& e) {
    throw DataError(file.string() + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& file, const Manifest& m) {
  std::ofstream out(file, std::ios::binary);
  out << format_manifest(m);
  if (!out) throw DataError("cannot write manifest " + file.string());
}

// ---------------------------------------------------------------------- crop

Tensor4<float> center_crop(const RgbImage& img, std::size_t crop) {
  if (crop == 0) throw ShapeError("center_crop: crop must be positive");
  if (img.width < crop || img.height < crop) {
    throw UndersizedImage("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                          " is smaller than crop " + std::to_string(crop));
  }
  const std::size_t top = (img.height - crop) / 2;
  const std::size_t left = (img.width - crop) / 2;
  Tensor4<float> out({1, 3, crop, crop});
  for (std::size_t c = 0; c < 3; ++c) {
    float* plane = out.plane(0, c);
    for (std::size_t y = 0; y < crop; ++y) {
      for (std::size_t x = 0; x < crop; ++x) plane[y * crop + x] = img.at(top + y, left + x, c);
    }
  }
  return out;
}

Tensor4<float> load_and_crop(const std::filesystem::path& path, std::size_t crop) {
  try {
    return center_crop(read_image(path), crop);
  } catch (const UndersizedImage& e) {
    throw UndersizedImage(path.string() + ": " + e.what());
  }
}

// --------------------------------------------------------------------- split

SplitRatios parse_ratios(std::string_view s) {
  std::array<double, 3> parts{};
  std::size_t i = 0;
  while (true) {
    const auto colon = s.find(':');
    const std::string_view tok = s.substr(0, colon);
    if (i >= 3) throw ConfigError("ratios must have three parts, e.g. 10:3:4");
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), parts[i]);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !(parts[i] > 0.0) ||
        !std::isfinite(parts[i])) {
      throw ConfigError("bad ratio '" + std::string(tok) + "'");
    }
    ++i;
    if (colon == std::string_view::npos) break;
    s = s.substr(colon + 1);
  }
  if (i != 3) throw ConfigError("ratios must have three parts, e.g. 10:3:4");
  return {parts[0], parts[1], parts[2]};
}

std::array<std::size_t, 3> largest_remainder(std::size_t total, const SplitRatios& ratios) {
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  for (double v : r) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("split ratios must be positive");
  }
  const double sum = r[0] + r[1] + r[2];
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(total) * r[i] / sum;
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

ManifestSplit split_manifest(const Manifest& m, const SplitRatios& ratios, std::uint64_t seed) {
  m.validate();
  ManifestSplit out{{m.root, {}}, {m.root, {}}, {m.root, {}}};
  std::array<Manifest*, 3> parts{&out.train, &out.val, &out.test};
  for (Label label : {Label::cg, Label::pg}) {
    std::vector<ManifestRecord> members;
    for (const auto& r : m.records) {
      if (r.label == label) members.push_back(r);
    }
    if (members.empty()) {
      throw DataError("cannot split: no " + std::string(to_string(label)) + " samples");
    }
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(label)));
    std::shuffle(members.begin(), members.end(), rng);
    const auto sizes = largest_remainder(members.size(), ratios);
    std::size_t pos = 0;
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t k = 0; k < sizes[p]; ++k) parts[p]->records.push_back(members[pos++]);
    }
  }
  return out;
}

// ------------------------------------------------------------------- metrics

Metrics accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw DataError("accuracy: empty input");
  Metrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == static_cast<int>(Label::pg)) {
      ++m.p;
      if (predictions[i] == labels[i]) ++m.tp;
    } else {
      ++m.n;
      if (predictions[i] == labels[i]) ++m.tn;
    }
  }
  m.acc = static_cast<double>(m.tp + m.tn) / static_cast<double>(m.p + m.n);
  return m;
}

// ----------------------------------------------------------------- synthetic

namespace {

constexpr std::size_t kGrid = 6;
constexpr double kBaseLow = 40.0;
constexpr double kBaseHigh = 215.0;

std::vector<double> smooth_base(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> level(kBaseLow, kBaseHigh);
  std::vector<double> out(3 * size * size);
  const double scale = static_cast<double>(kGrid - 1) / static_cast<double>(size - 1);
  for (std::size_t c = 0; c < 3; ++c) {
    std::array<double, kGrid * kGrid> grid;
    for (auto& g : grid) g = level(rng);
    for (std::size_t y = 0; y < size; ++y) {
      const double gy = static_cast<double>(y) * scale;
      const std::size_t y0 = std::min(static_cast<std::size_t>(gy), kGrid - 2);
      const double fy = gy - static_cast<double>(y0);
      for (std::size_t x = 0; x < size; ++x) {
        const double gx = static_cast<double>(x) * scale;
        const std::size_t x0 = std::min(static_cast<std::size_t>(gx), kGrid - 2);
        const double fx = gx - static_cast<double>(x0);
        const double top = grid[y0 * kGrid + x0] * (1 - fx) + grid[y0 * kGrid + x0 + 1] * fx;
        const double bot = grid[(y0 + 1) * kGrid + x0] * (1 - fx) + grid[(y0 + 1) * kGrid + x0 + 1] * fx;
        out[(c * size + y) * size + x] = top * (1 - fy) + bot * fy;
      }
    }
  }
  return out;
}

// 3x3 mean with edge replication.
std::vector<double> box_filter(const std::vector<double>& img, std::size_t size) {
  std::vector<double> out(img.size());
  const auto n = static_cast<std::ptrdiff_t>(size);
  auto clamp = [n](std::ptrdiff_t i) { return std::clamp<std::ptrdiff_t>(i, 0, n - 1); };
  for (std::size_t c = 0; c < 3; ++c) {
    const double* src = img.data() + c * size * size;
    double* dst = out.data() + c * size * size;
    for (std::ptrdiff_t y = 0; y < n; ++y) {
      for (std::ptrdiff_t x = 0; x < n; ++x) {
        double s = 0.0;
        for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
          for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) s += src[clamp(y + dy) * n + clamp(x + dx)];
        }
        dst[y * n + x] = s / 9.0;
      }
    }
  }
  return out;
}

}  // namespace

RgbImage synthesize_image(Label label, std::size_t index, const SyntheticOptions& opt) {
  if (opt.size < 32 || opt.size % 32 != 0) {
    throw ConfigError("synthetic image size must be a positive multiple of 32");
  }
  if (opt.noise_sigma < 0.0) throw ConfigError("noise sigma must be non-negative");
  const std::size_t size = opt.size;
  std::vector<double> img = smooth_base(size, mix_seed(opt.seed, index, 0xBA5E));
  if (opt.noise_sigma > 0.0) {
    std::mt19937_64 rng(mix_seed(opt.seed, index, 1 + static_cast<std::uint64_t>(label)));
    std::normal_distribution<double> noise(0.0, opt.noise_sigma);
    for (auto& v : img) v += noise(rng);
  }
  if (label == Label::cg) img = box_filter(img, size);

  RgbImage out(size, size);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double v = std::clamp(std::round(img[(c * size + y) * size + x]), 0.0, 255.0);
        out.at(y, x, c) = static_cast<std::uint8_t>(v);
      }
    }
  }
  return out;
}

Manifest generate_synthetic(const std::filesystem::path& dir, const SyntheticOptions& opt) {
  namespace fs = std::filesystem;
  Manifest m{dir, {}};
  for (Label label : {Label::cg, Label::pg}) {
    const std::string cls(to_string(label));
    std::error_code ec;
    fs::create_directories(dir / cls, ec);
    if (ec) throw DataError("cannot create " + (dir / cls).string() + ": " + ec.message());
    for (std::size_t i = 0; i < opt.count_per_class; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%s_%05zu.png", cls.c_str(), i);
      const std::string rel = cls + "/" + name;
      write_png(dir / rel, synthesize_image(label, i, opt));
      m.records.push_back({rel, label});
    }
  }
  write_manifest(dir / "manifest.tsv", m);
  return m;
}

// ------------------------------------------------------------------ batching

Dataset::Dataset(Manifest manifest, std::size_t crop, std::ostream* warnings)
    : manifest_(std::move(manifest)), crop_(crop) {
  manifest_.validate();
  std::vector<ManifestRecord> kept;
  for (const auto& r : manifest_.records) {
    const auto size = read_image_size(manifest_.resolve(r));
    if (size.width < crop || size.height < crop) {
      ++skipped_;
      if (warnings) {
        *warnings << "warning: skipping " << r.path << " (" << size.width << "x" << size.height
                  << " < crop " << crop << ")\n";
      }
      continue;
    }
    kept.push_back(r);
  }
  manifest_.records = std::move(kept);
  if (manifest_.records.empty()) throw DataError("no usable images at crop " + std::to_string(crop));
}

Tensor4<float> Dataset::load(std::size_t i) const {
  const auto& r = manifest_.records.at(i);
  try {
    return load_and_crop(manifest_.resolve(r), crop_);
  } catch (const DataError& e) {
    throw DataError("sample " + std::to_string(i) + " (" + r.path + "): " + e.what());
  }
}

BatchIterator::BatchIterator(const Dataset& data, std::size_t batch_size, std::uint64_t seed,
                             int epoch, bool shuffle)
    : data_(data), batch_size_(batch_size), order_(data.size()) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (shuffle) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(epoch), 0xE90C));
    std::shuffle(order_.begin(), order_.end(), rng);
  }
}

std::size_t BatchIterator::num_batches() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

bool BatchIterator::next(Batch& batch) {
  if (pos_ >= order_.size()) return false;
  const std::size_t b = std::min(batch_size_, order_.size() - pos_);
  const std::size_t crop = data_.crop();
  batch.pixels = Tensor4<float>({b, 3, crop, crop});
  batch.labels.assign(b, 0);
  batch.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                       order_.begin() + static_cast<std::ptrdiff_t>(pos_ + b));
  const std::size_t sample = 3 * crop * crop;
  for (std::size_t k = 0; k < b; ++k) {
    const Tensor4<float> img = data_.load(batch.indices[k]);
    std::copy(img.data(), img.data() + sample, batch.pixels.data() + k * sample);
    batch.labels[k] = data_.label(batch.indices[k]);
  }
  pos_ += b;
  return true;
}

}  // namespace cgd
