#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgdetect/errors.hpp"
#include "cgdetect/image_io.hpp"
#include "cgdetect/tensor.hpp"

namespace cgd {

/// Class labels. pg (photographs) is the positive class.
enum class Label : int { cg = 0, pg = 1 };

std::string_view to_string(Label l);
Label parse_label(std::string_view s);

struct ManifestRecord {
  std::string path;  // relative to the manifest root
  Label label;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// Dataset listing. On disk: UTF-8 text, one `<relative-path>\t<cg|pg>` per
/// line; the root is the directory holding the manifest file.
struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestRecord> records;

  std::filesystem::path resolve(const ManifestRecord& r) const { return root / r.path; }
  std::size_t count(Label l) const;
  /// Non-empty with unique paths.
  void validate() const;
};

Manifest parse_manifest(std::string_view text, const std::filesystem::path& root);
std::string format_manifest(const Manifest& m);
Manifest read_manifest(const std::filesystem::path& file);
/// Writes records verbatim; the caller keeps paths relative to file's directory.
void write_manifest(const std::filesystem::path& file, const Manifest& m);

// ------------------------------------------------------------------ crop

class UndersizedImage : public DataError {
 public:
  using DataError::DataError;
};

/// Central crop x crop window, top-left at (floor((h-crop)/2), floor((w-crop)/2)),
/// as a (1, 3, crop, crop) tensor of 0-255 values in R, G, B order.
Tensor4<float> center_crop(const RgbImage& img, std::size_t crop);
Tensor4<float> load_and_crop(const std::filesystem::path& path, std::size_t crop);

// ----------------------------------------------------------------- split

struct SplitRatios {
  double train = 10;
  double val = 3;
  double test = 4;
};

/// Parses "10:3:4".
SplitRatios parse_ratios(std::string_view s);

/// Per-part sizes proportional to the ratios, rounded by largest remainder
/// (ties broken toward train, then val).
std::array<std::size_t, 3> largest_remainder(std::size_t total, const SplitRatios& ratios);

struct ManifestSplit {
  Manifest train;
  Manifest val;
  Manifest test;
};

/// Stratified, seeded split: each label is shuffled and cut separately.
ManifestSplit split_manifest(const Manifest& m, const SplitRatios& ratios, std::uint64_t seed);

// --------------------------------------------------------------- metrics

struct Metrics {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t p = 0;
  std::size_t n = 0;
  double acc = 0.0;  // (tp + tn) / (p + n), as a fraction
};

/// Predictions and labels are class indices (0 = cg, 1 = pg).
Metrics accuracy(std::span<const int> predictions, std::span<const int> labels);

// ------------------------------------------------------------- synthetic

struct SyntheticOptions {
  std::size_t count_per_class = 100;
  std::size_t size = 96;
  std::uint64_t seed = 0;
  double noise_sigma = 3.0;
};

/// Image `index` of a class. Both classes share the same smooth base for a
/// given index (a random 6x6 grid per channel, bilinearly upsampled) plus
/// independent Gaussian noise; the cg-like image is then 3x3 box filtered.
RgbImage synthesize_image(Label label, std::size_t index, const SyntheticOptions& opt);

/// Writes cg/ and pg/ PNGs plus `manifest.tsv` under dir; returns the manifest.
Manifest generate_synthetic(const std::filesystem::path& dir, const SyntheticOptions& opt);

// -------------------------------------------------------------- batching

/// A manifest filtered to the images usable at a given crop size. Images
/// smaller than the crop are skipped with a warning.
class Dataset {
 public:
  Dataset(Manifest manifest, std::size_t crop, std::ostream* warnings = nullptr);

  const Manifest& manifest() const { return manifest_; }
  std::size_t size() const { return manifest_.records.size(); }
  std::size_t crop() const { return crop_; }
  std::size_t skipped() const { return skipped_; }

  Tensor4<float> load(std::size_t i) const;
  int label(std::size_t i) const { return static_cast<int>(manifest_.records[i].label); }

 private:
  Manifest manifest_;
  std::size_t crop_;
  std::size_t skipped_ = 0;
};

struct Batch {
  Tensor4<float> pixels;  // (b, 3, crop, crop)
  std::vector<int> labels;
  std::vector<std::size_t> indices;  // dataset positions
};

/// Deterministic per-(seed, epoch) ordering; the last partial batch is kept.
class BatchIterator {
 public:
  BatchIterator(const Dataset& data, std::size_t batch_size, std::uint64_t seed, int epoch,
                bool shuffle = true);

  /// Fills `batch` with the next batch; false once exhausted.
  bool next(Batch& batch);
  std::size_t num_batches() const;
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const Dataset& data_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace cgd
