#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace cgd {

/// 8-bit RGB image, interleaved, row-major.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
};

struct ImageSize {
  std::size_t width = 0;
  std::size_t height = 0;
};

/// Decodes PNG or JPEG (picked by file signature) to 8-bit RGB. Grayscale,
/// palette, alpha and 16-bit inputs are converted. Throws DataError.
RgbImage read_image(const std::filesystem::path& path);

/// Reads only the header.
ImageSize read_image_size(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& img);

}  // namespace cgd
