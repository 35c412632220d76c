#include "cgdetect/image_io.hpp"

#include <png.h>

#include <array>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <jpeglib.h>

#include "cgdetect/errors.hpp"

namespace cgd {
namespace {

enum class Format { png, jpeg };

Format sniff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path.string());
  std::array<unsigned char, 8> sig{};
  in.read(reinterpret_cast<char*>(sig.data()), sig.size());
  if (in.gcount() >= 8 && png_sig_cmp(sig.data(), 0, 8) == 0) return Format::png;
  if (in.gcount() >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return Format::jpeg;
  throw DataError("unsupported image format (expected PNG or JPEG): " + path.string());
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("cannot open image: " + path.string());
  return f;
}

RgbImage read_png(const std::filesystem::path& path, bool header_only) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw DataError("PNG decode failed for " + path.string() + ": " + image.message);
  }
  RgbImage img;
  img.width = image.width;
  img.height = image.height;
  if (header_only) {
    png_image_free(&image);
    return img;
  }
  image.format = PNG_FORMAT_RGB;
  img.pixels.resize(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr) == 0) {
    throw DataError("PNG decode failed for " + path.string() + ": " + image.message);
  }
  return img;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Only trivially destructible locals live between setjmp and longjmp.
bool decode_jpeg(std::FILE* file, bool header_only, RgbImage& out, std::string& error) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    error = jerr.message;
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file);
  jpeg_read_header(&cinfo, TRUE);
  out.width = cinfo.image_width;
  out.height = cinfo.image_height;
  if (!header_only) {
    cinfo.out_color_space = JCS_RGB;
    cinfo.dct_method = JDCT_ISLOW;
    jpeg_start_decompress(&cinfo);
    out.pixels.resize(out.width * out.height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
      JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
      jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
  }
  jpeg_destroy_decompress(&cinfo);
  return true;
}

RgbImage read_jpeg(const std::filesystem::path& path, bool header_only) {
  FilePtr f = open_file(path);
  RgbImage img;
  std::string error;
  if (!decode_jpeg(f.get(), header_only, img, error)) {
    throw DataError("JPEG decode failed for " + path.string() + ": " + error);
  }
  return img;
}

}  // namespace

RgbImage read_image(const std::filesystem::path& path) {
  return sniff(path) == Format::png ? read_png(path, false) : read_jpeg(path, false);
}

ImageSize read_image_size(const std::filesystem::path& path) {
  const RgbImage img = sniff(path) == Format::png ? read_png(path, true) : read_jpeg(path, true);
  return {img.width, img.height};
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  if (img.pixels.size() != img.width * img.height * 3) throw DataError("write_png: bad buffer size");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr) == 0) {
    throw DataError("PNG encode failed for " + path.string() + ": " + image.message);
  }
}

}  // namespace cgd
