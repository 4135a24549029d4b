#include "sinenet/png_io.hpp"

#include <cstdio>
#include <memory>
#include <stdexcept>

#include <png.h>

namespace sinenet {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png_gray(const std::string& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels,
                    const std::vector<std::pair<std::string, std::string>>& text) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("write_png_gray: bad size");
  if (pixels.size() != static_cast<size_t>(width) * height)
    throw std::invalid_argument("write_png_gray: pixel count mismatch");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png write failed for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);

  std::vector<png_text> chunks(text.size());
  // libpng wants mutable char pointers; the strings outlive png_write_info.
  std::vector<std::string> keys, values;
  keys.reserve(text.size());
  values.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    keys.push_back(text[i].first);
    values.push_back(text[i].second);
    chunks[i] = {};
    chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
    chunks[i].key = keys.back().data();
    chunks[i].text = values.back().data();
    chunks[i].text_length = values.back().size();
  }
  if (!chunks.empty()) png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));

  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<size_t>(y) * width));
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

PngGray read_png_gray(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png read failed for " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  PngGray out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png_gray: not an 8-bit grayscale image");
  }

  out.pixels.resize(static_cast<size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y)
    png_read_row(png, out.pixels.data() + static_cast<size_t>(y) * out.width, nullptr);
  png_read_end(png, info);

  png_textp chunks = nullptr;
  int n_chunks = 0;
  png_get_text(png, info, &chunks, &n_chunks);
  for (int i = 0; i < n_chunks; ++i)
    out.text[chunks[i].key] = chunks[i].text ? chunks[i].text : "";
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace sinenet
