#pragma once

/// Minimal 8-bit grayscale PNG writing/reading with tEXt annotations.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace sinenet {

struct PngGray {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  ///< row-major, height*width
  std::map<std::string, std::string> text;
};

void write_png_gray(const std::string& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels,
                    const std::vector<std::pair<std::string, std::string>>& text = {});

PngGray read_png_gray(const std::string& path);

}  // namespace sinenet
