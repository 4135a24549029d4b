#include "sinenet/diagnostics.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "sinenet/png_io.hpp"

namespace sinenet {

void render_panel(const std::vector<Tensor<double>>& maps, const std::vector<std::string>& names,
                  const std::string& path) {
  if (maps.empty()) throw std::invalid_argument("render_panel: no maps");
  if (names.size() != maps.size())
    throw std::invalid_argument("render_panel: name count mismatch");
  const auto& shape = maps[0].shape;
  if (shape.size() != 2) throw std::invalid_argument("render_panel: maps must be 2d");
  for (const auto& m : maps)
    if (m.shape != shape) throw std::invalid_argument("render_panel: maps must share a shape");

  const int h = shape[0], w = shape[1];
  const int n = static_cast<int>(maps.size());
  const int width = n * w + (n - 1);  // 1px separator between panels
  std::vector<std::uint8_t> pixels(static_cast<size_t>(width) * h, 255);

  std::vector<std::pair<std::string, std::string>> text;
  nlohmann::json sidecar;
  sidecar["format_version"] = 1;
  sidecar["panels"] = nlohmann::json::array();

  for (int p = 0; p < n; ++p) {
    double lo = maps[p].data[0], hi = maps[p].data[0];
    for (double v : maps[p].data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const int x0 = p * (w + 1);
    const bool flat = hi <= lo;
    const double scale = flat ? 0.0 : 255.0 / (hi - lo);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double v = maps[p].data[static_cast<size_t>(i) * w + j];
        pixels[static_cast<size_t>(i) * width + x0 + j] =
            flat ? std::uint8_t(128)
                 : static_cast<std::uint8_t>(std::clamp((v - lo) * scale, 0.0, 255.0));
      }
    text.emplace_back("panel" + std::to_string(p), "name=" + names[p] + " min=" +
                                                       std::to_string(lo) + " max=" +
                                                       std::to_string(hi));
    nlohmann::json entry;
    entry["name"] = names[p];
    entry["min"] = lo;
    entry["max"] = hi;
    sidecar["panels"].push_back(std::move(entry));
  }
  sidecar["width"] = width;
  sidecar["height"] = h;

  write_png_gray(path, width, h, pixels, text);
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot open " + path + ".json");
  side << sidecar.dump(2) << "\n";
}

}  // namespace sinenet
