#include "tsnet/plot.hpp"

#include "tsnet/error.hpp"
#include "tsnet/log.hpp"
#include "tsnet/pipeline.hpp"

#include <json.hpp>
#include <png.h>

#include <cmath>
#include <cstring>

namespace tsnet {

Image Image::blank(int width, int height, Rgb fill) {
  if (width < 1 || height < 1) throw ArgumentError("image dimensions must be positive");
  Image img;
  img.width = width;
  img.height = height;
  img.rgb.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) std::memcpy(&img.rgb[i], fill.data(), 3);
  return img;
}

Rgb Image::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

Image read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Image out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.rgb.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.rgb.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, image.rgb.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

void draw_box(Image& image, const BBox& box, Rgb color, int thickness) {
  if (!std::isfinite(box.x1) || !std::isfinite(box.y1) || !std::isfinite(box.x2) || !std::isfinite(box.y2)) return;
  const auto clampi = [](double v, int hi) {
    return static_cast<int>(std::clamp(std::lround(v), 0L, static_cast<long>(hi)));
  };
  const int x1 = clampi(std::min(box.x1, box.x2), image.width - 1), x2 = clampi(std::max(box.x1, box.x2), image.width - 1);
  const int y1 = clampi(std::min(box.y1, box.y2), image.height - 1), y2 = clampi(std::max(box.y1, box.y2), image.height - 1);
  auto put = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= image.width || y >= image.height) return;
    std::memcpy(&image.rgb[(static_cast<std::size_t>(y) * static_cast<std::size_t>(image.width) + static_cast<std::size_t>(x)) * 3],
                color.data(), 3);
  };
  for (int d = 0; d < thickness; ++d) {
    for (int x = x1; x <= x2; ++x) {
      put(x, y1 + d);
      put(x, y2 - d);
    }
    for (int y = y1; y <= y2; ++y) {
      put(x1 + d, y);
      put(x2 - d, y);
    }
  }
}

void plot_prediction(const std::string& prediction_json, const std::optional<std::filesystem::path>& background,
                     const std::filesystem::path& out_png) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(prediction_json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("prediction dump: ") + e.what());
  }
  auto boxes = [](const nlohmann::json& arr) {
    std::vector<BBox> out;
    for (const auto& b : arr) out.push_back(BBox{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()});
    return out;
  };
  Image img;
  bool loaded = false;
  if (background) {
    if (std::filesystem::exists(*background)) {
      img = read_png(*background);
      loaded = true;
    } else {
      log(LogLevel::Warning, "background image " + background->string() + " not found; drawing on a blank canvas");
    }
  }
  try {
    if (!loaded) {
      const auto& size = j.at("image_size");
      img = Image::blank(static_cast<int>(size.at(0).get<double>()), static_cast<int>(size.at(1).get<double>()));
    }
    for (const auto& t : j.at("trajectories")) {
      for (const auto& b : boxes(t)) draw_box(img, b, kPredictionColor, 1);
    }
    for (const auto& b : boxes(j.at("ground_truth"))) draw_box(img, b, kTruthColor, 1);
    for (const auto& b : boxes(j.at("observed"))) draw_box(img, b, kObservedColor, 2);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("prediction dump: ") + e.what());
  }
  write_png(out_png, img);
}

}  // namespace tsnet
