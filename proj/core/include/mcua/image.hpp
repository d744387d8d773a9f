#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcua/errors.hpp"

namespace mcua {

// Interleaved RGB raster, values in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // height*width*3, row-major, r,g,b

  double& at(int x, int y, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + static_cast<size_t>(c)];
  }
  double at(int x, int y, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + static_cast<size_t>(c)];
  }
};

Image make_image(int width, int height, double fill = 0.0);

// 8-bit quantization used by every writer: round(v*255), clamped.
uint8_t quantize8(double v);

// Binary PPM (P6, maxval 255).
Image load_ppm(const std::string& path);
void save_ppm(const std::string& path, const Image& img);

// 8-bit RGB PNG (alpha stripped on load).
Image load_png(const std::string& path);
void save_png(const std::string& path, const Image& img);

// Dispatch by file contents (PNG signature vs "P6").
Image load_image(const std::string& path);
bool is_supported_image(const std::string& path);

// Bilinear resampling with half-pixel-centered sample points; identical
// dimensions return a pixel-identical copy. Output values stay in [0,1].
Image resize_bilinear(const Image& img, int out_w, int out_h);

}  // namespace mcua
