#include "mcua/patches.hpp"

#include <algorithm>

namespace mcua {

int64_t patch_count(int image_w, int image_h, int patch_w, int patch_h, int stride) {
  if (patch_w < 1 || patch_h < 1) throw ValidationError("patch dimensions must be >= 1");
  if (stride < 1) throw ValidationError("stride must be >= 1");
  if (image_w < patch_w || image_h < patch_h)
    throw ValidationError("patch " + std::to_string(patch_w) + "x" + std::to_string(patch_h) +
                          " does not fit image " + std::to_string(image_w) + "x" +
                          std::to_string(image_h));
  const int64_t cols = 1 + (image_w - patch_w) / stride;
  const int64_t rows = 1 + (image_h - patch_h) / stride;
  return cols * rows;
}

PatchGrid make_grid(int image_w, int image_h, int patch_w, int patch_h, int stride,
                    int scale_id) {
  patch_count(image_w, image_h, patch_w, patch_h, stride);  // validates
  PatchGrid g;
  g.scale_id = scale_id;
  g.patch_w = patch_w;
  g.patch_h = patch_h;
  g.stride = stride;
  g.cols = 1 + (image_w - patch_w) / stride;
  g.rows = 1 + (image_h - patch_h) / stride;
  g.origins.reserve(static_cast<size_t>(g.cols) * g.rows);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) g.origins.emplace_back(c * stride, r * stride);
  return g;
}

std::vector<Patch> extract_patches(const Image& img, int patch_w, int patch_h, int stride,
                                   PatchGrid* grid_out) {
  PatchGrid grid = make_grid(img.width, img.height, patch_w, patch_h, stride);
  std::vector<Patch> out;
  out.reserve(grid.origins.size());
  for (size_t k = 0; k < grid.origins.size(); ++k) {
    const auto [ox, oy] = grid.origins[k];
    Patch p;
    p.grid_index = static_cast<int>(k);
    p.augmentation = "none";
    p.pixels = make_image(patch_w, patch_h);
    for (int y = 0; y < patch_h; ++y)
      for (int x = 0; x < patch_w; ++x)
        for (int c = 0; c < 3; ++c) p.pixels.at(x, y, c) = img.at(ox + x, oy + y, c);
    out.push_back(std::move(p));
  }
  if (grid_out) *grid_out = std::move(grid);
  return out;
}

Image rotate90(const Image& img) {
  Image out = make_image(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(img.height - 1 - y, x, c) = img.at(x, y, c);
  return out;
}

Image rotate180(const Image& img) {
  Image out = make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(img.width - 1 - x, img.height - 1 - y, c) = img.at(x, y, c);
  return out;
}

Image rotate270(const Image& img) {
  Image out = make_image(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, img.width - 1 - x, c) = img.at(x, y, c);
  return out;
}

Image vflip(const Image& img) {
  Image out = make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, img.height - 1 - y, c) = img.at(x, y, c);
  return out;
}

Image color_perturb(const Image& img, Rng& rng, const ColorJitter& jitter) {
  const double b = rng.uniform(-jitter.brightness, jitter.brightness);
  const double contrast = rng.uniform(jitter.contrast_lo, jitter.contrast_hi);
  const double ch[3] = {rng.uniform(jitter.channel_lo, jitter.channel_hi),
                        rng.uniform(jitter.channel_lo, jitter.channel_hi),
                        rng.uniform(jitter.channel_lo, jitter.channel_hi)};
  Image out = make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = img.at(x, y, c);
        v = (v - 0.5) * contrast + 0.5 + b;  // contrast pivots on mid-gray
        v *= ch[c];
        out.at(x, y, c) = std::clamp(v, 0.0, 1.0);
      }
  return out;
}

std::vector<Patch> augment_patch(const Patch& patch, AugmentMode mode, Rng& rng,
                                 const ColorJitter& jitter) {
  if (mode == AugmentMode::test) {
    Patch p = patch;
    p.augmentation = "none";
    return {std::move(p)};
  }
  struct Geo {
    const char* tag;
    Image img;
  };
  const Image& src = patch.pixels;
  Image r90 = rotate90(src);
  Image r180 = rotate180(src);
  Image r270 = rotate270(src);
  std::vector<Geo> geos;
  geos.push_back({"r0", src});
  geos.push_back({"r90", r90});
  geos.push_back({"r180", r180});
  geos.push_back({"r270", r270});
  geos.push_back({"r0v", vflip(src)});
  geos.push_back({"r90v", vflip(r90)});
  geos.push_back({"r180v", vflip(r180)});
  geos.push_back({"r270v", vflip(r270)});

  std::vector<Patch> out;
  out.reserve(8);
  for (auto& g : geos) {
    Patch p;
    p.grid_index = patch.grid_index;
    p.augmentation = g.tag;
    p.pixels = color_perturb(g.img, rng, jitter);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace mcua
