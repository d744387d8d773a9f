#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcua/image.hpp"
#include "mcua/rng.hpp"

namespace mcua {

// Sliding-window layout over one scaled image. Origins are enumerated
// row-major, top-left first; that ordering defines the grid index used by
// pattern walks everywhere downstream.
struct PatchGrid {
  int scale_id = 0;
  int patch_w = 0, patch_h = 0;
  int stride = 0;
  int cols = 0, rows = 0;
  std::vector<std::pair<int, int>> origins;  // (x, y) per grid index

  int count() const { return cols * rows; }
};

struct Patch {
  Image pixels;
  int grid_index = 0;
  std::string augmentation;  // "none", "r90", "r180v", ...
};

// Closed form of the placement count: (1+floor((iw-pw)/s)) * (1+floor((ih-ph)/s)).
int64_t patch_count(int image_w, int image_h, int patch_w, int patch_h, int stride);

PatchGrid make_grid(int image_w, int image_h, int patch_w, int patch_h, int stride,
                    int scale_id = 0);

// Cuts every grid window out of the image. Patch k's origin is
// ((k mod cols)*stride, (k div cols)*stride).
std::vector<Patch> extract_patches(const Image& img, int patch_w, int patch_h, int stride,
                                   PatchGrid* grid_out = nullptr);

// Uniform jitter amplitudes for the color perturbation step.
struct ColorJitter {
  double brightness = 0.1;      // additive, +-brightness
  double contrast_lo = 0.9;     // multiplicative around mid-gray
  double contrast_hi = 1.1;
  double channel_lo = 0.95;     // independent per-channel scale
  double channel_hi = 1.05;
};

enum class AugmentMode { train, test };

// train: the 8 geometric versions (rotations 0/90/180/270 degrees, each also
// vertically flipped), every version followed by an independent color
// perturbation drawn from `rng`. test: the single unperturbed original.
// All versions keep the source patch's grid_index.
std::vector<Patch> augment_patch(const Patch& patch, AugmentMode mode, Rng& rng,
                                 const ColorJitter& jitter);

// Geometric helpers (exposed for tests).
Image rotate90(const Image& img);   // clockwise
Image rotate180(const Image& img);
Image rotate270(const Image& img);
Image vflip(const Image& img);
Image color_perturb(const Image& img, Rng& rng, const ColorJitter& jitter);

}  // namespace mcua
