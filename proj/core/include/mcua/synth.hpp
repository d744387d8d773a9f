#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcua/image.hpp"

namespace mcua {

// Recipe for the 4-class synthetic set.
//   class 0: sparse scattered dots (texture, low density)
//   class 1: dense scattered dots (texture, high density)
//   class 2: boxed motifs, left and right column types AGREE
//   class 3: boxed motifs, left and right column types DIFFER
// Classes 2/3 lay motifs out on a 3-column x 2-row cell lattice; each column
// draws one motif type (dots or bars). Column margins keep one patch from ever
// seeing ink of both edge columns at scale 1, so the pair's per-patch marginal
// statistics coincide by construction and only the joint layout separates them.
// Bars appear only in classes 2/3, making motif type a feature patch networks
// must learn to separate {2,3} from {0,1}.
struct SynthSpec {
  int width = 64;
  int height = 48;
  double blob_r_lo = 1.5;   // dot radius range, pixels
  double blob_r_hi = 2.5;
  double noise = 0.04;      // background noise amplitude
  uint64_t seed = 1;
};

struct ManifestRecord {
  std::string path;   // relative to the dataset root
  int class_index = 0;
  uint64_t seed = 0;  // per-image generation seed; 0 for loaded datasets
  std::string split_tag;
};

struct DatasetManifest {
  std::string root;
  std::vector<std::string> classes;  // ordered names
  std::vector<ManifestRecord> records;
  std::vector<std::string> warnings;  // skipped files etc.
  std::optional<uint64_t> generation_seed;
};

// Renders one image deterministically from (spec.seed, class, index).
Image generate_image(const SynthSpec& spec, int class_index, int image_index);

// Writes 4*n_per_class PNGs under root/class{k}/ plus manifest.csv
// (path,class,seed). Same spec -> byte-identical trees.
DatasetManifest generate_dataset(const SynthSpec& spec, int n_per_class,
                                 const std::string& root);

// Scans root/{class_dir}/* for PNG/PPM files. Class order = sorted directory
// names; record order within a class = sorted filenames. Non-image files are
// skipped with a warning record; an empty class directory is an error.
DatasetManifest load_dataset(const std::string& root);

// Connected dark components (4-connectivity), ignoring single-pixel specks.
// The measurement behind the generator's statistical guarantees.
int count_blobs(const Image& img, double threshold = 0.55);
int count_blobs_region(const Image& img, int x0, int y0, int x1, int y1,
                       double threshold = 0.55);

// Whole-image layout statistic: blob-count disagreement between the left and
// right column regions. Near 0 for class 2, large for class 3.
double layout_disagreement(const Image& img);

}  // namespace mcua
