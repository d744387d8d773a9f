#include "mcua/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mcua/csv.hpp"
#include "mcua/rng.hpp"

namespace fs = std::filesystem;

namespace mcua {

namespace {

void draw_dot(Image& img, double cx, double cy, double r, double shade) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + r + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + r + 1)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
      const double alpha = std::clamp(r + 0.5 - d, 0.0, 1.0);  // soft 1px edge
      if (alpha <= 0.0) continue;
      for (int c = 0; c < 3; ++c) {
        double& v = img.at(x, y, c);
        v = std::clamp(v * (1.0 - alpha) + shade * alpha, 0.0, 1.0);
      }
    }
}

void draw_bar(Image& img, double cx, double cy, bool horizontal, double len, double thick,
              double shade) {
  const double hw = horizontal ? len / 2 : thick / 2;
  const double hh = horizontal ? thick / 2 : len / 2;
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - hw - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + hw + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - hh - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + hh + 1)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = std::abs(x + 0.5 - cx) - hw;
      const double dy = std::abs(y + 0.5 - cy) - hh;
      const double alpha =
          std::clamp(0.5 - std::max(dx, dy), 0.0, 1.0);  // soft rectangle edge
      if (alpha <= 0.0) continue;
      for (int c = 0; c < 3; ++c) {
        double& v = img.at(x, y, c);
        v = std::clamp(v * (1.0 - alpha) + shade * alpha, 0.0, 1.0);
      }
    }
}

// Cell interior that motifs may touch. Margins keep edge-column ink at
// x < w/4 (left) and x >= 3w/4 (right): a half-width patch can never cover
// ink from both edge columns.
struct Box {
  double x0, y0, x1, y1;
};

Box cell_box(const SynthSpec& spec, int col, int row) {
  const double cw = spec.width / 3.0;
  const double ch = spec.height / 2.0;
  const double mx = cw / 4.0;
  const double my = ch / 6.0;
  return {col * cw + mx, row * ch + my, (col + 1) * cw - mx, (row + 1) * ch - my};
}

void draw_dots_cell(Image& img, const Box& b, Rng& rng) {
  // 6 dots on a jittered 2x3 lattice inside the box. Radii are kept below half
  // the lattice spacing so neighboring dots stay separate blobs.
  const double gw = (b.x1 - b.x0) / 2.0;
  const double gh = (b.y1 - b.y0) / 3.0;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 2; ++i) {
      const double cx = b.x0 + (i + 0.5) * gw + rng.uniform(-1.0, 1.0);
      const double cy = b.y0 + (j + 0.5) * gh + rng.uniform(-1.0, 1.0);
      const double r = rng.uniform(1.2, 1.8);
      draw_dot(img, cx, cy, r, rng.uniform(0.15, 0.3));
    }
}

void draw_bars_cell(Image& img, const Box& b, Rng& rng) {
  // 3 horizontal bars stacked inside the box. Horizontal only: stacked
  // vertical bars would touch and merge into one blob.
  const double gh = (b.y1 - b.y0) / 3.0;
  for (int j = 0; j < 3; ++j) {
    const double cx = (b.x0 + b.x1) / 2.0 + rng.uniform(-1.0, 1.0);
    const double cy = b.y0 + (j + 0.5) * gh + rng.uniform(-0.5, 0.5);
    draw_bar(img, cx, cy, true, 6.0, 2.0, rng.uniform(0.15, 0.3));
  }
}

}  // namespace

Image generate_image(const SynthSpec& spec, int class_index, int image_index) {
  if (class_index < 0 || class_index > 3) throw ValidationError("class index must be 0..3");
  if (spec.width < 12 || spec.height < 12)
    throw ValidationError("synthetic images must be at least 12x12");
  Rng rng(derive_seed(spec.seed, "synth-image", static_cast<uint64_t>(class_index),
                      static_cast<uint64_t>(image_index)));

  Image img = make_image(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      const double base = 0.93 + rng.uniform(-spec.noise, spec.noise);
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = std::clamp(base + rng.uniform(-spec.noise, spec.noise) * 0.5, 0.0, 1.0);
    }

  const double area_factor = (spec.width * spec.height) / (64.0 * 48.0);
  if (class_index == 0 || class_index == 1) {
    const int n = static_cast<int>(std::lround((class_index == 0 ? 14 : 42) * area_factor));
    for (int i = 0; i < n; ++i) {
      const double cx = rng.uniform(2.0, spec.width - 2.0);
      const double cy = rng.uniform(2.0, spec.height - 2.0);
      const double r = rng.uniform(spec.blob_r_lo, spec.blob_r_hi);
      draw_dot(img, cx, cy, r, rng.uniform(0.15, 0.3));
    }
    return img;
  }

  // Arrangement pair. Column types: dots=false, bars=true.
  const bool left = rng.bernoulli(0.5);
  const bool mid = rng.bernoulli(0.5);
  const bool right = class_index == 2 ? left : !left;
  const bool col_type[3] = {left, mid, right};
  for (int col = 0; col < 3; ++col)
    for (int row = 0; row < 2; ++row) {
      const Box b = cell_box(spec, col, row);
      if (col_type[col])
        draw_bars_cell(img, b, rng);
      else
        draw_dots_cell(img, b, rng);
    }
  return img;
}

DatasetManifest generate_dataset(const SynthSpec& spec, int n_per_class,
                                 const std::string& root) {
  if (n_per_class < 1) throw ValidationError("n_per_class must be >= 1");
  DatasetManifest m;
  m.root = root;
  m.generation_seed = spec.seed;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create dataset root: " + root + " (" + ec.message() + ")");

  std::string manifest_csv = "path,class,seed\n";
  for (int cls = 0; cls < 4; ++cls) {
    const std::string cls_name = "class" + std::to_string(cls);
    m.classes.push_back(cls_name);
    const fs::path dir = fs::path(root) / cls_name;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create class directory: " + dir.string());
    for (int i = 0; i < n_per_class; ++i) {
      char name[16];
      std::snprintf(name, sizeof(name), "%03d.png", i);
      const fs::path file = dir / name;
      const Image img = generate_image(spec, cls, i);
      save_png(file.string(), img);
      ManifestRecord rec;
      rec.path = cls_name + "/" + name;
      rec.class_index = cls;
      rec.seed = derive_seed(spec.seed, "synth-image", static_cast<uint64_t>(cls),
                             static_cast<uint64_t>(i));
      m.records.push_back(rec);
      manifest_csv += rec.path + "," + fmt_int(cls) + "," + std::to_string(rec.seed) + "\n";
    }
  }
  const fs::path mpath = fs::path(root) / "manifest.csv";
  std::ofstream mf(mpath, std::ios::binary | std::ios::trunc);
  if (!mf) throw IoError("cannot write manifest: " + mpath.string());
  mf << manifest_csv;
  return m;
}

DatasetManifest load_dataset(const std::string& root) {
  if (!fs::is_directory(root)) throw ValidationError("dataset root is not a directory: " + root);
  DatasetManifest m;
  m.root = root;
  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty())
    throw ValidationError("dataset root has no class directories: " + root);

  for (size_t cls = 0; cls < class_dirs.size(); ++cls) {
    m.classes.push_back(class_dirs[cls]);
    const fs::path dir = fs::path(root) / class_dirs[cls];
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());
    int kept = 0;
    for (const auto& f : files) {
      const fs::path p = dir / f;
      if (!is_supported_image(p.string())) {
        m.warnings.push_back("skipped non-image file: " + p.string());
        continue;
      }
      ManifestRecord rec;
      rec.path = class_dirs[cls] + "/" + f;
      rec.class_index = static_cast<int>(cls);
      m.records.push_back(rec);
      ++kept;
    }
    if (kept == 0)
      throw ValidationError("class directory has no images: " + dir.string());
  }
  return m;
}

int count_blobs_region(const Image& img, int x0, int y0, int x1, int y1, double threshold) {
  x0 = std::max(0, x0);
  y0 = std::max(0, y0);
  x1 = std::min(img.width, x1);
  y1 = std::min(img.height, y1);
  const int w = x1 - x0, h = y1 - y0;
  if (w <= 0 || h <= 0) return 0;
  std::vector<uint8_t> dark(static_cast<size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double lum = (img.at(x0 + x, y0 + y, 0) + img.at(x0 + x, y0 + y, 1) +
                          img.at(x0 + x, y0 + y, 2)) /
                         3.0;
      dark[static_cast<size_t>(y) * w + x] = lum < threshold ? 1 : 0;
    }
  std::vector<int> stack;
  int blobs = 0;
  for (int start = 0; start < w * h; ++start) {
    if (!dark[static_cast<size_t>(start)]) continue;
    int size = 0;
    stack.push_back(start);
    dark[static_cast<size_t>(start)] = 0;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      ++size;
      const int cx = cur % w, cy = cur / w;
      const int nb[4][2] = {{cx - 1, cy}, {cx + 1, cy}, {cx, cy - 1}, {cx, cy + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[0] >= w || n[1] < 0 || n[1] >= h) continue;
        const int idx = n[1] * w + n[0];
        if (dark[static_cast<size_t>(idx)]) {
          dark[static_cast<size_t>(idx)] = 0;
          stack.push_back(idx);
        }
      }
    }
    if (size >= 2) ++blobs;  // single-pixel specks are noise, not motifs
  }
  return blobs;
}

int count_blobs(const Image& img, double threshold) {
  return count_blobs_region(img, 0, 0, img.width, img.height, threshold);
}

double layout_disagreement(const Image& img) {
  const int cw = img.width / 3;
  const int left = count_blobs_region(img, 0, 0, cw, img.height);
  const int right = count_blobs_region(img, img.width - cw, 0, img.width, img.height);
  return std::abs(left - right);
}

}  // namespace mcua
