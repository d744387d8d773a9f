#include "mcua/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>

namespace mcua {

Image make_image(int width, int height, double fill) {
  if (width < 1 || height < 1) throw ValidationError("image dimensions must be >= 1");
  Image img;
  img.width = width;
  img.height = height;
  img.pixels.assign(static_cast<size_t>(width) * height * 3, fill);
  return img;
}

uint8_t quantize8(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<uint8_t>(std::lround(c * 255.0));
}

Image load_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open image: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw IoError("not a binary PPM (P6): " + path);
  auto next_token = [&f, &path]() {
    // PPM headers allow '#' comments between tokens.
    std::string tok;
    while (f >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(f, rest);
        continue;
      }
      return tok;
    }
    throw IoError("truncated PPM header: " + path);
  };
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError("malformed PPM header: " + path);
  }
  if (w < 1 || h < 1) throw IoError("bad PPM dimensions: " + path);
  if (maxval != 255) throw IoError("unsupported PPM maxval (want 255): " + path);
  f.get();  // single whitespace after maxval
  std::vector<char> raw(static_cast<size_t>(w) * h * 3);
  f.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (f.gcount() != static_cast<std::streamsize>(raw.size()))
    throw IoError("truncated PPM payload: " + path);
  Image img = make_image(w, h);
  for (size_t i = 0; i < raw.size(); ++i)
    img.pixels[i] = static_cast<uint8_t>(raw[i]) / 255.0;
  return img;
}

void save_ppm(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open image for writing: " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<char> raw(img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); ++i)
    raw[i] = static_cast<char>(quantize8(img.pixels[i]));
  f.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!f) throw IoError("short write to image: " + path);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FileHandle = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image load_png(const std::string& path) {
  FileHandle fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open image: " + path);
  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw IoError("not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png reader allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png reader allocation failed");
  }
  std::vector<png_bytep> rows;
  std::vector<png_byte> buf;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG file: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const size_t rowbytes = png_get_rowbytes(png, info);
  buf.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (rowbytes < static_cast<size_t>(w) * 3) throw IoError("unexpected PNG row layout: " + path);
  Image img = make_image(static_cast<int>(w), static_cast<int>(h));
  for (png_uint_32 y = 0; y < h; ++y)
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(static_cast<int>(x), static_cast<int>(y), c) =
            buf[rowbytes * y + static_cast<size_t>(x) * 3 + static_cast<size_t>(c)] / 255.0;
  return img;
}

void save_png(const std::string& path, const Image& img) {
  FileHandle fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open image for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png writer allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png writer allocation failed");
  }
  std::vector<png_byte> buf(static_cast<size_t>(img.width) * img.height * 3);
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failure: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  for (size_t i = 0; i < img.pixels.size(); ++i) buf[i] = quantize8(img.pixels[i]);
  for (int y = 0; y < img.height; ++y)
    rows[static_cast<size_t>(y)] = buf.data() + static_cast<size_t>(y) * img.width * 3;
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image load_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open image: " + path);
  char head[8] = {};
  f.read(head, 8);
  f.close();
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (std::equal(png_sig, png_sig + 8, reinterpret_cast<unsigned char*>(head)))
    return load_png(path);
  if (head[0] == 'P' && head[1] == '6') return load_ppm(path);
  throw IoError("unsupported image format: " + path);
}

bool is_supported_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  char head[8] = {};
  f.read(head, 8);
  if (f.gcount() < 2) return false;
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (f.gcount() == 8 &&
      std::equal(png_sig, png_sig + 8, reinterpret_cast<unsigned char*>(head)))
    return true;
  return head[0] == 'P' && head[1] == '6';
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw ValidationError("resize target dimensions must be >= 1");
  if (img.width < 1 || img.height < 1) throw ValidationError("resize source is empty");
  if (out_w == img.width && out_h == img.height) return img;

  Image out = make_image(out_w, out_h);
  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    // Half-pixel centers: output center maps to input coordinate space.
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const double wy = fy - y0;
    const int y0c = std::clamp(y0, 0, img.height - 1);
    const int y1c = std::clamp(y0 + 1, 0, img.height - 1);
    for (int x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const double wx = fx - x0;
      const int x0c = std::clamp(x0, 0, img.width - 1);
      const int x1c = std::clamp(x0 + 1, 0, img.width - 1);
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(x0c, y0c, c) * (1.0 - wx) + img.at(x1c, y0c, c) * wx;
        const double bot = img.at(x0c, y1c, c) * (1.0 - wx) + img.at(x1c, y1c, c) * wx;
        out.at(x, y, c) = std::clamp(top * (1.0 - wy) + bot * wy, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace mcua
