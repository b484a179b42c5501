#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "bacon/errors.hpp"

namespace bacon::image {

// H x W x C samples in [0, 1], row-major with interleaved channels.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0) : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h) * w * c, fill) {
    if (h < 1 || w < 1 || c < 1) throw InvalidInput("Image: dimensions must be positive");
  }

  double& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::size_t size() const { return pixels.size(); }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width && channels == o.channels; }
};

namespace detail {

inline std::string lower_extension(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw InvalidInput("cannot open image " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InvalidInput("libpng initialization failed");
  }
  std::vector<png_byte> data;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InvalidInput("malformed PNG " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int c = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  data.resize(stride * static_cast<std::size_t>(h));
  rows.resize(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = data.data() + stride * static_cast<std::size_t>(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(h, w, c);
  const double scale = depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w * c; ++x) {
      const png_byte* row = rows[static_cast<std::size_t>(y)];
      const unsigned v = depth == 16 ? (unsigned(row[2 * x]) << 8) | row[2 * x + 1] : row[x];
      img.pixels[static_cast<std::size_t>(y) * w * c + x] = v * scale;
    }
  return img;
}

inline unsigned quantize(double v, unsigned maxval) {
  return static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
}

inline void write_png(const std::string& path, const Image& img, int depth) {
  if (img.channels != 1 && img.channels != 3) throw InvalidInput("PNG output needs 1 or 3 channels");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw InvalidInput("cannot write image " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw InvalidInput("libpng initialization failed");
  }
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels * (depth == 16 ? 2 : 1);
  std::vector<png_byte> data(stride * static_cast<std::size_t>(img.height));
  const unsigned maxval = depth == 16 ? 65535 : 255;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const unsigned v = quantize(img.pixels[i], maxval);
    if (depth == 16) {
      data[2 * i] = static_cast<png_byte>(v >> 8);
      data[2 * i + 1] = static_cast<png_byte>(v & 0xFF);
    } else {
      data[i] = static_cast<png_byte>(v);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = data.data() + stride * static_cast<std::size_t>(y);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InvalidInput("failed writing PNG " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), depth,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Binary PGM (P5) / PPM (P6), 8 or 16 bit.
inline Image read_pnm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open image " + path);
  auto token = [&]() {
    std::string t;
    char ch;
    while (f.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(f, skip);
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!t.empty()) break;
      } else {
        t.push_back(ch);
      }
    }
    return t;
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P6") throw InvalidInput("unsupported PNM variant in " + path);
  int w = 0, h = 0;
  unsigned maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = static_cast<unsigned>(std::stoul(token()));
  } catch (const std::exception&) {
    throw InvalidInput("malformed PNM header in " + path);
  }
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw InvalidInput("malformed PNM header in " + path);
  const int c = magic == "P6" ? 3 : 1;
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * c * bytes);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (f.gcount() != static_cast<std::streamsize>(raw.size())) throw InvalidInput("truncated PNM data in " + path);
  Image img(h, w, c);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const unsigned v = bytes == 2 ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
    img.pixels[i] = static_cast<double>(v) / maxval;
  }
  return img;
}

inline void write_pnm(const std::string& path, const Image& img, int depth) {
  if (img.channels != 1 && img.channels != 3) throw InvalidInput("PNM output needs 1 or 3 channels");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot write image " + path);
  const unsigned maxval = depth == 16 ? 65535 : 255;
  f << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << '\n' << maxval << '\n';
  for (double p : img.pixels) {
    const unsigned v = quantize(p, maxval);
    if (depth == 16) f.put(static_cast<char>(v >> 8));
    f.put(static_cast<char>(v & 0xFF));
  }
}

}  // namespace detail

// Reads PNG, PGM or PPM (8 or 16 bit). Alpha channels are dropped.
inline Image read_image(const std::string& path) {
  const auto ext = detail::lower_extension(path);
  if (ext == "png") return detail::read_png(path);
  if (ext == "pgm" || ext == "ppm" || ext == "pnm") return detail::read_pnm(path);
  throw InvalidInput("unsupported image format: " + path);
}

inline void write_image(const std::string& path, const Image& img, int depth = 8) {
  if (depth != 8 && depth != 16) throw InvalidInput("image bit depth must be 8 or 16");
  const auto ext = detail::lower_extension(path);
  if (ext == "png") return detail::write_png(path, img, depth);
  if (ext == "pgm" || ext == "ppm" || ext == "pnm") return detail::write_pnm(path, img, depth);
  throw InvalidInput("unsupported image format: " + path);
}

}  // namespace bacon::image
