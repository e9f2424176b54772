#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "agpad/errors.hpp"
#include "agpad/tensor.hpp"

namespace agpad {

/// 8-bit grayscale raster (the lossless on-disk image format here is binary
/// PGM; overlays are written as binary PPM).
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

struct ImageRgb {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel
};

namespace detail {

inline int pnm_token(std::istream& is, const std::string& path) {
  // skip whitespace and '#' comments
  int c = is.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = is.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = is.get();
  }
  if (c == EOF || !std::isdigit(c)) {
    throw DataError(path + ": malformed PNM header");
  }
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = is.get();
  }
  return value;
}

}  // namespace detail

/// Read a binary PGM (P5) or PPM (P6); color input is reduced to luma.
inline ImageU8 read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open image: " + path);
  char m0 = static_cast<char>(is.get());
  char m1 = static_cast<char>(is.get());
  if (m0 != 'P' || (m1 != '5' && m1 != '6')) {
    throw DataError(path + ": not a binary PGM/PPM image");
  }
  const bool color = (m1 == '6');
  const int width = detail::pnm_token(is, path);
  const int height = detail::pnm_token(is, path);
  const int maxval = detail::pnm_token(is, path);
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw DataError(path + ": unsupported PNM geometry or maxval");
  }
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<std::uint8_t> raw(n * (color ? 3 : 1));
  if (!is.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size()))) {
    throw DataError(path + ": truncated pixel data");
  }
  ImageU8 img{width, height, {}};
  if (!color) {
    img.pixels = std::move(raw);
  } else {
    img.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Rec.601 luma
      const double y = 0.299 * raw[3 * i] + 0.587 * raw[3 * i + 1] +
                       0.114 * raw[3 * i + 2];
      img.pixels[i] = static_cast<std::uint8_t>(std::lround(y));
    }
  }
  return img;
}

inline void write_pgm(const std::string& path, const ImageU8& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw DataError("write failed: " + path);
}

inline void write_ppm(const std::string& path, const ImageRgb& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw DataError("write failed: " + path);
}

inline Tensor<float> tensor_from_image(const ImageU8& img) {
  Tensor<float> t({1, img.height, img.width});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    t[static_cast<std::int64_t>(i)] = static_cast<float>(img.pixels[i]) / 255.0f;
  }
  return t;
}

inline std::uint8_t quantize_pixel(float v) {
  const float clamped = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

/// Quantize a [0,1] map (rank 2, or rank 3 with one channel) to 8 bits.
template <typename S>
ImageU8 image_from_tensor(const Tensor<S>& t) {
  int h = 0, w = 0;
  if (t.rank() == 2) {
    h = t.dim(0);
    w = t.dim(1);
  } else if (t.rank() == 3 && t.dim(0) == 1) {
    h = t.dim(1);
    w = t.dim(2);
  } else {
    throw ShapeError("image_from_tensor: expected HxW or 1xHxW, got " +
                     shape_string(t.shape()));
  }
  ImageU8 img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w)};
  for (std::int64_t i = 0; i < t.size(); ++i) {
    img.pixels[static_cast<std::size_t>(i)] =
        quantize_pixel(static_cast<float>(t[i]));
  }
  return img;
}

/// Edge-replicating bilinear lookup on channel `c` of a CxHxW tensor.
template <typename S>
S bilinear_sample(const Tensor<S>& t, int c, double y, double x) {
  const int h = t.dim(1), w = t.dim(2);
  const double yc = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const double xc = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(std::floor(yc));
  const int x0 = static_cast<int>(std::floor(xc));
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const double fy = yc - y0, fx = xc - x0;
  const double v00 = t(c, y0, x0), v01 = t(c, y0, x1);
  const double v10 = t(c, y1, x0), v11 = t(c, y1, x1);
  return static_cast<S>((1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) +
                        fy * ((1.0 - fx) * v10 + fx * v11));
}

/// Bilinear resize of a CxHxW tensor (half-pixel-centered sampling).
template <typename S>
Tensor<S> resize_bilinear(const Tensor<S>& t, int out_h, int out_w) {
  if (t.rank() != 3) {
    throw ShapeError("resize_bilinear: rank-3 tensor expected, got " +
                     shape_string(t.shape()));
  }
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
  if (out_h == h && out_w == w) return t;
  Tensor<S> out({c, out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int ci = 0; ci < c; ++ci) {
    for (int oy = 0; oy < out_h; ++oy) {
      const double y = (oy + 0.5) * sy - 0.5;
      for (int ox = 0; ox < out_w; ++ox) {
        const double x = (ox + 0.5) * sx - 0.5;
        out(ci, oy, ox) = bilinear_sample(t, ci, y, x);
      }
    }
  }
  return out;
}

}  // namespace agpad
