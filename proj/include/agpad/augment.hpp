#pragma once

#include <cmath>

#include "agpad/image.hpp"
#include "agpad/rng.hpp"
#include "agpad/tensor.hpp"

namespace agpad {

/// Training-time augmentation: horizontal flip, rotation, zoom, translation.
/// Magnitudes are conservative defaults and configurable.
struct AugmentConfig {
  double flip_prob = 0.5;
  double rotation_deg = 15.0;
  double zoom_min = 0.9;
  double zoom_max = 1.1;
  double translate_frac = 0.1;
};

/// Exact horizontal mirror; applying it twice restores the input bitwise.
template <typename S>
Tensor<S> hflip(const Tensor<S>& img) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor<S> out(img.shape());
  for (int ci = 0; ci < c; ++ci) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out(ci, y, x) = img(ci, y, w - 1 - x);
    }
  }
  return out;
}

/// One random draw of flip + rotation + zoom + translation, resampled
/// bilinearly with edge replication. Deterministic per seed. The identity
/// draw (no flip, 0 degrees, zoom 1, shift 0) reproduces the input exactly.
template <typename S>
Tensor<S> augment(const Tensor<S>& img, const AugmentConfig& cfg,
                  std::uint64_t seed) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Rng rng(seed);
  const bool flip = rng.bernoulli(cfg.flip_prob);
  const double theta =
      rng.uniform(-cfg.rotation_deg, cfg.rotation_deg) * M_PI / 180.0;
  const double zoom = rng.uniform(cfg.zoom_min, cfg.zoom_max);
  const double tx = rng.uniform(-cfg.translate_frac, cfg.translate_frac) * w;
  const double ty = rng.uniform(-cfg.translate_frac, cfg.translate_frac) * h;

  const Tensor<S> base = flip ? hflip(img) : img;
  if (theta == 0.0 && zoom == 1.0 && tx == 0.0 && ty == 0.0) return base;

  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  Tensor<S> out(img.shape());
  for (int ci = 0; ci < c; ++ci) {
    for (int oy = 0; oy < h; ++oy) {
      for (int ox = 0; ox < w; ++ox) {
        // invert dst = R(theta) * zoom * src + shift
        const double dy = oy - cy - ty;
        const double dx = ox - cx - tx;
        const double sy = (cos_t * dy - sin_t * dx) / zoom + cy;
        const double sx = (sin_t * dy + cos_t * dx) / zoom + cx;
        out(ci, oy, ox) = bilinear_sample(base, ci, sy, sx);
      }
    }
  }
  return out;
}

}  // namespace agpad
