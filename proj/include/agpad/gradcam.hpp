#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "agpad/image.hpp"
#include "agpad/model.hpp"

namespace agpad {

/// Non-negative H x W attribution map, max-normalized to [0,1] unless it is
/// identically zero. `layer` records which tap it came from.
struct Heatmap {
  Tensor<float> values;
  std::string layer;
};

enum class GradCamTarget { probability, logit };

/// Core Grad-CAM reduction: backpropagate the scalar target, average the
/// feature-map gradient per channel, and rectify the weighted channel sum.
template <typename S>
Heatmap grad_cam_reduce(Tape<S>& tape, Var<S> target, Var<S> feature,
                        std::string layer_name) {
  tape.backward(target);
  Tensor<S> g = tape.grad(feature);
  const Tensor<S>& a = feature.value();
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  const S inv = S(1) / static_cast<S>(h * w);

  Tensor<float> heat({h, w});
  for (int ci = 0; ci < c; ++ci) {
    S weight = S(0);
    for (int i = 0; i < h * w; ++i) weight += g[ci * h * w + i];
    weight *= inv;
    for (int i = 0; i < h * w; ++i) {
      heat[i] += static_cast<float>(weight * a[ci * h * w + i]);
    }
  }
  float mx = 0.0f;
  for (std::int64_t i = 0; i < heat.size(); ++i) {
    heat[i] = std::max(heat[i], 0.0f);
    mx = std::max(mx, heat[i]);
  }
  if (mx > 0.0f) {
    for (std::int64_t i = 0; i < heat.size(); ++i) heat[i] /= mx;
  }
  return Heatmap{std::move(heat), std::move(layer_name)};
}

/// Attribution of the PA decision w.r.t. a registered tap. Both the
/// pre-attention taps (tap3/tap4/tap5) and the post-attention map (attn) are
/// valid targets, so refined and unrefined views come from one checkpoint.
inline Heatmap grad_cam(const ModelGraph<float>& model,
                        const Tensor<float>& image, const std::string& layer,
                        int target_class = 1,
                        GradCamTarget target = GradCamTarget::probability) {
  if (target_class != 0 && target_class != 1) {
    throw ConfigError("grad_cam: target class must be 0 (live) or 1 (PA)");
  }
  Tape<float> tape;
  auto f = model.forward(tape, image);
  Var<float> feature;
  if (layer == "tap3") {
    feature = f.tap3;
  } else if (layer == "tap4") {
    feature = f.tap4;
  } else if (layer == "tap5") {
    feature = f.tap5;
  } else if (layer == "attn") {
    feature = f.attn;
  } else {
    throw ConfigError("grad_cam: unknown layer '" + layer +
                      "' (expected tap3|tap4|tap5|attn)");
  }
  Var<float> scalar = target == GradCamTarget::probability
                          ? index(softmax(f.logits), target_class)
                          : index(f.logits, target_class);
  return grad_cam_reduce(tape, scalar, feature, layer);
}

namespace detail {

// piecewise-linear jet-style colormap on [0,1]
inline void heat_color(float h, std::uint8_t rgb[3]) {
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  rgb[0] = static_cast<std::uint8_t>(
      std::lround(255.0 * clamp01(1.5 - std::abs(4.0 * h - 3.0))));
  rgb[1] = static_cast<std::uint8_t>(
      std::lround(255.0 * clamp01(1.5 - std::abs(4.0 * h - 2.0))));
  rgb[2] = static_cast<std::uint8_t>(
      std::lround(255.0 * clamp01(1.5 - std::abs(4.0 * h - 1.0))));
}

}  // namespace detail

/// Bilinearly upsample the heatmap to the image grid and tint the grayscale
/// image with a fixed colormap. Blend weight is opacity * heat, so an
/// all-zero heatmap returns the input image unchanged.
inline ImageRgb upsample_overlay(const Heatmap& heatmap,
                                 const Tensor<float>& image,
                                 double opacity = 0.45) {
  if (image.rank() != 3 || image.dim(0) != 1) {
    throw ShapeError("upsample_overlay: expected a 1xHxW image, got " +
                     shape_string(image.shape()));
  }
  if (heatmap.values.dim(0) > image.dim(1) ||
      heatmap.values.dim(1) > image.dim(2)) {
    throw ShapeError("upsample_overlay: heatmap larger than image");
  }
  const int h = image.dim(1), w = image.dim(2);
  Tensor<float> up = resize_bilinear(
      heatmap.values.reshaped({1, heatmap.values.dim(0),
                               heatmap.values.dim(1)}),
      h, w);
  ImageRgb out{w, h,
               std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w * 3)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float heat = std::clamp(up(0, y, x), 0.0f, 1.0f);
      const double blend = opacity * heat;
      std::uint8_t color[3];
      detail::heat_color(heat, color);
      const double gray = 255.0 * std::clamp(image(0, y, x), 0.0f, 1.0f);
      const std::size_t base = (static_cast<std::size_t>(y) * w + x) * 3;
      for (int ch = 0; ch < 3; ++ch) {
        out.pixels[base + static_cast<std::size_t>(ch)] =
            static_cast<std::uint8_t>(
                std::lround((1.0 - blend) * gray + blend * color[ch]));
      }
    }
  }
  return out;
}

}  // namespace agpad
