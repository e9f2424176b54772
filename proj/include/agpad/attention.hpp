#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "agpad/ops.hpp"
#include "agpad/rng.hpp"
#include "agpad/tape.hpp"

namespace agpad {

/// Which way the attention-map softmax normalizes. `columns` follows the
/// written denominators (each column of P and Q sums to 1); `rows` is the
/// transposed reading used by the DANet lineage. One switch, used by both
/// modules, so the two readings stay comparable.
enum class SoftmaxAxis { columns, rows };

enum class FusionMode {
  none,
  pam_only,
  cam_only,
  parallel,
  sequential,
  hierarchical,
};

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::none: return "none";
    case FusionMode::pam_only: return "pam";
    case FusionMode::cam_only: return "cam";
    case FusionMode::parallel: return "parallel";
    case FusionMode::sequential: return "sequential";
    case FusionMode::hierarchical: return "hierarchical";
  }
  return "?";
}

inline FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "none") return FusionMode::none;
  if (s == "pam") return FusionMode::pam_only;
  if (s == "cam") return FusionMode::cam_only;
  if (s == "parallel") return FusionMode::parallel;
  if (s == "sequential") return FusionMode::sequential;
  if (s == "hierarchical") return FusionMode::hierarchical;
  throw ConfigError("unknown fusion mode '" + s +
                    "' (expected none|pam|cam|parallel|sequential|hierarchical)");
}

/// He fan-in initialization for conv / FC weights.
template <typename S>
Tensor<S> he_weight(Shape shape, Rng& rng) {
  std::int64_t fan_in = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
  Tensor<S> t(std::move(shape));
  fill_normal(t, rng, 0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  t.requires_grad = true;
  return t;
}

template <typename S>
Tensor<S> zero_param(Shape shape) {
  Tensor<S> t(std::move(shape));
  t.requires_grad = true;
  return t;
}

/// Position attention parameters: 1x1 convs B/C compress C -> C/r, conv D is
/// channel-preserving, alpha is the learnable residual weight (zero at init
/// so the module starts as an identity).
template <typename S>
struct PamParams {
  Tensor<S> conv_b_w, conv_b_b;
  Tensor<S> conv_c_w, conv_c_b;
  Tensor<S> conv_d_w, conv_d_b;
  Tensor<S> alpha;
  int reduction = 8;

  static PamParams init(int channels, int reduction, Rng& rng) {
    if (reduction <= 0 || channels % reduction != 0) {
      throw ShapeError("PAM reduction ratio " + std::to_string(reduction) +
                       " does not divide channel count " +
                       std::to_string(channels));
    }
    const int cr = channels / reduction;
    PamParams p;
    p.conv_b_w = he_weight<S>({cr, channels, 1, 1}, rng);
    p.conv_b_b = zero_param<S>({cr});
    p.conv_c_w = he_weight<S>({cr, channels, 1, 1}, rng);
    p.conv_c_b = zero_param<S>({cr});
    p.conv_d_w = he_weight<S>({channels, channels, 1, 1}, rng);
    p.conv_d_b = zero_param<S>({channels});
    p.alpha = zero_param<S>({1});
    p.reduction = reduction;
    return p;
  }
};

/// Channel attention has no convolutional parameters; it works on the raw
/// feature map. beta is the learnable residual weight, zero at init.
template <typename S>
struct CamParams {
  Tensor<S> beta;

  static CamParams init() {
    CamParams p;
    p.beta = zero_param<S>({1});
    return p;
  }
};

/// The two 3x3 channel-preserving conv layers appended after an attention
/// module on each parallel branch, ReLU between them, padding 1.
template <typename S>
struct PostConvParams {
  Tensor<S> w1, b1, w2, b2;

  static PostConvParams init(int channels, Rng& rng) {
    PostConvParams p;
    p.w1 = he_weight<S>({channels, channels, 3, 3}, rng);
    p.b1 = zero_param<S>({channels});
    p.w2 = he_weight<S>({channels, channels, 3, 3}, rng);
    p.b2 = zero_param<S>({channels});
    return p;
  }

  // Delta kernels; the whole stack acts as identity on non-negative maps.
  static PostConvParams identity(int channels) {
    PostConvParams p;
    p.w1 = zero_param<S>({channels, channels, 3, 3});
    p.w2 = zero_param<S>({channels, channels, 3, 3});
    for (int c = 0; c < channels; ++c) {
      p.w1[((c * channels + c) * 3 + 1) * 3 + 1] = S(1);
      p.w2[((c * channels + c) * 3 + 1) * 3 + 1] = S(1);
    }
    p.b1 = zero_param<S>({channels});
    p.b2 = zero_param<S>({channels});
    return p;
  }
};

// Tape-level handles to the parameter tensors above.
template <typename S>
struct PamVars {
  Var<S> conv_b_w, conv_b_b, conv_c_w, conv_c_b, conv_d_w, conv_d_b, alpha;
};
template <typename S>
struct CamVars {
  Var<S> beta;
};
template <typename S>
struct PostConvVars {
  Var<S> w1, b1, w2, b2;
};

template <typename S>
PamVars<S> lift(Tape<S>& tape, const PamParams<S>& p) {
  return PamVars<S>{tape.leaf(p.conv_b_w), tape.leaf(p.conv_b_b),
                    tape.leaf(p.conv_c_w), tape.leaf(p.conv_c_b),
                    tape.leaf(p.conv_d_w), tape.leaf(p.conv_d_b),
                    tape.leaf(p.alpha)};
}

template <typename S>
CamVars<S> lift(Tape<S>& tape, const CamParams<S>& p) {
  return CamVars<S>{tape.leaf(p.beta)};
}

template <typename S>
PostConvVars<S> lift(Tape<S>& tape, const PostConvParams<S>& p) {
  return PostConvVars<S>{tape.leaf(p.w1), tape.leaf(p.b1), tape.leaf(p.w2),
                         tape.leaf(p.b2)};
}

namespace detail {

template <typename S>
Var<S> attention_softmax(Var<S> raw, SoftmaxAxis axis) {
  if (axis == SoftmaxAxis::columns) return softmax_cols(raw);
  return transpose(softmax_cols(transpose(raw)));
}

}  // namespace detail

/// Position attention map P (N x N, N = H*W). Columns sum to 1 under the
/// default axis. raw = Cf^T * B where B and Cf are the compressed C/r x N
/// projections of the input.
template <typename S>
Var<S> pam_attention_map(Var<S> a, const PamVars<S>& p,
                         SoftmaxAxis axis = SoftmaxAxis::columns) {
  const Tensor<S>& av = a.value();
  if (av.rank() != 3) {
    throw ShapeError("pam_attention_map: feature map must be C x H x W, got " +
                     shape_string(av.shape()));
  }
  const int n = av.dim(1) * av.dim(2);
  const int cr = p.conv_b_w.value().dim(0);
  auto b = reshape(conv2d(a, p.conv_b_w, p.conv_b_b, 1, 0), {cr, n});
  auto cf = reshape(conv2d(a, p.conv_c_w, p.conv_c_b, 1, 0), {cr, n});
  auto raw = matmul(transpose(cf), b);
  return detail::attention_softmax(raw, axis);
}

/// Refined map alpha * (D * P) + A. With alpha = 0 this is exactly the input.
template <typename S>
Var<S> pam_forward(Var<S> a, const PamVars<S>& p,
                   SoftmaxAxis axis = SoftmaxAxis::columns) {
  const Tensor<S>& av = a.value();
  const int c = av.dim(0), h = av.dim(1), w = av.dim(2);
  const int n = h * w;
  auto attention = pam_attention_map(a, p, axis);
  auto d = reshape(conv2d(a, p.conv_d_w, p.conv_d_b, 1, 0), {c, n});
  auto refined = scale(matmul(d, attention), p.alpha);
  return add(reshape(refined, {c, h, w}), a);
}

/// Channel attention map Q (C x C) from the gram products of the reshaped
/// input. No learned parameters.
template <typename S>
Var<S> cam_attention_map(Var<S> a,
                         SoftmaxAxis axis = SoftmaxAxis::columns) {
  const Tensor<S>& av = a.value();
  if (av.rank() != 3) {
    throw ShapeError("cam_attention_map: feature map must be C x H x W, got " +
                     shape_string(av.shape()));
  }
  const int c = av.dim(0), n = av.dim(1) * av.dim(2);
  auto ar = reshape(a, {c, n});
  auto raw = matmul(ar, transpose(ar));
  return detail::attention_softmax(raw, axis);
}

/// Refined map beta * (Q * A) + A. With beta = 0 this is exactly the input.
template <typename S>
Var<S> cam_forward(Var<S> a, const CamVars<S>& p,
                   SoftmaxAxis axis = SoftmaxAxis::columns) {
  const Tensor<S>& av = a.value();
  const int c = av.dim(0), h = av.dim(1), w = av.dim(2);
  auto attention = cam_attention_map(a, axis);
  auto ar = reshape(a, {c, h * w});
  auto refined = scale(matmul(attention, ar), p.beta);
  return add(reshape(refined, {c, h, w}), a);
}

template <typename S>
Var<S> post_conv(Var<S> x, const PostConvVars<S>& p) {
  return conv2d(relu(conv2d(x, p.w1, p.b1, 1, 1)), p.w2, p.b2, 1, 1);
}

/// Parallel fusion: element-wise sum of the two refined-and-convolved
/// branches, post_p(PAM(a)) + post_q(CAM(a)).
template <typename S>
Var<S> fuse_parallel(Var<S> a, const PamVars<S>& pam,
                     const PostConvVars<S>& post_p, const CamVars<S>& cam,
                     const PostConvVars<S>& post_q,
                     SoftmaxAxis axis = SoftmaxAxis::columns) {
  auto mp = post_conv(pam_forward(a, pam, axis), post_p);
  auto mq = post_conv(cam_forward(a, cam, axis), post_q);
  return add(mp, mq);
}

/// Sequential fusion: CAM first, then PAM.
template <typename S>
Var<S> fuse_sequential(Var<S> a, const CamVars<S>& cam, const PamVars<S>& pam,
                       SoftmaxAxis axis = SoftmaxAxis::columns) {
  return pam_forward(cam_forward(a, cam, axis), pam, axis);
}

/// Hierarchical attention over three backbone taps with spatial dims in
/// exact 4:2:1 ratio. Taps 3 and 4 go through parallel PAM+CAM fusion and
/// are max-pooled down to the tap-5 grid; tap 5 gets CAM only; channels are
/// concatenated.
template <typename S>
struct HierarchicalParams {
  PamParams<S> pam3, pam4;
  CamParams<S> cam3, cam4, cam5;
  PostConvParams<S> post3_p, post3_q, post4_p, post4_q;

  static HierarchicalParams init(int c3, int c4, int c5, int reduction,
                                 Rng& rng) {
    HierarchicalParams h;
    h.pam3 = PamParams<S>::init(c3, reduction, rng);
    h.cam3 = CamParams<S>::init();
    h.post3_p = PostConvParams<S>::init(c3, rng);
    h.post3_q = PostConvParams<S>::init(c3, rng);
    h.pam4 = PamParams<S>::init(c4, reduction, rng);
    h.cam4 = CamParams<S>::init();
    h.post4_p = PostConvParams<S>::init(c4, rng);
    h.post4_q = PostConvParams<S>::init(c4, rng);
    h.cam5 = CamParams<S>::init();
    (void)c5;
    return h;
  }
};

template <typename S>
struct HierarchicalVars {
  PamVars<S> pam3, pam4;
  CamVars<S> cam3, cam4, cam5;
  PostConvVars<S> post3_p, post3_q, post4_p, post4_q;
};

template <typename S>
HierarchicalVars<S> lift(Tape<S>& tape, const HierarchicalParams<S>& h) {
  return HierarchicalVars<S>{lift(tape, h.pam3),   lift(tape, h.pam4),
                             lift(tape, h.cam3),   lift(tape, h.cam4),
                             lift(tape, h.cam5),   lift(tape, h.post3_p),
                             lift(tape, h.post3_q), lift(tape, h.post4_p),
                             lift(tape, h.post4_q)};
}

template <typename S>
Var<S> fuse_hierarchical(Var<S> tap3, Var<S> tap4, Var<S> tap5,
                         const HierarchicalVars<S>& h,
                         SoftmaxAxis axis = SoftmaxAxis::columns) {
  const Tensor<S>& t3 = tap3.value();
  const Tensor<S>& t4 = tap4.value();
  const Tensor<S>& t5 = tap5.value();
  const int s_h = t5.dim(1), s_w = t5.dim(2);
  if (t3.dim(1) != 4 * s_h || t3.dim(2) != 4 * s_w || t4.dim(1) != 2 * s_h ||
      t4.dim(2) != 2 * s_w) {
    throw ShapeError("fuse_hierarchical: taps must have 4:2:1 spatial ratio, "
                     "got " + shape_string(t3.shape()) + ", " +
                     shape_string(t4.shape()) + ", " + shape_string(t5.shape()));
  }
  auto p3 = maxpool2d(
      fuse_parallel(tap3, h.pam3, h.post3_p, h.cam3, h.post3_q, axis), 4, 4);
  auto p4 = maxpool2d(
      fuse_parallel(tap4, h.pam4, h.post4_p, h.cam4, h.post4_q, axis), 2, 2);
  auto p5 = cam_forward(tap5, h.cam5, axis);
  return concat_channels<S>({p3, p4, p5});
}

}  // namespace agpad
