#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "agpad/attention.hpp"
#include "agpad/ops.hpp"
#include "agpad/tensor_io.hpp"

namespace agpad {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Five conv stages (conv3x3 + ReLU + conv3x3 + ReLU + maxpool2), taps after
/// stages 3, 4 and 5 at 1/8, 1/16 and 1/32 of the input resolution, so the
/// spatial ratio between taps is 4:2:1. 224 input reproduces the 28/14/7
/// tap grid; the desk-scale default is 64.
struct BackboneConfig {
  std::vector<int> channels{8, 16, 32, 32, 32};
  int input_size = 64;
  int in_channels = 1;
};

struct ModelConfig {
  BackboneConfig backbone;
  FusionMode fusion = FusionMode::parallel;
  int reduction = 8;
  SoftmaxAxis softmax_axis = SoftmaxAxis::columns;
};

inline void validate(const ModelConfig& cfg) {
  const auto& b = cfg.backbone;
  if (b.channels.size() != 5) {
    throw ConfigError("backbone needs exactly 5 stage channel counts, got " +
                      std::to_string(b.channels.size()));
  }
  for (int c : b.channels) {
    if (c <= 0) throw ConfigError("backbone channel counts must be positive");
  }
  if (b.in_channels <= 0) throw ConfigError("in_channels must be positive");
  if (b.input_size < 32 || b.input_size % 32 != 0) {
    throw ConfigError("input size must be a positive multiple of 32, got " +
                      std::to_string(b.input_size));
  }
  if (cfg.reduction <= 0) throw ConfigError("reduction ratio must be positive");
  auto needs_divisor = [&](int c) {
    if (c % cfg.reduction != 0) {
      throw ConfigError("reduction ratio " + std::to_string(cfg.reduction) +
                        " must divide attention channel count " +
                        std::to_string(c));
    }
  };
  switch (cfg.fusion) {
    case FusionMode::pam_only:
    case FusionMode::parallel:
    case FusionMode::sequential:
      needs_divisor(b.channels[4]);
      break;
    case FusionMode::hierarchical:
      needs_divisor(b.channels[2]);
      needs_divisor(b.channels[3]);
      break;
    default:
      break;
  }
}

/// Spatial side of the tap after stage `stage` (3, 4 or 5).
inline int tap_spatial(const BackboneConfig& b, int stage) {
  return b.input_size >> stage;
}

inline Shape tap_shape(const BackboneConfig& b, int stage) {
  return {b.channels[static_cast<std::size_t>(stage - 1)],
          tap_spatial(b, stage), tap_spatial(b, stage)};
}

/// Channel count of the map the classifier head sees.
inline int fused_channels(const ModelConfig& cfg) {
  const auto& c = cfg.backbone.channels;
  if (cfg.fusion == FusionMode::hierarchical) return c[2] + c[3] + c[4];
  return c[4];
}

/// Trainable two-class PAD network: backbone taps, attention assembly per
/// FusionMode, global average pooling and a linear head. Class 0 is live,
/// class 1 is PA.
///
/// Every trainable tensor lives exactly once in a named registry whose order
/// is fixed by construction. Each parameter group draws its init from a
/// stream seeded by (root seed, group name), so e.g. backbone weights are
/// identical across ablation variants built from the same seed. Conv weights
/// are He-initialized; attention scalars and the final FC start at zero, so
/// an untrained model scores exactly 0.5.
template <typename S>
class ModelGraph {
 public:
  struct Forward {
    Var<S> logits;
    Var<S> tap3, tap4, tap5;
    Var<S> attn;  // post-attention map fed to GAP
    std::vector<int> param_ids;  // tape leaf per registry slot
  };

  ModelGraph(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    validate(cfg_);
    build_params();
  }

  const ModelConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t param_count() const { return params_.size(); }

  std::int64_t total_weights() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : params_) n += t.size();
    return n;
  }

  const std::vector<std::pair<std::string, Tensor<S>>>& params() const {
    return params_;
  }
  std::vector<std::pair<std::string, Tensor<S>>>& params() { return params_; }

  Tensor<S>& param(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return params_[it->second].second;
  }

  /// Build the taped forward graph for one image. with_grad=false skips
  /// gradient bookkeeping for pure inference.
  Forward forward(Tape<S>& tape, const Tensor<S>& image,
                  bool with_grad = true) const {
    check_input(image);
    Forward f;
    f.param_ids.reserve(params_.size());
    std::vector<Var<S>> vars;
    vars.reserve(params_.size());
    for (const auto& [name, t] : params_) {
      Var<S> v = tape.leaf(t, with_grad && t.requires_grad);
      f.param_ids.push_back(v.id);
      vars.push_back(v);
    }
    auto at = [&](int idx) { return vars[static_cast<std::size_t>(idx)]; };

    Tensor<S> input = image;
    input.requires_grad = false;
    Var<S> x = tape.leaf(std::move(input));
    for (int k = 0; k < 5; ++k) {
      x = relu(conv2d(x, at(stages_[k].c1w), at(stages_[k].c1b), 1, 1));
      x = relu(conv2d(x, at(stages_[k].c2w), at(stages_[k].c2b), 1, 1));
      x = maxpool2d(x, 2, 2);
      if (k == 2) f.tap3 = x;
      if (k == 3) f.tap4 = x;
      if (k == 4) f.tap5 = x;
    }

    const SoftmaxAxis axis = cfg_.softmax_axis;
    switch (cfg_.fusion) {
      case FusionMode::none:
        f.attn = f.tap5;
        break;
      case FusionMode::pam_only:
        f.attn = pam_forward(f.tap5, pam_vars(at, pam_), axis);
        break;
      case FusionMode::cam_only:
        f.attn = cam_forward(f.tap5, CamVars<S>{at(cam_beta_)}, axis);
        break;
      case FusionMode::parallel:
        f.attn = fuse_parallel(f.tap5, pam_vars(at, pam_),
                               post_vars(at, post_p_),
                               CamVars<S>{at(cam_beta_)},
                               post_vars(at, post_q_), axis);
        break;
      case FusionMode::sequential:
        f.attn = fuse_sequential(f.tap5, CamVars<S>{at(cam_beta_)},
                                 pam_vars(at, pam_), axis);
        break;
      case FusionMode::hierarchical: {
        HierarchicalVars<S> hv{
            pam_vars(at, h_pam3_),  pam_vars(at, h_pam4_),
            CamVars<S>{at(h_cam3_)}, CamVars<S>{at(h_cam4_)},
            CamVars<S>{at(h_cam5_)}, post_vars(at, h_post3_p_),
            post_vars(at, h_post3_q_), post_vars(at, h_post4_p_),
            post_vars(at, h_post4_q_)};
        f.attn = fuse_hierarchical(f.tap3, f.tap4, f.tap5, hv, axis);
        break;
      }
    }

    f.logits = dense(global_avg_pool(f.attn), at(fc_w_), at(fc_b_));
    return f;
  }

  Tensor<S> logits(const Tensor<S>& image) const {
    Tape<S> tape;
    return forward(tape, image, /*with_grad=*/false).logits.value();
  }

  /// softmax(logits)[PA]; in (0, 1) for finite logits.
  S pa_score(const Tensor<S>& image) const {
    Tensor<S> l = logits(image);
    return pa_score_from_logits(l);
  }

  static S pa_score_from_logits(const Tensor<S>& l) {
    const S m = std::max(l[0], l[1]);
    const S e0 = std::exp(l[0] - m), e1 = std::exp(l[1] - m);
    return e1 / (e0 + e1);
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    os.write("AGPD", 4);
    detail::put_u32(os, kCheckpointFormatVersion);
    detail::put_u32(os, static_cast<std::uint32_t>(params_.size()));
    for (const auto& [name, t] : params_) {
      detail::put_u16(os, static_cast<std::uint16_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_tensor(os, t);
    }
    if (!os) throw DataError("write failed: " + path);
  }

  /// Load a checkpoint into this model. Names and shapes must match the
  /// registry exactly.
  void load(const std::string& path) {
    auto entries = read_checkpoint(path);
    if (entries.size() != params_.size()) {
      throw DataError(path + ": checkpoint has " +
                      std::to_string(entries.size()) + " parameters, model has " +
                      std::to_string(params_.size()));
    }
    for (auto& [name, t] : entries) {
      auto it = index_.find(name);
      if (it == index_.end()) {
        throw DataError(path + ": unknown parameter '" + name + "'");
      }
      Tensor<S>& dst = params_[it->second].second;
      if (t.shape() != dst.shape()) {
        throw DataError(path + ": shape mismatch for '" + name + "': " +
                        shape_string(t.shape()) + " vs " +
                        shape_string(dst.shape()));
      }
      bool rg = dst.requires_grad;
      dst = t.template cast<S>();
      dst.requires_grad = rg;
    }
  }

  static std::vector<std::pair<std::string, Tensor<float>>> read_checkpoint(
      const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "AGPD", 4) != 0) {
      throw DataError(path + ": bad AGPD magic");
    }
    std::uint32_t version = detail::get_u32(is, path);
    if (version != kCheckpointFormatVersion) {
      throw DataError(path + ": unsupported AGPD version " +
                      std::to_string(version));
    }
    std::uint32_t count = detail::get_u32(is, path);
    std::vector<std::pair<std::string, Tensor<float>>> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      std::uint16_t len = detail::get_u16(is, path);
      std::string name(len, '\0');
      if (!is.read(name.data(), len)) throw DataError(path + ": truncated name");
      entries.emplace_back(std::move(name), read_tensor(is, path));
    }
    return entries;
  }

 private:
  struct StageIdx {
    int c1w, c1b, c2w, c2b;
  };
  struct PamIdx {
    int bw, bb, cw, cb, dw, db, alpha;
  };
  struct PostIdx {
    int w1, b1, w2, b2;
  };

  template <typename AtFn>
  static PamVars<S> pam_vars(const AtFn& at, const PamIdx& p) {
    return PamVars<S>{at(p.bw), at(p.bb), at(p.cw), at(p.cb),
                      at(p.dw), at(p.db), at(p.alpha)};
  }
  template <typename AtFn>
  static PostConvVars<S> post_vars(const AtFn& at, const PostIdx& p) {
    return PostConvVars<S>{at(p.w1), at(p.b1), at(p.w2), at(p.b2)};
  }

  void check_input(const Tensor<S>& image) const {
    const int s = cfg_.backbone.input_size;
    Shape want{cfg_.backbone.in_channels, s, s};
    if (image.shape() != want) {
      throw ShapeError("model input must be " + shape_string(want) + ", got " +
                       shape_string(image.shape()));
    }
    for (std::int64_t i = 0; i < image.size(); ++i) {
      if (image[i] < S(-1e-6) || image[i] > S(1) + S(1e-6)) {
        throw NumericError("model input pixels must lie in [0, 1]");
      }
    }
  }

  int add_param(const std::string& name, Tensor<S> t) {
    t.requires_grad = true;
    params_.emplace_back(name, std::move(t));
    index_[name] = params_.size() - 1;
    return static_cast<int>(params_.size() - 1);
  }

  Rng group_rng(const std::string& group) const {
    return Rng(derive_seed(seed_, "init", hash_str(group)));
  }

  StageIdx add_stage(int k, int c_in, int c_out) {
    const std::string g = "backbone.stage" + std::to_string(k);
    Rng rng = group_rng(g);
    StageIdx idx;
    idx.c1w = add_param(g + ".conv1.w", he_weight<S>({c_out, c_in, 3, 3}, rng));
    idx.c1b = add_param(g + ".conv1.b", zero_param<S>({c_out}));
    idx.c2w = add_param(g + ".conv2.w", he_weight<S>({c_out, c_out, 3, 3}, rng));
    idx.c2b = add_param(g + ".conv2.b", zero_param<S>({c_out}));
    return idx;
  }

  PamIdx add_pam(const std::string& group, int channels) {
    Rng rng = group_rng(group);
    auto p = PamParams<S>::init(channels, cfg_.reduction, rng);
    PamIdx idx;
    idx.bw = add_param(group + ".conv_b.w", std::move(p.conv_b_w));
    idx.bb = add_param(group + ".conv_b.b", std::move(p.conv_b_b));
    idx.cw = add_param(group + ".conv_c.w", std::move(p.conv_c_w));
    idx.cb = add_param(group + ".conv_c.b", std::move(p.conv_c_b));
    idx.dw = add_param(group + ".conv_d.w", std::move(p.conv_d_w));
    idx.db = add_param(group + ".conv_d.b", std::move(p.conv_d_b));
    idx.alpha = add_param(group + ".alpha", std::move(p.alpha));
    return idx;
  }

  PostIdx add_post(const std::string& group, int channels) {
    Rng rng = group_rng(group);
    auto p = PostConvParams<S>::init(channels, rng);
    PostIdx idx;
    idx.w1 = add_param(group + ".conv1.w", std::move(p.w1));
    idx.b1 = add_param(group + ".conv1.b", std::move(p.b1));
    idx.w2 = add_param(group + ".conv2.w", std::move(p.w2));
    idx.b2 = add_param(group + ".conv2.b", std::move(p.b2));
    return idx;
  }

  void build_params() {
    const auto& c = cfg_.backbone.channels;
    int prev = cfg_.backbone.in_channels;
    for (int k = 0; k < 5; ++k) {
      stages_[k] = add_stage(k + 1, prev, c[static_cast<std::size_t>(k)]);
      prev = c[static_cast<std::size_t>(k)];
    }
    switch (cfg_.fusion) {
      case FusionMode::none:
        break;
      case FusionMode::pam_only:
        pam_ = add_pam("attn.pam", c[4]);
        break;
      case FusionMode::cam_only:
        cam_beta_ = add_param("attn.cam.beta", zero_param<S>({1}));
        break;
      case FusionMode::parallel:
        pam_ = add_pam("attn.pam", c[4]);
        cam_beta_ = add_param("attn.cam.beta", zero_param<S>({1}));
        post_p_ = add_post("attn.pam_post", c[4]);
        post_q_ = add_post("attn.cam_post", c[4]);
        break;
      case FusionMode::sequential:
        cam_beta_ = add_param("attn.cam.beta", zero_param<S>({1}));
        pam_ = add_pam("attn.pam", c[4]);
        break;
      case FusionMode::hierarchical:
        h_pam3_ = add_pam("attn.tap3.pam", c[2]);
        h_cam3_ = add_param("attn.tap3.cam.beta", zero_param<S>({1}));
        h_post3_p_ = add_post("attn.tap3.pam_post", c[2]);
        h_post3_q_ = add_post("attn.tap3.cam_post", c[2]);
        h_pam4_ = add_pam("attn.tap4.pam", c[3]);
        h_cam4_ = add_param("attn.tap4.cam.beta", zero_param<S>({1}));
        h_post4_p_ = add_post("attn.tap4.pam_post", c[3]);
        h_post4_q_ = add_post("attn.tap4.cam_post", c[3]);
        h_cam5_ = add_param("attn.tap5.cam.beta", zero_param<S>({1}));
        break;
    }
    // zero head: an untrained model emits [0, 0] logits, PA score 0.5
    const int head_in = fused_channels(cfg_);
    fc_w_ = add_param("head.fc.w", zero_param<S>({2, head_in}));
    fc_b_ = add_param("head.fc.b", zero_param<S>({2}));
  }

  ModelConfig cfg_;
  std::uint64_t seed_;
  std::vector<std::pair<std::string, Tensor<S>>> params_;
  std::map<std::string, std::size_t> index_;

  StageIdx stages_[5] = {};
  PamIdx pam_ = {};
  int cam_beta_ = -1;
  PostIdx post_p_ = {}, post_q_ = {};
  PamIdx h_pam3_ = {}, h_pam4_ = {};
  int h_cam3_ = -1, h_cam4_ = -1, h_cam5_ = -1;
  PostIdx h_post3_p_ = {}, h_post3_q_ = {}, h_post4_p_ = {}, h_post4_q_ = {};
  int fc_w_ = -1, fc_b_ = -1;
};

/// Same backbone configuration and seed, fusion mode switched, attention and
/// head parameters freshly constructed. Backbone init streams are keyed by
/// group name, so all variants share identical backbone weights.
template <typename S>
ModelGraph<S> ablation_variant(const ModelGraph<S>& base, FusionMode variant) {
  ModelConfig cfg = base.config();
  cfg.fusion = variant;
  return ModelGraph<S>(cfg, base.seed());
}

}  // namespace agpad
