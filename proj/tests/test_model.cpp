#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "agpad/grad_check.hpp"
#include "agpad/model.hpp"

using namespace agpad;

namespace {

template <typename S>
Tensor<S> random_image(int channels, int h, int w, Rng& rng) {
  Tensor<S> t({channels, h, w});
  fill_uniform(t, rng, 0.0, 1.0);
  return t;
}

template <typename S>
bool bitwise_equal(const Tensor<S>& a, const Tensor<S>& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data(), b.data(),
                     static_cast<std::size_t>(a.size()) * sizeof(S)) == 0;
}

ModelConfig desk_config(FusionMode fusion) {
  ModelConfig cfg;
  cfg.backbone.channels = {2, 3, 4, 4, 4};
  cfg.backbone.input_size = 32;
  cfg.backbone.in_channels = 1;
  cfg.fusion = fusion;
  cfg.reduction = 2;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("zero image with the zero-init head gives logits [0,0], score 0.5") {
  ModelGraph<float> model(desk_config(FusionMode::parallel), 1);
  Tensor<float> zero({1, 32, 32});
  auto l = model.logits(zero);
  CHECK(l[0] == 0.0f);
  CHECK(l[1] == 0.0f);
  CHECK(model.pa_score(zero) == 0.5f);
}

TEST_CASE("pa_score is the softmax of the forward logits") {
  CHECK(ModelGraph<float>::pa_score_from_logits(Tensor<float>({2})) == 0.5f);
  CHECK(ModelGraph<float>::pa_score_from_logits(
            Tensor<float>({2}, {-20.0f, 20.0f})) ==
        doctest::Approx(1.0f).epsilon(1e-6));
  CHECK(ModelGraph<float>::pa_score_from_logits(
            Tensor<float>({2}, {50.0f, -50.0f})) ==
        doctest::Approx(0.0f).epsilon(1e-6));

  Rng rng(3);
  ModelGraph<float> model(desk_config(FusionMode::sequential), 2);
  // give the head nonzero weights so scores move off 0.5
  fill_normal(model.param("head.fc.w"), rng, 0.0, 0.5);
  Tensor<float> img = random_image<float>(1, 32, 32, rng);
  Tensor<float> l = model.logits(img);
  float score = model.pa_score(img);
  CHECK(score == doctest::Approx(ModelGraph<float>::pa_score_from_logits(l))
                     .epsilon(1e-7));
  CHECK(score > 0.0f);
  CHECK(score < 1.0f);
}

TEST_CASE("attention-off modes agree with fusion none") {
  Rng rng(4);
  Tensor<float> img = random_image<float>(1, 32, 32, rng);

  ModelGraph<float> none(desk_config(FusionMode::none), 7);
  ModelGraph<float> parallel(desk_config(FusionMode::parallel), 7);
  ModelGraph<float> sequential(desk_config(FusionMode::sequential), 7);

  // default init: attention scalars zero, head zero -> every variant at 0.5
  CHECK(none.pa_score(img) == 0.5f);
  CHECK(parallel.pa_score(img) == 0.5f);
  CHECK(std::abs(none.pa_score(img) - parallel.pa_score(img)) < 1e-5f);

  // with a shared random head, sequential with alpha=beta=0 is exactly the
  // attention-free network
  Tensor<float> w({2, 4});
  fill_normal(w, rng, 0.0, 0.7);
  none.param("head.fc.w") = w;
  none.param("head.fc.w").requires_grad = true;
  sequential.param("head.fc.w") = w;
  sequential.param("head.fc.w").requires_grad = true;
  CHECK(std::abs(none.pa_score(img) - sequential.pa_score(img)) < 1e-5f);
  CHECK(none.pa_score(img) != 0.5f);
}

TEST_CASE("forward is deterministic and reproducible across constructions") {
  Rng rng(5);
  Tensor<float> img = random_image<float>(1, 32, 32, rng);
  ModelGraph<float> m1(desk_config(FusionMode::parallel), 11);
  ModelGraph<float> m2(desk_config(FusionMode::parallel), 11);

  REQUIRE(m1.param_count() == m2.param_count());
  for (std::size_t i = 0; i < m1.param_count(); ++i) {
    CHECK(m1.params()[i].first == m2.params()[i].first);
    CHECK(bitwise_equal(m1.params()[i].second, m2.params()[i].second));
  }
  CHECK(bitwise_equal(m1.logits(img), m2.logits(img)));
  CHECK(bitwise_equal(m1.logits(img), m1.logits(img)));
}

TEST_CASE("registry size is a pure function of the configuration") {
  for (FusionMode mode :
       {FusionMode::none, FusionMode::pam_only, FusionMode::cam_only,
        FusionMode::parallel, FusionMode::sequential,
        FusionMode::hierarchical}) {
    ModelGraph<float> a(desk_config(mode), 1);
    ModelGraph<float> b(desk_config(mode), 999);
    CHECK(a.param_count() == b.param_count());
    CHECK(a.total_weights() == b.total_weights());
  }
}

TEST_CASE("ablation variants expose the right parameter sets") {
  ModelGraph<float> base(desk_config(FusionMode::parallel), 21);
  auto has_param = [](const ModelGraph<float>& m, const std::string& name) {
    for (const auto& [n, t] : m.params()) {
      if (n == name) return true;
    }
    return false;
  };

  auto none = ablation_variant(base, FusionMode::none);
  CHECK(!has_param(none, "attn.pam.alpha"));
  CHECK(!has_param(none, "attn.cam.beta"));

  auto pam = ablation_variant(base, FusionMode::pam_only);
  CHECK(has_param(pam, "attn.pam.alpha"));
  CHECK(!has_param(pam, "attn.cam.beta"));

  auto cam = ablation_variant(base, FusionMode::cam_only);
  CHECK(has_param(cam, "attn.cam.beta"));
  CHECK(!has_param(cam, "attn.pam.alpha"));

  // backbone weights are shared across variants built from one seed
  CHECK(bitwise_equal(none.param("backbone.stage1.conv1.w"),
                      base.param("backbone.stage1.conv1.w")));
  CHECK(bitwise_equal(pam.param("backbone.stage5.conv2.w"),
                      base.param("backbone.stage5.conv2.w")));

  // all six variants run a forward/backward pass
  Rng rng(6);
  Tensor<float> img = random_image<float>(1, 32, 32, rng);
  for (FusionMode mode :
       {FusionMode::none, FusionMode::pam_only, FusionMode::cam_only,
        FusionMode::parallel, FusionMode::sequential,
        FusionMode::hierarchical}) {
    auto variant = ablation_variant(base, mode);
    Tape<float> tape;
    auto f = variant.forward(tape, img);
    auto loss = softmax_cross_entropy(f.logits, 1);
    tape.backward(loss);
    CHECK(tape.grad(f.param_ids.back()).all_finite());
  }
}

TEST_CASE("model rejects wrong input sizes and out-of-range pixels") {
  ModelGraph<float> model(desk_config(FusionMode::none), 1);
  CHECK_THROWS_AS(model.logits(Tensor<float>({1, 16, 16})), ShapeError);
  Tensor<float> bad({1, 32, 32});
  bad[5] = 3.0f;
  CHECK_THROWS_AS(model.logits(bad), NumericError);
}

TEST_CASE("config validation catches bad stage lists and reductions") {
  ModelConfig cfg = desk_config(FusionMode::parallel);
  cfg.backbone.channels = {2, 3, 4};
  CHECK_THROWS_AS(ModelGraph<float>(cfg, 1), ConfigError);

  cfg = desk_config(FusionMode::parallel);
  cfg.backbone.input_size = 48;
  CHECK_THROWS_AS(ModelGraph<float>(cfg, 1), ConfigError);

  cfg = desk_config(FusionMode::parallel);
  cfg.reduction = 3;  // does not divide c5 = 4
  CHECK_THROWS_AS(ModelGraph<float>(cfg, 1), ConfigError);
}

TEST_CASE("paper-scale tap shapes and hierarchical concat width") {
  BackboneConfig paper;
  paper.channels = {64, 128, 512, 1024, 1024};
  paper.input_size = 224;
  paper.in_channels = 3;
  CHECK(tap_shape(paper, 3) == Shape{512, 28, 28});
  CHECK(tap_shape(paper, 4) == Shape{1024, 14, 14});
  CHECK(tap_shape(paper, 5) == Shape{1024, 7, 7});

  ModelConfig cfg;
  cfg.backbone = paper;
  cfg.fusion = FusionMode::hierarchical;
  cfg.reduction = 8;
  CHECK(fused_channels(cfg) == 2560);
}

TEST_CASE("checkpoint save/load round trip is bitwise") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "agpad_model_test";
  fs::create_directories(dir);
  const std::string ckpt = (dir / "model.agpd").string();
  const std::string ckpt2 = (dir / "model2.agpd").string();

  Rng rng(8);
  ModelGraph<float> model(desk_config(FusionMode::parallel), 31);
  fill_normal(model.param("head.fc.w"), rng, 0.0, 0.3);
  model.save(ckpt);

  ModelGraph<float> loaded(desk_config(FusionMode::parallel), 99);
  loaded.load(ckpt);
  for (std::size_t i = 0; i < model.param_count(); ++i) {
    CHECK(bitwise_equal(model.params()[i].second, loaded.params()[i].second));
  }
  loaded.save(ckpt2);
  CHECK(read_file(ckpt) == read_file(ckpt2));

  // a mismatched architecture must refuse the checkpoint
  ModelGraph<float> other(desk_config(FusionMode::none), 1);
  CHECK_THROWS_AS(other.load(ckpt), DataError);

  fs::remove_all(dir);
}

TEST_CASE("forward gradients pass the finite-difference check at desk scale") {
  for (FusionMode mode :
       {FusionMode::none, FusionMode::pam_only, FusionMode::cam_only,
        FusionMode::parallel, FusionMode::sequential,
        FusionMode::hierarchical}) {
    CAPTURE(to_string(mode));
    ModelGraph<double> model(desk_config(mode), 41);
    Rng rng(9);
    // Probe at a generic point: biases, attention scalars and head move off
    // zero. Zero-init biases put ReLU pre-activations exactly on the kink,
    // where central differences are invalid (f must be differentiable at the
    // probe point).
    for (auto& [name, t] : model.params()) {
      if (name.ends_with(".b") || name.find("alpha") != std::string::npos ||
          name.find("beta") != std::string::npos) {
        fill_uniform(t, rng, -0.25, 0.25);
      }
      if (name.find("head.fc") != std::string::npos) {
        fill_normal(t, rng, 0.0, 0.4);
      }
      t.requires_grad = true;
    }
    Tensor<double> img = random_image<double>(1, 32, 32, rng);

    // analytic gradients for every registered parameter
    std::vector<Tensor<double>> analytic;
    {
      Tape<double> tape;
      auto f = model.forward(tape, img);
      auto loss = softmax_cross_entropy(f.logits, 1);
      tape.backward(loss);
      for (int id : f.param_ids) analytic.push_back(tape.grad(id));
    }

    auto loss_value = [&]() {
      Tape<double> tape;
      auto f = model.forward(tape, img, /*with_grad=*/false);
      return softmax_cross_entropy(f.logits, 1).value()[0];
    };

    // central differences on a few seeded coordinates per parameter
    const double eps = 1e-6;
    Rng probe(77);
    double worst = 0.0;
    for (std::size_t pi = 0; pi < model.param_count(); ++pi) {
      Tensor<double>& p = model.params()[pi].second;
      for (int probe_i = 0; probe_i < 3; ++probe_i) {
        const std::int64_t ci = static_cast<std::int64_t>(
            probe.u64() % static_cast<std::uint64_t>(p.size()));
        const double saved = p[ci];
        p[ci] = saved + eps;
        const double fp = loss_value();
        p[ci] = saved - eps;
        const double fm = loss_value();
        p[ci] = saved;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = analytic[pi][ci];
        worst = std::max(worst, std::abs(a - numeric) /
                                    std::max({1.0, std::abs(a),
                                              std::abs(numeric)}));
      }
    }
    CHECK(worst < 1e-4);
  }
}
