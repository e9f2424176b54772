#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "agpad/attention.hpp"
#include "agpad/grad_check.hpp"

using namespace agpad;

namespace {

template <typename S>
Tensor<S> random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
  Tensor<S> t(std::move(shape));
  fill_uniform(t, rng, lo, hi);
  return t;
}

template <typename S>
bool bitwise_equal(const Tensor<S>& a, const Tensor<S>& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data(), b.data(),
                     static_cast<std::size_t>(a.size()) * sizeof(S)) == 0;
}

template <typename S>
double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(double(a[i]) - double(b[i])));
  }
  return worst;
}

// Apply a permutation of the flattened spatial positions.
template <typename S>
Tensor<S> permute_spatial(const Tensor<S>& a, const std::vector<int>& perm) {
  const int c = a.dim(0), n = a.dim(1) * a.dim(2);
  Tensor<S> out(a.shape());
  for (int ci = 0; ci < c; ++ci) {
    for (int j = 0; j < n; ++j) {
      out[ci * n + perm[static_cast<std::size_t>(j)]] = a[ci * n + j];
    }
  }
  return out;
}

template <typename S>
Tensor<S> permute_channels(const Tensor<S>& a, const std::vector<int>& perm) {
  const int c = a.dim(0), n = a.dim(1) * a.dim(2);
  Tensor<S> out(a.shape());
  for (int ci = 0; ci < c; ++ci) {
    for (int j = 0; j < n; ++j) {
      out[perm[static_cast<std::size_t>(ci)] * n + j] = a[ci * n + j];
    }
  }
  return out;
}

std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(rng.uniform_int(0, i))]);
  }
  return perm;
}

template <typename S>
void check_columns_sum_to_one(const Tensor<S>& m) {
  const int rows = m.dim(0), cols = m.dim(1);
  for (int j = 0; j < cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < rows; ++i) s += m(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

// All-ones 1x1 conv parameters so projections reduce to channel sums.
template <typename S>
PamParams<S> unit_pam(int channels, double alpha) {
  PamParams<S> p;
  p.conv_b_w = Tensor<S>::full({channels, channels, 1, 1}, S(1));
  p.conv_b_b = Tensor<S>::zeros({channels});
  p.conv_c_w = Tensor<S>::full({channels, channels, 1, 1}, S(1));
  p.conv_c_b = Tensor<S>::zeros({channels});
  p.conv_d_w = Tensor<S>::full({channels, channels, 1, 1}, S(1));
  p.conv_d_b = Tensor<S>::zeros({channels});
  p.alpha = Tensor<S>::scalar(S(alpha));
  p.reduction = 1;
  return p;
}

}  // namespace

TEST_CASE("pam attention map: uniform and single-position cases") {
  Rng rng(1);

  SUBCASE("all-zero input gives the uniform map") {
    Tape<double> tape;
    auto a = tape.leaf(Tensor<double>::zeros({4, 2, 3}));
    auto pam = PamParams<double>::init(4, 2, rng);
    auto p = pam_attention_map(a, lift(tape, pam));
    CHECK(p.value().shape() == Shape{6, 6});
    for (std::int64_t i = 0; i < p.value().size(); ++i) {
      CHECK(p.value()[i] == doctest::Approx(1.0 / 6.0).epsilon(1e-9));
    }
  }

  SUBCASE("N = 1 collapses to [[1]]") {
    Tape<double> tape;
    auto a = tape.leaf(random_tensor<double>({4, 1, 1}, rng));
    auto pam = PamParams<double>::init(4, 2, rng);
    auto p = pam_attention_map(a, lift(tape, pam));
    CHECK(p.value().shape() == Shape{1, 1});
    CHECK(p.value()[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("pam attention map matches the hand-evaluated C=1 N=2 case") {
  const double x1 = 0.7, x2 = -0.3;
  Tape<double> tape;
  auto a = tape.leaf(Tensor<double>({1, 1, 2}, {x1, x2}));
  auto pam = unit_pam<double>(1, 1.0);
  auto pv = lift(tape, pam);
  auto p = pam_attention_map(a, pv);

  // raw = [[x1*x1, x1*x2], [x1*x2, x2*x2]], column softmax
  const double e00 = std::exp(x1 * x1), e10 = std::exp(x1 * x2);
  const double e01 = std::exp(x1 * x2), e11 = std::exp(x2 * x2);
  CHECK(p.value()(0, 0) == doctest::Approx(e00 / (e00 + e10)).epsilon(1e-12));
  CHECK(p.value()(1, 0) == doctest::Approx(e10 / (e00 + e10)).epsilon(1e-12));
  CHECK(p.value()(0, 1) == doctest::Approx(e01 / (e01 + e11)).epsilon(1e-12));
  CHECK(p.value()(1, 1) == doctest::Approx(e11 / (e01 + e11)).epsilon(1e-12));

  // out_j = sum_k a_k P_kj + a_j with alpha = 1 and unit conv_d
  auto out = pam_forward(a, pv);
  const double p00 = e00 / (e00 + e10), p10 = e10 / (e00 + e10);
  const double p01 = e01 / (e01 + e11), p11 = e11 / (e01 + e11);
  CHECK(out.value()[0] ==
        doctest::Approx(x1 * p00 + x2 * p10 + x1).epsilon(1e-12));
  CHECK(out.value()[1] ==
        doctest::Approx(x1 * p01 + x2 * p11 + x2).epsilon(1e-12));
}

TEST_CASE("pam_forward with alpha = 0 is a bitwise identity") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Tape<float> tape;
    Tensor<float> av = random_tensor<float>({8, 3, 3}, rng);
    auto a = tape.leaf(av);
    auto pam = PamParams<float>::init(8, 4, rng);  // alpha starts at zero
    auto out = pam_forward(a, lift(tape, pam));
    CHECK(bitwise_equal(out.value(), av));
  }
}

TEST_CASE("pam_forward on all-zero input stays zero") {
  Rng rng(3);
  Tape<double> tape;
  auto a = tape.leaf(Tensor<double>::zeros({4, 2, 2}));
  auto pam = PamParams<double>::init(4, 2, rng);
  pam.alpha = Tensor<double>::scalar(0.8);
  auto out = pam_forward(a, lift(tape, pam));
  for (std::int64_t i = 0; i < out.value().size(); ++i) {
    CHECK(out.value()[i] == 0.0);
  }
}

TEST_CASE("cam attention map: uniform, single-channel and hand case") {
  SUBCASE("all-zero input gives uniform 1/C") {
    Tape<double> tape;
    auto a = tape.leaf(Tensor<double>::zeros({3, 2, 2}));
    auto q = cam_attention_map(a);
    CHECK(q.value().shape() == Shape{3, 3});
    for (std::int64_t i = 0; i < q.value().size(); ++i) {
      CHECK(q.value()[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
  }

  SUBCASE("C = 1 collapses to [[1]]") {
    Rng rng(4);
    Tape<double> tape;
    auto a = tape.leaf(random_tensor<double>({1, 3, 3}, rng));
    auto q = cam_attention_map(a);
    CHECK(q.value().shape() == Shape{1, 1});
    CHECK(q.value()[0] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("C=2, N=1, a=[1,0]") {
    Tape<double> tape;
    auto a = tape.leaf(Tensor<double>({2, 1, 1}, {1.0, 0.0}));
    auto q = cam_attention_map(a);
    const double e = std::exp(1.0);
    CHECK(q.value()(0, 0) == doctest::Approx(e / (e + 1.0)).epsilon(1e-6));
    CHECK(q.value()(1, 0) == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-6));
    CHECK(q.value()(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(q.value()(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
    // the quoted four-digit values
    CHECK(q.value()(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(q.value()(1, 0) == doctest::Approx(0.2689).epsilon(1e-4));

    auto cam = CamParams<double>::init();
    cam.beta = Tensor<double>::scalar(1.0);
    auto out = cam_forward(a, lift(tape, cam));
    CHECK(out.value()[0] == doctest::Approx(1.7311).epsilon(1e-4));
    CHECK(out.value()[1] == doctest::Approx(0.2689).epsilon(1e-4));
  }
}

TEST_CASE("cam_forward with beta = 0 is a bitwise identity") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tape<float> tape;
    Tensor<float> av = random_tensor<float>({6, 3, 2}, rng);
    auto a = tape.leaf(av);
    auto cam = CamParams<float>::init();
    auto out = cam_forward(a, lift(tape, cam));
    CHECK(bitwise_equal(out.value(), av));
  }
}

TEST_CASE("attention maps are column-stochastic; rows under the flipped axis") {
  Rng rng(6);
  Tape<double> tape;
  auto a = tape.leaf(random_tensor<double>({8, 3, 3}, rng, -2.0, 2.0));
  auto pam = PamParams<double>::init(8, 4, rng);
  auto pv = lift(tape, pam);

  check_columns_sum_to_one(pam_attention_map(a, pv).value());
  check_columns_sum_to_one(cam_attention_map(a).value());

  auto p_rows = pam_attention_map(a, pv, SoftmaxAxis::rows).value();
  auto q_rows = cam_attention_map(a, SoftmaxAxis::rows).value();
  for (int i = 0; i < p_rows.dim(0); ++i) {
    double s = 0.0;
    for (int j = 0; j < p_rows.dim(1); ++j) s += p_rows(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  for (int i = 0; i < q_rows.dim(0); ++i) {
    double s = 0.0;
    for (int j = 0; j < q_rows.dim(1); ++j) s += q_rows(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("pam is spatially permutation-equivariant") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Tape<double> tape;
    Tensor<double> av = random_tensor<double>({4, 3, 3}, rng);
    auto pam = PamParams<double>::init(4, 2, rng);
    pam.alpha = Tensor<double>::scalar(rng.uniform(0.2, 1.0));
    auto pv = lift(tape, pam);

    auto perm = random_permutation(9, rng);
    auto out_then_perm =
        permute_spatial(pam_forward(tape.leaf(av), pv).value(), perm);
    auto perm_then_out =
        pam_forward(tape.leaf(permute_spatial(av, perm)), pv).value();
    CHECK(max_abs_diff(out_then_perm, perm_then_out) < 1e-5);
  }
}

TEST_CASE("cam is channel permutation-equivariant") {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    Tape<double> tape;
    Tensor<double> av = random_tensor<double>({5, 2, 3}, rng);
    auto cam = CamParams<double>::init();
    cam.beta = Tensor<double>::scalar(rng.uniform(0.2, 1.0));
    auto cv = lift(tape, cam);

    auto perm = random_permutation(5, rng);
    auto out_then_perm =
        permute_channels(cam_forward(tape.leaf(av), cv).value(), perm);
    auto perm_then_out =
        cam_forward(tape.leaf(permute_channels(av, perm)), cv).value();
    CHECK(max_abs_diff(out_then_perm, perm_then_out) < 1e-5);
  }
}

TEST_CASE("attention map is sensitive to input scale") {
  // P is a softmax of dot products, so rescaling the input must change it.
  Rng rng(9);
  Tape<double> tape;
  Tensor<double> av = random_tensor<double>({4, 2, 2}, rng, 0.5, 1.5);
  auto pam = PamParams<double>::init(4, 2, rng);
  auto pv = lift(tape, pam);
  Tensor<double> scaled = av;
  scaled.array() *= 3.0;
  auto p1 = pam_attention_map(tape.leaf(av), pv).value();
  auto p2 = pam_attention_map(tape.leaf(scaled), pv).value();
  CHECK(max_abs_diff(p1, p2) > 1e-4);
}

TEST_CASE("parallel fusion is branch-order invariant and doubles the input "
          "when attention is off") {
  Rng rng(10);

  SUBCASE("swapped summands are bitwise identical") {
    Tape<float> tape;
    auto a = tape.leaf(random_tensor<float>({4, 3, 3}, rng));
    auto pam = PamParams<float>::init(4, 2, rng);
    auto cam = CamParams<float>::init();
    auto pp = PostConvParams<float>::init(4, rng);
    auto pq = PostConvParams<float>::init(4, rng);
    auto pv = lift(tape, pam);
    auto cv = lift(tape, cam);
    auto ppv = lift(tape, pp);
    auto pqv = lift(tape, pq);

    auto mp = post_conv(pam_forward(a, pv), ppv);
    auto mq = post_conv(cam_forward(a, cv), pqv);
    CHECK(bitwise_equal(add(mp, mq).value(), add(mq, mp).value()));
  }

  SUBCASE("alpha = beta = 0 with identity post-convs gives 2a") {
    // identity post-convs hold on non-negative maps (backbone taps are
    // post-ReLU, so this is the regime that matters)
    Tape<float> tape;
    Tensor<float> av = random_tensor<float>({3, 4, 4}, rng, 0.0, 1.0);
    auto a = tape.leaf(av);
    auto pam = PamParams<float>::init(3, 1, rng);
    auto cam = CamParams<float>::init();
    auto ident = PostConvParams<float>::identity(3);
    auto out = fuse_parallel(a, lift(tape, pam), lift(tape, ident),
                             lift(tape, cam), lift(tape, ident));
    Tensor<float> expect = av;
    expect.array() *= 2.0f;
    CHECK(max_abs_diff(out.value(), expect) < 1e-6);
  }

  SUBCASE("random instance equals the composed branches") {
    Tape<double> tape;
    auto a = tape.leaf(random_tensor<double>({4, 3, 3}, rng));
    auto pam = PamParams<double>::init(4, 2, rng);
    pam.alpha = Tensor<double>::scalar(0.6);
    auto cam = CamParams<double>::init();
    cam.beta = Tensor<double>::scalar(-0.4);
    auto pp = PostConvParams<double>::init(4, rng);
    auto pq = PostConvParams<double>::init(4, rng);

    auto fused = fuse_parallel(a, lift(tape, pam), lift(tape, pp),
                               lift(tape, cam), lift(tape, pq));

    auto branch_p = post_conv(pam_forward(a, lift(tape, pam)), lift(tape, pp));
    auto branch_q = post_conv(cam_forward(a, lift(tape, cam)), lift(tape, pq));
    Tensor<double> expect = branch_p.value() + branch_q.value();
    CHECK(max_abs_diff(fused.value(), expect) < 1e-12);
  }
}

TEST_CASE("sequential fusion composes CAM then PAM") {
  Rng rng(11);

  SUBCASE("alpha = beta = 0 is a bitwise identity") {
    Tape<float> tape;
    Tensor<float> av = random_tensor<float>({4, 2, 3}, rng);
    auto a = tape.leaf(av);
    auto pam = PamParams<float>::init(4, 2, rng);
    auto cam = CamParams<float>::init();
    auto out = fuse_sequential(a, lift(tape, cam), lift(tape, pam));
    CHECK(bitwise_equal(out.value(), av));
  }

  SUBCASE("beta = 0 reduces to pam_forward") {
    Tape<double> tape;
    auto a = tape.leaf(random_tensor<double>({4, 2, 2}, rng));
    auto pam = PamParams<double>::init(4, 2, rng);
    pam.alpha = Tensor<double>::scalar(0.9);
    auto cam = CamParams<double>::init();
    auto seq = fuse_sequential(a, lift(tape, cam), lift(tape, pam));
    auto direct = pam_forward(a, lift(tape, pam));
    CHECK(max_abs_diff(seq.value(), direct.value()) < 1e-12);
  }

  SUBCASE("random instance equals pam(cam(a))") {
    Tape<double> tape;
    auto a = tape.leaf(random_tensor<double>({4, 2, 2}, rng));
    auto pam = PamParams<double>::init(4, 2, rng);
    pam.alpha = Tensor<double>::scalar(0.5);
    auto cam = CamParams<double>::init();
    cam.beta = Tensor<double>::scalar(0.7);
    auto seq = fuse_sequential(a, lift(tape, cam), lift(tape, pam));
    auto composed = pam_forward(cam_forward(a, lift(tape, cam)),
                                lift(tape, pam));
    CHECK(max_abs_diff(seq.value(), composed.value()) < 1e-12);
  }
}

TEST_CASE("hierarchical fusion shapes and attention-off reduction") {
  Rng rng(12);

  SUBCASE("attention off reduces to pooled concatenation") {
    Tape<float> tape;
    Tensor<float> t3v = random_tensor<float>({3, 8, 8}, rng, 0.0, 1.0);
    Tensor<float> t4v = random_tensor<float>({4, 4, 4}, rng, 0.0, 1.0);
    Tensor<float> t5v = random_tensor<float>({5, 2, 2}, rng, 0.0, 1.0);
    auto t3 = tape.leaf(t3v), t4 = tape.leaf(t4v), t5 = tape.leaf(t5v);

    HierarchicalParams<float> h;
    h.pam3 = PamParams<float>::init(3, 1, rng);
    h.cam3 = CamParams<float>::init();
    h.post3_p = PostConvParams<float>::identity(3);
    h.post3_q = PostConvParams<float>::identity(3);
    h.pam4 = PamParams<float>::init(4, 2, rng);
    h.cam4 = CamParams<float>::init();
    h.post4_p = PostConvParams<float>::identity(4);
    h.post4_q = PostConvParams<float>::identity(4);
    h.cam5 = CamParams<float>::init();

    auto out = fuse_hierarchical(t3, t4, t5, lift(tape, h));
    CHECK(out.value().shape() == Shape{12, 2, 2});

    // attention scalars are zero, post-convs identity: each pooled branch is
    // 2x the pooled tap; tap5 passes through
    auto pooled3 = maxpool2d(t3, 4, 4).value();
    auto pooled4 = maxpool2d(t4, 2, 2).value();
    for (std::int64_t i = 0; i < pooled3.size(); ++i) {
      CHECK(out.value()[i] == doctest::Approx(2.0f * pooled3[i]).epsilon(1e-6));
    }
    for (std::int64_t i = 0; i < pooled4.size(); ++i) {
      CHECK(out.value()[pooled3.size() + i] ==
            doctest::Approx(2.0f * pooled4[i]).epsilon(1e-6));
    }
    for (std::int64_t i = 0; i < t5v.size(); ++i) {
      CHECK(out.value()[pooled3.size() + pooled4.size() + i] == t5v[i]);
    }
  }

  SUBCASE("desk-scale dimensions: 8+16+16 channels at s=4") {
    Tape<double> tape;
    auto t3 = tape.leaf(random_tensor<double>({8, 16, 16}, rng));
    auto t4 = tape.leaf(random_tensor<double>({16, 8, 8}, rng));
    auto t5 = tape.leaf(random_tensor<double>({16, 4, 4}, rng));
    auto h = HierarchicalParams<double>::init(8, 16, 16, 4, rng);
    auto out = fuse_hierarchical(t3, t4, t5, lift(tape, h));
    CHECK(out.value().shape() == Shape{40, 4, 4});

    // compositional oracle
    auto hv = lift(tape, h);
    auto p3 = maxpool2d(fuse_parallel(t3, hv.pam3, hv.post3_p, hv.cam3,
                                      hv.post3_q), 4, 4);
    auto p4 = maxpool2d(fuse_parallel(t4, hv.pam4, hv.post4_p, hv.cam4,
                                      hv.post4_q), 2, 2);
    auto p5 = cam_forward(t5, hv.cam5);
    auto expect = concat_channels<double>({p3, p4, p5});
    CHECK(max_abs_diff(out.value(), expect.value()) < 1e-12);
  }

  SUBCASE("ratio violation is a dimension error") {
    Tape<float> tape;
    auto t3 = tape.leaf(Tensor<float>({3, 6, 6}));
    auto t4 = tape.leaf(Tensor<float>({4, 4, 4}));
    auto t5 = tape.leaf(Tensor<float>({5, 2, 2}));
    HierarchicalParams<float> h;
    h.pam3 = PamParams<float>::init(3, 1, rng);
    h.cam3 = CamParams<float>::init();
    h.post3_p = PostConvParams<float>::identity(3);
    h.post3_q = PostConvParams<float>::identity(3);
    h.pam4 = PamParams<float>::init(4, 2, rng);
    h.cam4 = CamParams<float>::init();
    h.post4_p = PostConvParams<float>::identity(4);
    h.post4_q = PostConvParams<float>::identity(4);
    h.cam5 = CamParams<float>::init();
    CHECK_THROWS_AS(fuse_hierarchical(t3, t4, t5, lift(tape, h)), ShapeError);
  }
}

TEST_CASE("reduction ratio must divide the channel count") {
  Rng rng(13);
  CHECK_THROWS_AS(PamParams<float>::init(6, 4, rng), ShapeError);
}

TEST_CASE("gradients flow through both attention modules") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);

    Tensor<double> a = random_tensor<double>({4, 3, 3}, rng);
    auto pam = PamParams<double>::init(4, 2, rng);
    pam.alpha = Tensor<double>::scalar(rng.uniform(-0.5, 0.5));

    double pam_err = grad_check<double>(
        [&](Tape<double>& t, const std::vector<Var<double>>& v) {
          PamVars<double> pv{v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
          return sum(pam_forward(v[0], pv));
        },
        {a, pam.conv_b_w, pam.conv_b_b, pam.conv_c_w, pam.conv_c_b,
         pam.conv_d_w, pam.conv_d_b, pam.alpha},
        1e-6, -1, seed);
    CHECK(pam_err < 1e-4);

    Tensor<double> beta = Tensor<double>::scalar(rng.uniform(-0.5, 0.5));
    double cam_err = grad_check<double>(
        [&](Tape<double>& t, const std::vector<Var<double>>& v) {
          CamVars<double> cv{v[1]};
          return sum(cam_forward(v[0], cv));
        },
        {a, beta}, 1e-6, -1, seed);
    CHECK(cam_err < 1e-4);
  }
}
