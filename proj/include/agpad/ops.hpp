#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "agpad/tape.hpp"
#include "agpad/tensor.hpp"

namespace agpad {

namespace detail {

template <typename Scalar>
bool wants_grad(Var<Scalar> v) {
  return v.tape->requires_grad(v.id);
}

template <typename Scalar>
void check_same_shape(const char* op, const Tensor<Scalar>& a,
                      const Tensor<Scalar>& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

// Unfold a padded C x H x W tensor into a (C*kh*kw) x (H'*W') matrix whose
// columns are receptive fields. Cross-correlation convention.
template <typename Scalar>
typename Tensor<Scalar>::MatrixRM im2col(const Tensor<Scalar>& x, int kh,
                                         int kw, int stride, int pad, int oh,
                                         int ow) {
  const int c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  typename Tensor<Scalar>::MatrixRM col(c_in * kh * kw, oh * ow);
  col.setZero();
  for (int ci = 0; ci < c_in; ++ci) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const int row = (ci * kh + ky) * kw + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= w) continue;
            col(row, oy * ow + ox) = x(ci, iy, ix);
          }
        }
      }
    }
  }
  return col;
}

template <typename Scalar>
void col2im_add(const typename Tensor<Scalar>::MatrixRM& col,
                Tensor<Scalar>& dx, int kh, int kw, int stride, int pad,
                int oh, int ow) {
  const int c_in = dx.dim(0), h = dx.dim(1), w = dx.dim(2);
  for (int ci = 0; ci < c_in; ++ci) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const int row = (ci * kh + ky) * kw + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= w) continue;
            dx(ci, iy, ix) += col(row, oy * ow + ox);
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_shape("add", a.value(), b.value());
  Tensor<Scalar> out = a.value();
  out.array() += b.value().array();
  const int ia = a.id, ib = b.id;
  bool rg = detail::wants_grad(a) || detail::wants_grad(b);
  return a.tape->record("add", std::move(out), rg,
                        [ia, ib](Tape<Scalar>& t, const Tensor<Scalar>& u) {
                          t.accumulate(ia, u);
                          t.accumulate(ib, u);
                        });
}

template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_shape("mul", a.value(), b.value());
  Tensor<Scalar> out = a.value();
  out.array() *= b.value().array();
  const int ia = a.id, ib = b.id;
  bool rg = detail::wants_grad(a) || detail::wants_grad(b);
  return a.tape->record("mul", std::move(out), rg,
                        [ia, ib](Tape<Scalar>& t, const Tensor<Scalar>& u) {
                          Tensor<Scalar> da = u;
                          da.array() *= t.value(ib).array();
                          t.accumulate(ia, da);
                          Tensor<Scalar> db = u;
                          db.array() *= t.value(ia).array();
                          t.accumulate(ib, db);
                        });
}

/// ReLU with subgradient 0 at 0: only strictly positive inputs pass gradient.
template <typename Scalar>
Var<Scalar> relu(Var<Scalar> x) {
  Tensor<Scalar> out = x.value();
  for (std::int64_t i = 0; i < out.size(); ++i) {
    out[i] = out[i] > Scalar(0) ? out[i] : Scalar(0);
  }
  const int ix = x.id;
  return x.tape->record("relu", std::move(out), detail::wants_grad(x),
                        [ix](Tape<Scalar>& t, const Tensor<Scalar>& u) {
                          const Tensor<Scalar>& v = t.value(ix);
                          Tensor<Scalar> dx = u;
                          for (std::int64_t i = 0; i < dx.size(); ++i) {
                            if (!(v[i] > Scalar(0))) dx[i] = Scalar(0);
                          }
                          t.accumulate(ix, dx);
                        });
}

/// y = alpha * x with a single learnable scalar (the residual weights of the
/// attention modules). alpha must have exactly one element.
template <typename Scalar>
Var<Scalar> scale(Var<Scalar> x, Var<Scalar> alpha) {
  if (alpha.value().size() != 1) {
    throw ShapeError("scale: scalar parameter expected, got " +
                     shape_string(alpha.value().shape()));
  }
  Tensor<Scalar> out = x.value();
  out.array() *= alpha.value()[0];
  const int ix = x.id, ia = alpha.id;
  bool rg = detail::wants_grad(x) || detail::wants_grad(alpha);
  return x.tape->record(
      "scale", std::move(out), rg,
      [ix, ia](Tape<Scalar>& t, const Tensor<Scalar>& u) {
        Tensor<Scalar> dx = u;
        dx.array() *= t.value(ia)[0];
        t.accumulate(ix, dx);
        Scalar da = (u.array() * t.value(ix).array()).sum();
        t.accumulate(ia, Tensor<Scalar>::scalar(da));
      });
}

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  const Tensor<Scalar>& av = a.value();
  const Tensor<Scalar>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(av.shape()) +
                     " x " + shape_string(bv.shape()));
  }
  const int m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor<Scalar> out({m, n});
  out.mat(m, n).noalias() = av.mat(m, k) * bv.mat(k, n);
  const int ia = a.id, ib = b.id;
  bool rg = detail::wants_grad(a) || detail::wants_grad(b);
  return a.tape->record(
      "matmul", std::move(out), rg,
      [ia, ib, m, k, n](Tape<Scalar>& t, const Tensor<Scalar>& u) {
        Tensor<Scalar> da({m, k});
        da.mat(m, k).noalias() = u.mat(m, n) * t.value(ib).mat(k, n).transpose();
        t.accumulate(ia, da);
        Tensor<Scalar> db({k, n});
        db.mat(k, n).noalias() = t.value(ia).mat(m, k).transpose() * u.mat(m, n);
        t.accumulate(ib, db);
      });
}

template <typename Scalar>
Var<Scalar> transpose(Var<Scalar> x) {
  const Tensor<Scalar>& xv = x.value();
  if (xv.rank() != 2) {
    throw ShapeError("transpose: rank-2 tensor expected, got " +
                     shape_string(xv.shape()));
  }
  const int m = xv.dim(0), n = xv.dim(1);
  Tensor<Scalar> out({n, m});
  out.mat(n, m) = xv.mat(m, n).transpose();
  const int ix = x.id;
  return x.tape->record("transpose", std::move(out), detail::wants_grad(x),
                        [ix, m, n](Tape<Scalar>& t, const Tensor<Scalar>& u) {
                          Tensor<Scalar> dx({m, n});
                          dx.mat(m, n) = u.mat(n, m).transpose();
                          t.accumulate(ix, dx);
                        });
}

template <typename Scalar>
Var<Scalar> reshape(Var<Scalar> x, Shape new_shape) {
  Tensor<Scalar> out = x.value().reshaped(new_shape);
  const int ix = x.id;
  Shape old_shape = x.value().shape();
  return x.tape->record(
      "reshape", std::move(out), detail::wants_grad(x),
      [ix, old_shape](Tape<Scalar>& t, const Tensor<Scalar>& u) {
        t.accumulate(ix, u.reshaped(old_shape));
      });
}

/// Column-wise softmax of an m x n matrix: every output column sums to 1.
/// Stabilized by subtracting the per-column max before exponentiating.
template <typename Scalar>
Var<Scalar> softmax_cols(Var<Scalar> x) {
  const Tensor<Scalar>& xv = x.value();
  if (xv.rank() != 2) {
    throw ShapeError("softmax_cols: rank-2 tensor expected, got " +
                     shape_string(xv.shape()));
  }
  const int m = xv.dim(0), n = xv.dim(1);
  Tensor<Scalar> out({m, n});
  auto src = xv.mat(m, n);
  auto dst = out.mat(m, n);
  for (int j = 0; j < n; ++j) {
    Scalar mx = src.col(j).maxCoeff();
    dst.col(j) = (src.col(j).array() - mx).exp();
    dst.col(j) /= dst.col(j).sum();
  }
  const int ix = x.id;
  bool rg = detail::wants_grad(x);
  std::shared_ptr<Tensor<Scalar>> p;
  if (rg) p = std::make_shared<Tensor<Scalar>>(out);
  return x.tape->record(
      "softmax_cols", std::move(out), rg,
      [ix, p, m, n](Tape<Scalar>& t, const Tensor<Scalar>& u) {
        // dx_j = p_j .* (u_j - <p_j, u_j>)
        Tensor<Scalar> dx({m, n});
        auto pm = p->mat(m, n);
        auto um = u.mat(m, n);
        auto dm = dx.mat(m, n);
        for (int j = 0; j < n; ++j) {
          Scalar dot = (pm.col(j).array() * um.col(j).array()).sum();
          dm.col(j) = pm.col(j).array() * (um.col(j).array() - dot);
        }
        t.accumulate(ix, dx);
      });
}

/// 2-D cross-correlation. x: Cin x H x W, w: Cout x Cin x kh x kw, b: Cout.
/// H' = (H + 2*pad - kh) / stride + 1, likewise W'.
template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b, int stride,
                   int pad) {
  const Tensor<Scalar>& xv = x.value();
  const Tensor<Scalar>& wv = w.value();
  const Tensor<Scalar>& bv = b.value();
  if (xv.rank() != 3 || wv.rank() != 4 || bv.rank() != 1) {
    throw ShapeError("conv2d: expected x rank 3, w rank 4, b rank 1; got " +
                     shape_string(xv.shape()) + ", " + shape_string(wv.shape()) +
                     ", " + shape_string(bv.shape()));
  }
  if (wv.dim(1) != xv.dim(0) || bv.dim(0) != wv.dim(0)) {
    throw ShapeError("conv2d: channel mismatch, x " + shape_string(xv.shape()) +
                     " w " + shape_string(wv.shape()));
  }
  if (stride < 1 || pad < 0) {
    throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
  }
  const int c_out = wv.dim(0), c_in = wv.dim(1), kh = wv.dim(2), kw = wv.dim(3);
  const int h = xv.dim(1), ww_ = xv.dim(2);
  if (h + 2 * pad < kh || ww_ + 2 * pad < kw) {
    throw ShapeError("conv2d: kernel " + shape_string(wv.shape()) +
                     " larger than padded input " + shape_string(xv.shape()));
  }
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (ww_ + 2 * pad - kw) / stride + 1;

  using MatrixRM = typename Tensor<Scalar>::MatrixRM;
  auto col = std::make_shared<MatrixRM>(
      detail::im2col(xv, kh, kw, stride, pad, oh, ow));

  Tensor<Scalar> out({c_out, oh, ow});
  auto out_m = out.mat(c_out, oh * ow);
  out_m.noalias() = wv.mat(c_out, c_in * kh * kw) * (*col);
  for (int co = 0; co < c_out; ++co) out_m.row(co).array() += bv[co];

  bool rg = detail::wants_grad(x) || detail::wants_grad(w) ||
            detail::wants_grad(b);
  const int ix = x.id, iw = w.id, ib = b.id;
  typename Tape<Scalar>::BackwardFn fn;
  if (rg) {
    Shape x_shape = xv.shape();
    fn = [ix, iw, ib, col, x_shape, c_out, c_in, kh, kw, stride, pad, oh,
          ow](Tape<Scalar>& t, const Tensor<Scalar>& u) {
      auto um = u.mat(c_out, oh * ow);
      Tensor<Scalar> dw({c_out, c_in, kh, kw});
      dw.mat(c_out, c_in * kh * kw).noalias() = um * col->transpose();
      t.accumulate(iw, dw);
      Tensor<Scalar> db({c_out});
      for (int co = 0; co < c_out; ++co) db[co] = um.row(co).sum();
      t.accumulate(ib, db);
      if (t.requires_grad(ix)) {
        typename Tensor<Scalar>::MatrixRM dcol =
            t.value(iw).mat(c_out, c_in * kh * kw).transpose() * um;
        Tensor<Scalar> dx(x_shape);
        detail::col2im_add<Scalar>(dcol, dx, kh, kw, stride, pad, oh, ow);
        t.accumulate(ix, dx);
      }
    };
  } else {
    col.reset();  // inference path keeps no workspace
  }
  return x.tape->record("conv2d", std::move(out), rg, std::move(fn));
}

/// Max pooling with a square window, no padding. Gradient routes to the
/// argmax; ties go to the first element in row-major scan order.
template <typename Scalar>
Var<Scalar> maxpool2d(Var<Scalar> x, int window, int stride) {
  const Tensor<Scalar>& xv = x.value();
  if (xv.rank() != 3) {
    throw ShapeError("maxpool2d: rank-3 tensor expected, got " +
                     shape_string(xv.shape()));
  }
  if (window < 1 || stride < 1) {
    throw ShapeError("maxpool2d: window and stride must be >= 1");
  }
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (window > h || window > w) {
    throw ShapeError("maxpool2d: window " + std::to_string(window) +
                     " exceeds input " + shape_string(xv.shape()));
  }
  const int oh = (h - window) / stride + 1;
  const int ow = (w - window) / stride + 1;
  Tensor<Scalar> out({c, oh, ow});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(c) * oh * ow);
  std::int64_t o = 0;
  for (int ci = 0; ci < c; ++ci) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox, ++o) {
        Scalar best = xv(ci, oy * stride, ox * stride);
        std::int64_t best_idx =
            (static_cast<std::int64_t>(ci) * h + oy * stride) * w + ox * stride;
        for (int ky = 0; ky < window; ++ky) {
          for (int kx = 0; kx < window; ++kx) {
            const int iy = oy * stride + ky, ix2 = ox * stride + kx;
            Scalar v = xv(ci, iy, ix2);
            if (v > best) {
              best = v;
              best_idx = (static_cast<std::int64_t>(ci) * h + iy) * w + ix2;
            }
          }
        }
        out[o] = best;
        (*argmax)[static_cast<std::size_t>(o)] = best_idx;
      }
    }
  }
  const int ix = x.id;
  Shape x_shape = xv.shape();
  return x.tape->record(
      "maxpool2d", std::move(out), detail::wants_grad(x),
      [ix, argmax, x_shape](Tape<Scalar>& t, const Tensor<Scalar>& u) {
        Tensor<Scalar> dx(x_shape);
        for (std::int64_t i = 0; i < u.size(); ++i) {
          dx[(*argmax)[static_cast<std::size_t>(i)]] += u[i];
        }
        t.accumulate(ix, dx);
      });
}

/// Per-channel spatial mean: C x H x W -> C.
template <typename Scalar>
Var<Scalar> global_avg_pool(Var<Scalar> x) {
  const Tensor<Scalar>& xv = x.value();
  if (xv.rank() != 3) {
    throw ShapeError("global_avg_pool: rank-3 tensor expected, got " +
                     shape_string(xv.shape()));
  }
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(h * w);
  Tensor<Scalar> out({c});
  auto xm = xv.mat(c, h * w);
  for (int ci = 0; ci < c; ++ci) out[ci] = xm.row(ci).sum() * inv;
  const int ix = x.id;
  return x.tape->record(
      "global_avg_pool", std::move(out), detail::wants_grad(x),
      [ix, c, h, w, inv](Tape<Scalar>& t, const Tensor<Scalar>& u) {
        Tensor<Scalar> dx({c, h, w});
        auto dm = dx.mat(c, h * w);
        for (int ci = 0; ci < c; ++ci) dm.row(ci).setConstant(u[ci] * inv);
        t.accumulate(ix, dx);
      });
}

/// Fully connected layer: y = W x + b with W: out x in, x: in, b: out.
template <typename Scalar>
Var<Scalar> dense(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b) {
  const Tensor<Scalar>& xv = x.value();
  const Tensor<Scalar>& wv = w.value();
  const Tensor<Scalar>& bv = b.value();
  if (xv.rank() != 1 || wv.rank() != 2 || bv.rank() != 1 ||
      wv.dim(1) != xv.dim(0) || wv.dim(0) != bv.dim(0)) {
    throw ShapeError("dense: incompatible shapes x " + shape_string(xv.shape()) +
                     " w " + shape_string(wv.shape()) + " b " +
                     shape_string(bv.shape()));
  }
  const int out_n = wv.dim(0), in_n = wv.dim(1);
  Tensor<Scalar> out({out_n});
  out.mat(out_n, 1).noalias() = wv.mat(out_n, in_n) * xv.mat(in_n, 1);
  out.array() += bv.array();
  const int ix = x.id, iw = w.id, ib = b.id;
  bool rg = detail::wants_grad(x) || detail::wants_grad(w) ||
            detail::wants_grad(b);
  return x.tape->record(
      "dense", std::move(out), rg,
      [ix, iw, ib, out_n, in_n](Tape<Scalar>& t, const Tensor<Scalar>& u) {
        Tensor<Scalar> dw({out_n, in_n});
        dw.mat(out_n, in_n).noalias() =
            u.mat(out_n, 1) * t.value(ix).mat(in_n, 1).transpose();
        t.accumulate(iw, dw);
        t.accumulate(ib, u);
        Tensor<Scalar> dx({in_n});
        dx.mat(in_n, 1).noalias() =
            t.value(iw).mat(out_n, in_n).transpose() * u.mat(out_n, 1);
        t.accumulate(ix, dx);
      });
}

/// Concatenate rank-3 tensors along the channel axis. Spatial dims must agree.
template <typename Scalar>
Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const int h = parts[0].value().dim(1), w = parts[0].value().dim(2);
  int c_total = 0;
  for (const auto& p : parts) {
    const Tensor<Scalar>& v = p.value();
    if (v.rank() != 3 || v.dim(1) != h || v.dim(2) != w) {
      throw ShapeError("concat_channels: spatial mismatch at " +
                       shape_string(v.shape()));
    }
    c_total += v.dim(0);
  }
  Tensor<Scalar> out({c_total, h, w});
  std::vector<int> ids;
  std::vector<int> channels;
  bool rg = false;
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const Tensor<Scalar>& v = p.value();
    std::copy(v.data(), v.data() + v.size(), out.data() + offset);
    offset += v.size();
    ids.push_back(p.id);
    channels.push_back(v.dim(0));
    rg = rg || detail::wants_grad(p);
  }
  return parts[0].tape->record(
      "concat_channels", std::move(out), rg,
      [ids, channels, h, w](Tape<Scalar>& t, const Tensor<Scalar>& u) {
        std::int64_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          Tensor<Scalar> dp({channels[k], h, w});
          std::copy(u.data() + offset, u.data() + offset + dp.size(), dp.data());
          offset += dp.size();
          t.accumulate(ids[k], dp);
        }
      });
}

/// Sum of all elements, as a scalar node.
template <typename Scalar>
Var<Scalar> sum(Var<Scalar> x) {
  Tensor<Scalar> out = Tensor<Scalar>::scalar(x.value().array().sum());
  const int ix = x.id;
  Shape x_shape = x.value().shape();
  return x.tape->record(
      "sum", std::move(out), detail::wants_grad(x),
      [ix, x_shape](Tape<Scalar>& t, const Tensor<Scalar>& u) {
        t.accumulate(ix, Tensor<Scalar>::full(x_shape, u[0]));
      });
}

/// Pick one element of a rank-1 tensor, as a scalar node.
template <typename Scalar>
Var<Scalar> index(Var<Scalar> x, int i) {
  const Tensor<Scalar>& xv = x.value();
  if (xv.rank() != 1 || i < 0 || i >= xv.dim(0)) {
    throw ShapeError("index: position " + std::to_string(i) +
                     " out of range for " + shape_string(xv.shape()));
  }
  const int ix = x.id, n = xv.dim(0);
  return x.tape->record("index", Tensor<Scalar>::scalar(xv[i]),
                        detail::wants_grad(x),
                        [ix, i, n](Tape<Scalar>& t, const Tensor<Scalar>& u) {
                          Tensor<Scalar> dx({n});
                          dx[i] = u[0];
                          t.accumulate(ix, dx);
                        });
}

/// Stabilized softmax of a rank-1 tensor.
template <typename Scalar>
Var<Scalar> softmax(Var<Scalar> x) {
  const Tensor<Scalar>& xv = x.value();
  if (xv.rank() != 1) {
    throw ShapeError("softmax: rank-1 tensor expected, got " +
                     shape_string(xv.shape()));
  }
  Tensor<Scalar> out = xv;
  Scalar mx = out.array().maxCoeff();
  out.array() = (out.array() - mx).exp();
  out.array() /= out.array().sum();
  const int ix = x.id;
  bool rg = detail::wants_grad(x);
  std::shared_ptr<Tensor<Scalar>> p;
  if (rg) p = std::make_shared<Tensor<Scalar>>(out);
  return x.tape->record(
      "softmax", std::move(out), rg,
      [ix, p](Tape<Scalar>& t, const Tensor<Scalar>& u) {
        Scalar dot = (p->array() * u.array()).sum();
        Tensor<Scalar> dx = *p;
        dx.array() *= (u.array() - dot);
        t.accumulate(ix, dx);
      });
}

/// -log softmax(logits)[label] for two-class logits.
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(Var<Scalar> logits, int label) {
  const Tensor<Scalar>& lv = logits.value();
  if (lv.rank() != 1 || lv.dim(0) != 2) {
    throw ShapeError("softmax_cross_entropy: two-class logits expected, got " +
                     shape_string(lv.shape()));
  }
  if (label != 0 && label != 1) {
    throw ShapeError("softmax_cross_entropy: label must be 0 or 1, got " +
                     std::to_string(label));
  }
  Scalar mx = std::max(lv[0], lv[1]);
  Scalar lse = mx + std::log(std::exp(lv[0] - mx) + std::exp(lv[1] - mx));
  Tensor<Scalar> out = Tensor<Scalar>::scalar(lse - lv[label]);
  const int il = logits.id;
  return logits.tape->record(
      "softmax_cross_entropy", std::move(out), detail::wants_grad(logits),
      [il, label](Tape<Scalar>& t, const Tensor<Scalar>& u) {
        const Tensor<Scalar>& lv = t.value(il);
        Scalar mx = std::max(lv[0], lv[1]);
        Scalar e0 = std::exp(lv[0] - mx), e1 = std::exp(lv[1] - mx);
        Scalar z = e0 + e1;
        Tensor<Scalar> dx({2});
        dx[0] = (e0 / z - (label == 0 ? Scalar(1) : Scalar(0))) * u[0];
        dx[1] = (e1 / z - (label == 1 ? Scalar(1) : Scalar(0))) * u[0];
        t.accumulate(il, dx);
      });
}

}  // namespace agpad
