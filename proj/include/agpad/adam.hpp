#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "agpad/errors.hpp"
#include "agpad/tensor.hpp"

namespace agpad {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers aligned with the parameter registry; t counts
/// optimizer steps, not per-parameter updates.
template <typename S>
struct AdamState {
  std::vector<Tensor<S>> m, v;
  long t = 0;

  static AdamState init(
      const std::vector<std::pair<std::string, Tensor<S>>>& params) {
    AdamState state;
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const auto& [name, p] : params) {
      state.m.push_back(Tensor<S>::zeros(p.shape()));
      state.v.push_back(Tensor<S>::zeros(p.shape()));
    }
    return state;
  }
};

/// Standard bias-corrected Adam update, a pure function of
/// (params, grads, state). Non-finite gradients abort with the offending
/// parameter's name.
template <typename S>
void adam_step(std::vector<std::pair<std::string, Tensor<S>>>& params,
               const std::vector<Tensor<S>>& grads, AdamState<S>& state,
               const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeError("adam_step: parameter/gradient/state count mismatch");
  }
  ++state.t;
  const S bc1 = S(1) - static_cast<S>(std::pow(cfg.beta1, state.t));
  const S bc2 = S(1) - static_cast<S>(std::pow(cfg.beta2, state.t));
  const S lr = static_cast<S>(cfg.lr);
  const S b1 = static_cast<S>(cfg.beta1), b2 = static_cast<S>(cfg.beta2);
  const S eps = static_cast<S>(cfg.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<S>& p = params[i].second;
    const Tensor<S>& g = grads[i];
    if (!g.same_shape(p)) {
      throw ShapeError("adam_step: gradient shape " + shape_string(g.shape()) +
                       " does not match parameter '" + params[i].first + "' " +
                       shape_string(p.shape()));
    }
    if (!g.all_finite()) {
      throw NumericError("non-finite gradient for parameter '" +
                         params[i].first + "'");
    }
    Tensor<S>& m = state.m[i];
    Tensor<S>& v = state.v[i];
    for (std::int64_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (S(1) - b1) * g[j];
      v[j] = b2 * v[j] + (S(1) - b2) * g[j] * g[j];
      const S mhat = m[j] / bc1;
      const S vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

/// Arithmetic mean of per-model PA-score lists, sample by sample.
inline std::vector<double> average_score_fusion(
    const std::vector<std::vector<double>>& score_lists) {
  if (score_lists.empty()) {
    throw DataError("average_score_fusion: no score lists");
  }
  const std::size_t n = score_lists.front().size();
  for (const auto& list : score_lists) {
    if (list.size() != n) {
      throw DataError("average_score_fusion: length mismatch (" +
                      std::to_string(list.size()) + " vs " + std::to_string(n) +
                      ")");
    }
  }
  std::vector<double> fused(n, 0.0);
  for (const auto& list : score_lists) {
    for (std::size_t i = 0; i < n; ++i) fused[i] += list[i];
  }
  for (double& v : fused) v /= static_cast<double>(score_lists.size());
  return fused;
}

}  // namespace agpad
