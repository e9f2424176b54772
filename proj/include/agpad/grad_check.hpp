#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "agpad/ops.hpp"
#include "agpad/rng.hpp"
#include "agpad/tape.hpp"

namespace agpad {

/// Compare tape gradients against central finite differences.
///
/// `build` receives a fresh tape plus one Var per parameter and must return a
/// scalar node. Run this in double: 32-bit finite differences are too noisy
/// for the 1e-4 bound the test suite enforces.
///
/// Returns max over probed coordinates of |analytic - numeric| /
/// max(1, |analytic|, |numeric|). When max_probes_per_param > 0, a seeded
/// random subset of coordinates is probed per parameter.
template <typename Scalar, typename BuildFn>
Scalar grad_check(BuildFn&& build, std::vector<Tensor<Scalar>> params,
                  Scalar eps, int max_probes_per_param = -1,
                  std::uint64_t probe_seed = 0) {
  for (auto& p : params) p.requires_grad = true;

  auto eval = [&](const std::vector<Tensor<Scalar>>& values) -> Scalar {
    Tape<Scalar> tape;
    std::vector<Var<Scalar>> vars;
    vars.reserve(values.size());
    for (const auto& v : values) {
      Tensor<Scalar> leaf_value = v;
      leaf_value.requires_grad = false;
      vars.push_back(tape.leaf(std::move(leaf_value)));
    }
    Var<Scalar> out = build(tape, vars);
    if (out.value().size() != 1) {
      throw ShapeError("grad_check: objective must be scalar");
    }
    Scalar y = out.value()[0];
    if (!std::isfinite(static_cast<double>(y))) {
      throw NumericError("grad_check: non-finite probe value");
    }
    return y;
  };

  // Analytic gradients from one taped pass.
  std::vector<Tensor<Scalar>> analytic;
  {
    Tape<Scalar> tape;
    std::vector<Var<Scalar>> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(tape.leaf(p));
    Var<Scalar> out = build(tape, vars);
    if (out.value().size() != 1) {
      throw ShapeError("grad_check: objective must be scalar");
    }
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }

  Rng probe_rng(hash_mix(probe_seed, 0x9d7f3c1b));
  Scalar worst = Scalar(0);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    std::vector<std::int64_t> coords;
    const std::int64_t n = params[pi].size();
    if (max_probes_per_param > 0 && n > max_probes_per_param) {
      for (int k = 0; k < max_probes_per_param; ++k) {
        coords.push_back(static_cast<std::int64_t>(probe_rng.u64() %
                                                   static_cast<std::uint64_t>(n)));
      }
    } else {
      coords.resize(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
    }
    for (std::int64_t ci : coords) {
      const Scalar saved = params[pi][ci];
      params[pi][ci] = saved + eps;
      const Scalar fp = eval(params);
      params[pi][ci] = saved - eps;
      const Scalar fm = eval(params);
      params[pi][ci] = saved;
      const Scalar numeric = (fp - fm) / (Scalar(2) * eps);
      const Scalar a = analytic[pi][ci];
      const Scalar denom = std::max(
          {Scalar(1), std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace agpad
