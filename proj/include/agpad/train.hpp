#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "agpad/adam.hpp"
#include "agpad/augment.hpp"
#include "agpad/data.hpp"
#include "agpad/model.hpp"

namespace agpad {

struct TrainConfig {
  AdamConfig adam;          // lr 1e-4, betas 0.9/0.999, eps 1e-8
  int batch_size = 32;
  int epochs = 50;
  std::uint64_t seed = 42;
  bool augment = true;
  AugmentConfig aug;
  int checkpoint_every = 10;  // epochs; 0 disables cadence checkpoints
  int threads = 0;            // 0 = hardware concurrency
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.adam.lr < 0) throw ConfigError("learning rate must be >= 0");
  if (cfg.batch_size <= 0) throw ConfigError("batch size must be positive");
  if (cfg.epochs <= 0) throw ConfigError("epoch count must be positive");
  if (cfg.aug.flip_prob < 0 || cfg.aug.flip_prob > 1) {
    throw ConfigError("flip probability must lie in [0, 1]");
  }
  if (cfg.aug.zoom_min <= 0 || cfg.aug.zoom_max < cfg.aug.zoom_min) {
    throw ConfigError("zoom range must satisfy 0 < min <= max");
  }
}

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  bool has_val = false;
};

struct TrainResult {
  std::vector<EpochLog> log;
};

/// Return false to stop before the epoch budget is exhausted.
using EpochCallback =
    std::function<bool(int epoch, const ModelGraph<float>& model,
                       const EpochLog& entry)>;

/// Fraction of samples the 0.5-threshold rule classifies correctly.
inline double accuracy(const ModelGraph<float>& model, const Dataset& ds) {
  std::int64_t correct = 0;
  for (const auto& s : ds.samples) {
    const float score = model.pa_score(s.image);
    const int predicted = score >= 0.5f ? 1 : 0;
    correct += (predicted == s.label) ? 1 : 0;
  }
  return static_cast<double>(correct) /
         static_cast<double>(ds.samples.size());
}

namespace detail {

// Per-sample loss/gradient work item; gradients are reduced in sample order
// afterwards so results do not depend on the thread count.
struct SampleResult {
  std::vector<Tensor<float>> grads;
  double loss = 0.0;
  bool correct = false;
};

inline void compute_sample(const ModelGraph<float>& model,
                           const Tensor<float>& image, int label,
                           SampleResult& out) {
  Tape<float> tape;
  auto f = model.forward(tape, image);
  auto loss = softmax_cross_entropy(f.logits, label);
  tape.backward(loss);
  out.loss = loss.value()[0];
  const Tensor<float>& l = f.logits.value();
  const int predicted = (l[1] >= l[0]) ? 1 : 0;
  out.correct = predicted == label;
  out.grads.clear();
  out.grads.reserve(f.param_ids.size());
  for (int id : f.param_ids) out.grads.push_back(tape.grad(id));
}

}  // namespace detail

/// Seeded-minibatch Adam training. Shuffling, augmentation draws and
/// weight updates are all deterministic functions of (seed, config, dataset
/// order); per-sample gradients may be computed in parallel but are reduced
/// in sample order, so the loss curve is bitwise reproducible.
inline TrainResult train(ModelGraph<float>& model, const Dataset& train_set,
                         const Dataset* val_set, const TrainConfig& cfg,
                         const std::string& checkpoint_dir = {},
                         const EpochCallback& callback = {}) {
  validate(cfg);
  if (train_set.samples.empty()) throw DataError("training set is empty");
  if (!train_set.has_both_classes()) {
    throw DataError("training set needs both live and PA samples");
  }

  const std::size_t n = train_set.samples.size();
  const int threads = cfg.threads > 0
                          ? cfg.threads
                          : std::max(1u, std::thread::hardware_concurrency());

  AdamState<float> state = AdamState<float>::init(model.params());
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  TrainResult result;

  std::vector<std::size_t> order(n);
  std::vector<detail::SampleResult> batch_results(
      static_cast<std::size_t>(cfg.batch_size));
  std::vector<Tensor<float>> batch_images(
      static_cast<std::size_t>(cfg.batch_size));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(
                                  shuffle_rng.uniform_int(
                                      0, static_cast<int>(i) - 1))]);
    }

    double loss_acc = 0.0;
    std::int64_t correct = 0;
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t bn =
          std::min(static_cast<std::size_t>(cfg.batch_size), n - start);

      for (std::size_t k = 0; k < bn; ++k) {
        const Sample& s = train_set.samples[order[start + k]];
        batch_images[k] =
            cfg.augment
                ? augment(s.image, cfg.aug,
                          derive_seed(cfg.seed, "augment",
                                      static_cast<std::uint64_t>(epoch),
                                      order[start + k]))
                : s.image;
      }

      std::atomic<std::size_t> next{0};
      auto worker = [&]() {
        for (;;) {
          const std::size_t k = next.fetch_add(1);
          if (k >= bn) break;
          const Sample& s = train_set.samples[order[start + k]];
          detail::compute_sample(model, batch_images[k], s.label,
                                 batch_results[k]);
        }
      };
      if (threads == 1 || bn == 1) {
        worker();
      } else {
        std::vector<std::thread> pool;
        const int t_used = std::min<int>(threads, static_cast<int>(bn));
        pool.reserve(static_cast<std::size_t>(t_used));
        for (int t = 0; t < t_used; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
      }

      // ordered reduce, then mean over the batch
      std::vector<Tensor<float>> grads = std::move(batch_results[0].grads);
      for (std::size_t k = 1; k < bn; ++k) {
        for (std::size_t p = 0; p < grads.size(); ++p) {
          grads[p].array() += batch_results[k].grads[p].array();
        }
      }
      const float inv = 1.0f / static_cast<float>(bn);
      for (auto& g : grads) g.array() *= inv;

      for (std::size_t k = 0; k < bn; ++k) {
        loss_acc += batch_results[k].loss;
        correct += batch_results[k].correct ? 1 : 0;
      }

      adam_step(model.params(), grads, state, cfg.adam);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_acc / static_cast<double>(n);
    entry.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    if (val_set && !val_set->samples.empty()) {
      entry.val_acc = accuracy(model, *val_set);
      entry.has_val = true;
    }
    result.log.push_back(entry);

    if (!checkpoint_dir.empty() && cfg.checkpoint_every > 0 &&
        epoch % cfg.checkpoint_every == 0) {
      namespace fs = std::filesystem;
      fs::create_directories(checkpoint_dir);
      model.save((fs::path(checkpoint_dir) /
                  ("ckpt_epoch_" + std::to_string(epoch) + ".agpd"))
                     .string());
    }
    if (callback && !callback(epoch, model, entry)) break;
  }
  return result;
}

/// CSV log: header `epoch,loss,train_acc,val_acc`; the val column is empty
/// when no validation set was supplied.
inline void write_train_log(const std::string& path,
                            const std::vector<EpochLog>& log) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "epoch,loss,train_acc,val_acc\n";
  char buf[160];
  for (const auto& e : log) {
    if (e.has_val) {
      std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", e.epoch, e.loss,
                    e.train_acc, e.val_acc);
    } else {
      std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,\n", e.epoch, e.loss,
                    e.train_acc);
    }
    os << buf;
  }
}

}  // namespace agpad
