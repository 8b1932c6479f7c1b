#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "prunetax/autodiff.hpp"
#include "prunetax/dataset.hpp"
#include "prunetax/network.hpp"
#include "prunetax/saliency.hpp"
#include "prunetax/sgd.hpp"

namespace prunetax {

// Zeroes output channel i of layer l (weights + bias) and the matching input
// slice of every consumer, and marks it in the mask. The forward pass skips
// masked channels structurally, so the zeros are belt-and-braces: stored
// values at masked positions can never reach the output.
template <typename T>
void prune_channel(NetworkGraph<T>& net, PruneMask& mask, int l, int i) {
  check(net.prunable(l), strf("prune_channel: layer %d is not a convolution", l));
  auto& layer = net.layers[static_cast<size_t>(l)];
  check(i >= 0 && i < layer.spec.out_channels,
        strf("prune_channel: channel %d out of range for layer %d", i, l));
  check(!mask.pruned(l, i), strf("prune_channel: channel (%d,%d) already pruned", l, i));

  const int64_t block = layer.weights.numel() / layer.spec.out_channels;
  const int64_t off = static_cast<int64_t>(i) * block;
  for (int64_t j = 0; j < block; ++j) layer.weights[off + j] = T(0);
  if (!layer.bias.empty()) layer.bias[i] = T(0);

  for (const ConsumerSlice& c : net.consumers[static_cast<size_t>(l)]) {
    auto& cons = net.layers[static_cast<size_t>(c.layer)];
    const int k2 = cons.spec.kernel * cons.spec.kernel;
    for (int o = 0; o < cons.spec.out_channels; ++o) {
      for (int f = 0; f < c.features_per_channel; ++f) {
        const int in_ch = i * c.features_per_channel + f;
        const int64_t woff = (static_cast<int64_t>(o) * cons.spec.in_channels + in_ch) * k2;
        for (int j = 0; j < k2; ++j) cons.weights[woff + j] = T(0);
      }
    }
  }
  mask.out[static_cast<size_t>(l)][static_cast<size_t>(i)] = 1;
}

// Fraction of convolution-layer weights zeroed by masking (producer rows and
// consumer input slices, counted once). Biases and dense layers are excluded
// from the ratio.
template <typename T>
double sparsity(const NetworkGraph<T>& net, const PruneMask& mask) {
  int64_t zeroed = 0, total = 0;
  for (int l = 0; l < net.layer_count(); ++l) {
    const auto& spec = net.layers[static_cast<size_t>(l)].spec;
    if (spec.kind != LayerKind::conv) continue;
    const int64_t k2 = static_cast<int64_t>(spec.kernel) * spec.kernel;
    total += static_cast<int64_t>(spec.out_channels) * spec.in_channels * k2;
    const int64_t out_masked = mask.pruned_count(l);
    const auto in_mask = net.input_mask(mask, l);
    int64_t in_masked = 0;
    for (uint8_t b : in_mask) in_masked += b ? 1 : 0;
    zeroed += (out_masked * spec.in_channels + in_masked * spec.out_channels -
               out_masked * in_masked) *
              k2;
  }
  return total == 0 ? 0.0 : static_cast<double>(zeroed) / static_cast<double>(total);
}

// Globally least salient unpruned channel; a layer down to its final
// unpruned channel is skipped so the graph stays evaluable. Ties break to
// the lowest (layer, channel). Returns nullopt when nothing is prunable.
template <typename T>
std::optional<std::pair<int, int>> select_least_salient(const SaliencyMap& map,
                                                        const NetworkGraph<T>& net,
                                                        const PruneMask& mask) {
  std::optional<std::pair<int, int>> best;
  double best_val = 0.0;
  for (const auto& ls : map.layers) {
    const int m = net.layers[static_cast<size_t>(ls.layer)].spec.out_channels;
    if (m - mask.pruned_count(ls.layer) <= 1) continue;
    for (int i = 0; i < m; ++i) {
      if (ls.excluded[static_cast<size_t>(i)] || mask.pruned(ls.layer, i)) continue;
      const double v = ls.saliency[static_cast<size_t>(i)];
      if (!best || v < best_val) {
        best = {ls.layer, i};
        best_val = v;
      }
    }
  }
  return best;
}

struct HarnessConfig {
  // < 0 means auto: pre-pruning train accuracy minus 0.005.
  double train_acc_recovery_target = -1.0;
  int max_retrain_steps_per_iteration = 50;
  int retrain_batch_size = 64;
  double retrain_learning_rate = 0.01;
  double retrain_momentum = 0.9;
  double stop_test_acc_drop = 0.05;
  int eval_batches_for_saliency = 8;
  // Desk-scale measurement protocol: train accuracy is probed on a fixed
  // subset of the retrain split, re-checked every recovery_check_interval
  // retraining steps.
  int train_acc_probe_size = 1024;
  int recovery_check_interval = 10;
  uint64_t seed = 1;
  ActivationTap activation_tap = ActivationTap::post_nonlinearity;
};

struct ExperimentRecord {
  int step = 0;
  int layer = -1;
  int channel = -1;
  double saliency = 0.0;
  double sparsity = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  int retrain_steps = 0;
  int64_t cumulative_retrain_steps = 0;
};

template <typename T>
struct PruneRunData {
  DataView<T> retrain;
  DataView<T> eval;
  DataView<T> test;
};

struct PruneRunResult {
  std::vector<ExperimentRecord> records;
  double baseline_train_acc = 0.0;
  double baseline_test_acc = 0.0;
};

namespace detail {

inline constexpr int kAccuracyBatch = 256;

// Batch-averaged derivatives over the fixed saliency evaluation batches,
// computing only the derivative sets the signal needs.
template <typename T>
ActivationRecord<T> averaged_derivatives(const NetworkGraph<T>& net, const PruneMask& mask,
                                         const DataView<T>& eval, const SignalSpec& spec,
                                         int batches, int batch_size) {
  BatchAccumulator<T> acc;
  for (int b = 0; b < batches; ++b) {
    Batch<T> batch = eval.batch(b * batch_size, batch_size);
    ActivationRecord<T> rec = forward(net, batch, mask);
    if (spec.needs_gradient()) backward(net, mask, rec);
    if (spec.needs_hessian()) {
      if (spec.hessian == HessianVariant::app1)
        hessian_diag_app1(net, mask, rec);
      else
        hessian_diag_app2(rec);
    }
    acc.accumulate(rec);
  }
  return acc.read_average();
}

// Iterative global-least-salient pruning (saliency recomputed every step),
// optionally with accuracy-recovery retraining after each prune.
template <typename T>
PruneRunResult run_prune(NetworkGraph<T>& net, PruneMask& mask, const SignalSpec& spec,
                         const PruneRunData<T>& data, const HarnessConfig& cfg,
                         bool retrain_enabled) {
  check(!data.test.indices.empty(), "run_prune: empty test set");
  const DataView<T> probe_view =
      data.retrain.take(std::min(cfg.train_acc_probe_size, data.retrain.size()));
  auto probe_train = [&]() { return accuracy(net, mask, probe_view.batches(kAccuracyBatch)); };
  auto test_accuracy = [&]() { return accuracy(net, mask, data.test.batches(kAccuracyBatch)); };

  PruneRunResult result;
  result.baseline_train_acc = probe_train();
  result.baseline_test_acc = test_accuracy();
  const double recovery_target = cfg.train_acc_recovery_target >= 0.0
                                     ? cfg.train_acc_recovery_target
                                     : result.baseline_train_acc - 0.005;

  SgdTrainer<T> trainer(net, cfg.retrain_learning_rate, cfg.retrain_momentum);
  BatchStream<T> stream(data.retrain, cfg.retrain_batch_size, cfg.seed);

  int64_t cumulative = 0;
  for (int step = 1;; ++step) {
    ActivationRecord<T> avg;
    const ActivationRecord<T>* avg_ptr = nullptr;
    if (spec.needs_data()) {
      check(!data.eval.indices.empty(), "run_prune: empty evaluation set");
      avg = averaged_derivatives(net, mask, data.eval, spec, cfg.eval_batches_for_saliency,
                                 cfg.retrain_batch_size);
      avg_ptr = &avg;
    }
    const SaliencyMap map = channel_saliency(net, avg_ptr, spec, mask, cfg.activation_tap);
    const auto pick = select_least_salient(map, net, mask);
    if (!pick) break;
    const auto [l, i] = *pick;
    const double sal = map.find(l)->saliency[static_cast<size_t>(i)];
    prune_channel(net, mask, l, i);

    int steps_used = 0;
    std::optional<double> last_probe;
    if (retrain_enabled && cfg.max_retrain_steps_per_iteration > 0) {
      last_probe = probe_train();
      while (*last_probe < recovery_target &&
             steps_used < cfg.max_retrain_steps_per_iteration) {
        const int burst = std::min(cfg.recovery_check_interval,
                                   cfg.max_retrain_steps_per_iteration - steps_used);
        for (int s = 0; s < burst; ++s) trainer.step(net, mask, stream.next());
        steps_used += burst;
        last_probe = probe_train();
      }
    }
    cumulative += steps_used;

    ExperimentRecord rec;
    rec.step = step;
    rec.layer = l;
    rec.channel = i;
    rec.saliency = sal;
    rec.sparsity = sparsity(net, mask);
    rec.train_acc = last_probe ? *last_probe : probe_train();
    rec.test_acc = test_accuracy();
    rec.retrain_steps = steps_used;
    rec.cumulative_retrain_steps = cumulative;
    result.records.push_back(rec);

    if (result.baseline_test_acc - rec.test_acc > cfg.stop_test_acc_drop) break;
  }
  return result;
}

}  // namespace detail

template <typename T>
PruneRunResult run_prune_no_retrain(NetworkGraph<T>& net, PruneMask& mask,
                                    const SignalSpec& spec, const PruneRunData<T>& data,
                                    const HarnessConfig& cfg) {
  return detail::run_prune(net, mask, spec, data, cfg, false);
}

template <typename T>
PruneRunResult run_prune_with_retrain(NetworkGraph<T>& net, PruneMask& mask,
                                      const SignalSpec& spec, const PruneRunData<T>& data,
                                      const HarnessConfig& cfg) {
  return detail::run_prune(net, mask, spec, data, cfg, true);
}

}  // namespace prunetax
