#pragma once

#include <cstdint>
#include <vector>

#include "prunetax/autodiff.hpp"
#include "prunetax/dataset.hpp"
#include "prunetax/network.hpp"
#include "prunetax/rng.hpp"

namespace prunetax {

// Plain SGD with momentum. Masked weights are frozen: their gradients are
// zero by construction (backward skips masked paths) and their velocity is
// cleared so momentum from before the prune cannot leak updates in.
template <typename T>
class SgdTrainer {
 public:
  SgdTrainer(const NetworkGraph<T>& net, double learning_rate, double momentum)
      : lr_(static_cast<T>(learning_rate)), momentum_(static_cast<T>(momentum)) {
    w_vel_.resize(net.layers.size());
    b_vel_.resize(net.layers.size());
    for (size_t l = 0; l < net.layers.size(); ++l) {
      if (!net.layers[l].weights.empty()) w_vel_[l] = Tensor<T>::zeros_like(net.layers[l].weights);
      if (!net.layers[l].bias.empty()) b_vel_[l] = Tensor<T>::zeros_like(net.layers[l].bias);
    }
  }

  // One forward/backward/update step on the given batch; returns the loss.
  T step(NetworkGraph<T>& net, const PruneMask& mask, const Batch<T>& batch) {
    ActivationRecord<T> rec = forward(net, batch, mask);
    backward(net, mask, rec);
    apply(net, mask, rec);
    return rec.loss;
  }

  void apply(NetworkGraph<T>& net, const PruneMask& mask, const ActivationRecord<T>& rec) {
    for (int l = 0; l < net.layer_count(); ++l) {
      auto& layer = net.layers[static_cast<size_t>(l)];
      if (layer.weights.empty()) continue;
      const auto& gw = rec.w_grad[static_cast<size_t>(l)];
      auto& vw = w_vel_[static_cast<size_t>(l)];
      for (int64_t i = 0; i < layer.weights.numel(); ++i) {
        vw[i] = momentum_ * vw[i] - lr_ * gw[i];
        layer.weights[i] += vw[i];
      }
      if (!layer.bias.empty()) {
        const auto& gb = rec.b_grad[static_cast<size_t>(l)];
        auto& vb = b_vel_[static_cast<size_t>(l)];
        for (int64_t i = 0; i < layer.bias.numel(); ++i) {
          vb[i] = momentum_ * vb[i] - lr_ * gb[i];
          layer.bias[i] += vb[i];
        }
      }
      freeze_masked(net, mask, l);
    }
  }

  // Re-zeroes masked weights, biases and velocities of layer l.
  void freeze_masked(NetworkGraph<T>& net, const PruneMask& mask, int l) {
    auto& layer = net.layers[static_cast<size_t>(l)];
    const auto& om = mask.out[static_cast<size_t>(l)];
    const int64_t block = layer.weights.numel() / layer.spec.out_channels;
    if (!om.empty()) {
      for (int o = 0; o < layer.spec.out_channels; ++o) {
        if (!om[static_cast<size_t>(o)]) continue;
        const int64_t off = static_cast<int64_t>(o) * block;
        for (int64_t i = 0; i < block; ++i) {
          layer.weights[off + i] = T(0);
          w_vel_[static_cast<size_t>(l)][off + i] = T(0);
        }
        if (!layer.bias.empty()) {
          layer.bias[o] = T(0);
          b_vel_[static_cast<size_t>(l)][o] = T(0);
        }
      }
    }
    const auto in_mask = net.input_mask(mask, l);
    if (!in_mask.empty()) {
      const int k2 = layer.spec.kernel * layer.spec.kernel;
      for (int o = 0; o < layer.spec.out_channels; ++o) {
        for (int i = 0; i < layer.spec.in_channels; ++i) {
          if (!in_mask[static_cast<size_t>(i)]) continue;
          const int64_t off = (static_cast<int64_t>(o) * layer.spec.in_channels + i) * k2;
          for (int j = 0; j < k2; ++j) {
            layer.weights[off + j] = T(0);
            w_vel_[static_cast<size_t>(l)][off + j] = T(0);
          }
        }
      }
    }
  }

 private:
  T lr_, momentum_;
  std::vector<Tensor<T>> w_vel_, b_vel_;
};

// Seeded minibatch stream: reshuffles the view's indices each epoch with its
// own RNG stream, so a training run is a pure function of (data, seed).
template <typename T>
class BatchStream {
 public:
  BatchStream(const DataView<T>& view, int batch_size, uint64_t seed)
      : view_(view), batch_size_(batch_size), rng_(Rng::derive(seed, "batch-stream")) {
    check(view_.size() >= 1, "BatchStream: empty data view");
    order_ = view_.indices;
    rng_.shuffle(order_);
  }

  Batch<T> next() {
    const int n = std::min(batch_size_, static_cast<int>(order_.size()));
    Batch<T> b;
    const Dims d = view_.data->dims();
    b.inputs = Tensor<T>({n, d.c, d.h, d.w});
    b.labels.resize(static_cast<size_t>(n));
    const int64_t stride = d.count();
    for (int i = 0; i < n; ++i) {
      if (pos_ >= order_.size()) {
        rng_.shuffle(order_);
        pos_ = 0;
      }
      const int32_t src = order_[pos_++];
      const T* from = view_.data->images.data() + static_cast<int64_t>(src) * stride;
      std::copy(from, from + stride, b.inputs.data() + static_cast<int64_t>(i) * stride);
      b.labels[static_cast<size_t>(i)] = view_.data->labels[static_cast<size_t>(src)];
    }
    return b;
  }

 private:
  DataView<T> view_;
  int batch_size_;
  Rng rng_;
  std::vector<int32_t> order_;
  size_t pos_ = 0;
};

}  // namespace prunetax
