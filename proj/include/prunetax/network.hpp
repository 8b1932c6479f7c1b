#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "prunetax/common.hpp"
#include "prunetax/rng.hpp"
#include "prunetax/tensor.hpp"

namespace prunetax {

enum class LayerKind { conv, relu, maxpool, gap, dense, flatten };
enum class LossKind { softmax_xent, mse };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::gap: return "gap";
    case LayerKind::dense: return "dense";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;   // square
  int stride = 1;
  int pad = 0;
  bool has_bias = true;
};

struct Dims {
  int c = 0, h = 0, w = 0;
  int64_t count() const { return static_cast<int64_t>(c) * h * w; }
  bool operator==(const Dims&) const = default;
};

template <typename T>
struct Layer {
  LayerSpec spec;
  Tensor<T> weights;  // conv/dense: [out, in, k, k]
  Tensor<T> bias;     // [out], empty when has_bias is false
};

// Channel coupling along the chain (Fig.-1 semantics): pruning output channel
// i of a producer removes the i-th input slice of each consumer. A dense
// consumer fed through flatten absorbs a block of features_per_channel
// inputs per producer channel.
struct ConsumerSlice {
  int layer = -1;
  int features_per_channel = 1;
};

// Output-channel prune mask, one bool vector per parameterized layer.
// Input-channel masks of consumers are derived through the graph wiring.
struct PruneMask {
  std::vector<std::vector<uint8_t>> out;  // indexed by layer, empty for non-param layers

  bool pruned(int layer, int channel) const {
    return !out[static_cast<size_t>(layer)].empty() &&
           out[static_cast<size_t>(layer)][static_cast<size_t>(channel)] != 0;
  }
  int pruned_count(int layer) const {
    const auto& v = out[static_cast<size_t>(layer)];
    return static_cast<int>(std::count(v.begin(), v.end(), uint8_t(1)));
  }
  bool any() const {
    for (const auto& v : out)
      for (uint8_t b : v)
        if (b) return true;
    return false;
  }
};

// Linear chain of layers. Branching is not supported; the wiring tables are
// list-valued so a producer may in principle feed several consumers, but the
// builders here only ever produce chains.
template <typename T>
class NetworkGraph {
 public:
  std::vector<Layer<T>> layers;
  LossKind loss_kind = LossKind::softmax_xent;
  Dims input_dims;
  int num_classes = 0;

  // Derived by finalize().
  std::vector<Dims> out_dims;                        // per layer
  std::vector<std::vector<ConsumerSlice>> consumers; // per layer (param layers)
  std::vector<ConsumerSlice> producer;               // per layer: who feeds my input channels
  std::vector<int> post_tap;                         // per layer: trailing relu index, else self

  int layer_count() const { return static_cast<int>(layers.size()); }

  bool is_param_layer(int l) const {
    const LayerKind k = layers[static_cast<size_t>(l)].spec.kind;
    return k == LayerKind::conv || k == LayerKind::dense;
  }
  // Only convolution channels are pruning candidates.
  bool prunable(int l) const {
    return layers[static_cast<size_t>(l)].spec.kind == LayerKind::conv;
  }

  Dims in_dims(int l) const {
    return l == 0 ? input_dims : out_dims[static_cast<size_t>(l - 1)];
  }

  PruneMask empty_mask() const {
    PruneMask m;
    m.out.resize(layers.size());
    for (size_t l = 0; l < layers.size(); ++l) {
      if (is_param_layer(static_cast<int>(l)))
        m.out[l].assign(static_cast<size_t>(layers[l].spec.out_channels), 0);
    }
    return m;
  }

  // Shape-checks the chain, allocates missing parameter tensors, and builds
  // the channel wiring tables.
  void finalize() {
    check(!layers.empty(), "network has no layers");
    out_dims.assign(layers.size(), Dims{});
    Dims d = input_dims;
    check(d.c > 0 && d.h > 0 && d.w > 0, "network input dims must be positive");
    for (int l = 0; l < layer_count(); ++l) {
      auto& layer = layers[static_cast<size_t>(l)];
      const auto& s = layer.spec;
      switch (s.kind) {
        case LayerKind::conv:
        case LayerKind::dense: {
          check(s.out_channels >= 1 && s.kernel >= 1,
                strf("layer %d (%s): out_channels and kernel must be >= 1", l,
                     layer_kind_name(s.kind)));
          if (s.kind == LayerKind::dense)
            check(d.h == 1 && d.w == 1,
                  strf("layer %d (dense): input must be flattened to 1x1 spatial, got %dx%d",
                       l, d.h, d.w));
          check(s.in_channels == d.c,
                strf("layer %d (%s): in_channels %d does not match producer channels %d", l,
                     layer_kind_name(s.kind), s.in_channels, d.c));
          const std::vector<int> wshape = {s.out_channels, s.in_channels, s.kernel, s.kernel};
          if (layer.weights.empty()) {
            layer.weights = Tensor<T>(wshape);
          } else {
            check(layer.weights.shape() == wshape,
                  strf("layer %d (%s): weight shape mismatch", l, layer_kind_name(s.kind)));
          }
          if (s.has_bias) {
            if (layer.bias.empty()) layer.bias = Tensor<T>({s.out_channels});
            check(layer.bias.numel() == s.out_channels,
                  strf("layer %d (%s): bias length %lld != out_channels %d", l,
                       layer_kind_name(s.kind),
                       static_cast<long long>(layer.bias.numel()), s.out_channels));
          }
          const int oh = (d.h + 2 * s.pad - s.kernel) / s.stride + 1;
          const int ow = (d.w + 2 * s.pad - s.kernel) / s.stride + 1;
          check(oh >= 1 && ow >= 1,
                strf("layer %d (%s): kernel %d stride %d pad %d does not fit input %dx%d", l,
                     layer_kind_name(s.kind), s.kernel, s.stride, s.pad, d.h, d.w));
          d = Dims{s.out_channels, oh, ow};
          break;
        }
        case LayerKind::relu:
          break;
        case LayerKind::maxpool: {
          check(s.kernel >= 1 && s.stride >= 1,
                strf("layer %d (maxpool): bad kernel/stride", l));
          const int oh = (d.h - s.kernel) / s.stride + 1;
          const int ow = (d.w - s.kernel) / s.stride + 1;
          check(oh >= 1 && ow >= 1,
                strf("layer %d (maxpool): window %d stride %d does not fit input %dx%d", l,
                     s.kernel, s.stride, d.h, d.w));
          d = Dims{d.c, oh, ow};
          break;
        }
        case LayerKind::gap:
          d = Dims{d.c, 1, 1};
          break;
        case LayerKind::flatten:
          d = Dims{static_cast<int>(d.count()), 1, 1};
          break;
      }
      out_dims[static_cast<size_t>(l)] = d;
    }

    // Channel wiring: walk forward through channel-preserving layers to the
    // next parameterized consumer.
    consumers.assign(layers.size(), {});
    producer.assign(layers.size(), ConsumerSlice{});
    for (int l = 0; l < layer_count(); ++l) {
      if (!is_param_layer(l)) continue;
      Dims cur = out_dims[static_cast<size_t>(l)];
      int fpc = 1;
      for (int t = l + 1; t < layer_count(); ++t) {
        const LayerKind k = layers[static_cast<size_t>(t)].spec.kind;
        if (k == LayerKind::conv || k == LayerKind::dense) {
          consumers[static_cast<size_t>(l)].push_back({t, fpc});
          producer[static_cast<size_t>(t)] = {l, fpc};
          break;
        }
        if (k == LayerKind::flatten) {
          fpc *= cur.h * cur.w;
        }
        cur = out_dims[static_cast<size_t>(t)];
      }
    }

    // Activation tap: the feature map actually removed by pruning is the
    // post-nonlinearity output, so skip past a trailing relu.
    post_tap.assign(layers.size(), 0);
    for (int l = 0; l < layer_count(); ++l) {
      int t = l;
      while (t + 1 < layer_count() &&
             layers[static_cast<size_t>(t + 1)].spec.kind == LayerKind::relu)
        ++t;
      post_tap[static_cast<size_t>(l)] = t;
    }
  }

  // Derived input-channel mask of layer l (empty when nothing is masked).
  std::vector<uint8_t> input_mask(const PruneMask& mask, int l) const {
    std::vector<uint8_t> in;
    const ConsumerSlice& p = producer[static_cast<size_t>(l)];
    if (p.layer < 0) return in;
    const auto& src = mask.out[static_cast<size_t>(p.layer)];
    if (src.empty() || std::none_of(src.begin(), src.end(), [](uint8_t b) { return b != 0; }))
      return in;
    in.assign(static_cast<size_t>(layers[static_cast<size_t>(l)].spec.in_channels), 0);
    for (size_t i = 0; i < src.size(); ++i) {
      if (!src[i]) continue;
      for (int f = 0; f < p.features_per_channel; ++f)
        in[i * static_cast<size_t>(p.features_per_channel) + static_cast<size_t>(f)] = 1;
    }
    return in;
  }
};

template <typename T>
struct Batch {
  Tensor<T> inputs;         // [n, c, h, w]
  std::vector<int> labels;  // class ids, for softmax_xent / accuracy
  Tensor<T> targets;        // [n, k] targets, for mse

  int size() const { return inputs.empty() ? 0 : inputs.dim(0); }
};

// Everything forward/backward produces for one batch. Derivative tensors are
// shape-congruent with their value tensors; app.1/app.2 are the two diagonal
// second-order estimators.
template <typename T>
struct ActivationRecord {
  Tensor<T> input;
  std::vector<int> labels;
  Tensor<T> targets;

  std::vector<Tensor<T>> act;  // per layer output
  Tensor<T> probs;             // softmax probabilities [n, k] (softmax_xent)
  T loss = T(0);
  std::vector<std::vector<int32_t>> pool_argmax;  // per maxpool layer

  bool has_grad = false;
  std::vector<Tensor<T>> act_grad, w_grad, b_grad;
  Tensor<T> input_grad;

  bool has_h1 = false;
  std::vector<Tensor<T>> act_h1, w_h1, b_h1;

  bool has_h2 = false;
  std::vector<Tensor<T>> act_h2, w_h2, b_h2;
};

namespace detail {

// Cross-correlation (no kernel flip): y[n,o,oh,ow] = b[o] +
//   sum_{i,kh,kw} W[o,i,kh,kw] * x[n, i, oh*stride - pad + kh, ow*stride - pad + kw].
// Masked output channels are skipped entirely (their maps stay exactly zero);
// masked input channels are skipped so the stored values at masked positions
// can never influence the output.
template <typename T>
void conv2d_kernel(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, int stride,
                   int pad, const std::vector<uint8_t>& out_mask,
                   const std::vector<uint8_t>& in_mask, Tensor<T>& y) {
  const int n = x.dim(0), ci = x.dim(1), ih = x.dim(2), iw = x.dim(3);
  const int co = w.dim(0), k = w.dim(2);
  const int oh = y.dim(2), ow = y.dim(3);
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < co; ++o) {
      if (!out_mask.empty() && out_mask[static_cast<size_t>(o)]) continue;
      T* yrow = &y.at4(b, o, 0, 0);
      const T bv = bias.empty() ? T(0) : bias[o];
      for (int p = 0; p < oh * ow; ++p) yrow[p] = bv;
      for (int i = 0; i < ci; ++i) {
        if (!in_mask.empty() && in_mask[static_cast<size_t>(i)]) continue;
        const T* xch = &x.at4(b, i, 0, 0);
        const T* wrow = &w.at4(o, i, 0, 0);
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const T wv = wrow[kh * k + kw];
            if (wv == T(0)) continue;
            for (int y0 = 0; y0 < oh; ++y0) {
              const int xh = y0 * stride - pad + kh;
              if (xh < 0 || xh >= ih) continue;
              const T* xr = xch + static_cast<int64_t>(xh) * iw;
              T* yr = yrow + static_cast<int64_t>(y0) * ow;
              for (int x0 = 0; x0 < ow; ++x0) {
                const int xw = x0 * stride - pad + kw;
                if (xw < 0 || xw >= iw) continue;
                yr[x0] += wv * xr[xw];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void relu_kernel(const Tensor<T>& x, Tensor<T>& y) {
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

// Ties pick the first maximal element in row-major window order so the
// backward routing is deterministic.
template <typename T>
void maxpool_kernel(const Tensor<T>& x, int k, int stride, Tensor<T>& y,
                    std::vector<int32_t>& argmax) {
  const int n = x.dim(0), c = x.dim(1), ih = x.dim(2), iw = x.dim(3);
  const int oh = y.dim(2), ow = y.dim(3);
  argmax.assign(static_cast<size_t>(y.numel()), 0);
  size_t oi = 0;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const T* xch = &x.at4(b, ch, 0, 0);
      for (int y0 = 0; y0 < oh; ++y0) {
        for (int x0 = 0; x0 < ow; ++x0, ++oi) {
          T best = -std::numeric_limits<T>::infinity();
          int32_t best_idx = 0;
          for (int kh = 0; kh < k; ++kh) {
            const int xh = y0 * stride + kh;
            for (int kw = 0; kw < k; ++kw) {
              const int xw = x0 * stride + kw;
              const T v = xch[xh * iw + xw];
              if (v > best) {
                best = v;
                best_idx = static_cast<int32_t>(x.idx4(b, ch, xh, xw));
              }
            }
          }
          y[static_cast<int64_t>(oi)] = best;
          argmax[oi] = best_idx;
        }
      }
    }
  }
}

template <typename T>
void gap_kernel(const Tensor<T>& x, Tensor<T>& y) {
  const int n = x.dim(0), c = x.dim(1);
  const int hw = x.dim(2) * x.dim(3);
  const T inv = T(1) / static_cast<T>(hw);
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const T* xch = &x.at4(b, ch, 0, 0);
      T s = T(0);
      for (int i = 0; i < hw; ++i) s += xch[i];
      y.at4(b, ch, 0, 0) = s * inv;
    }
  }
}

template <typename T>
void softmax_rows(const Tensor<T>& logits, Tensor<T>& probs) {
  const int n = logits.dim(0);
  const int k = static_cast<int>(logits.numel() / n);
  for (int b = 0; b < n; ++b) {
    const T* z = logits.data() + static_cast<int64_t>(b) * k;
    T* p = probs.data() + static_cast<int64_t>(b) * k;
    T zmax = z[0];
    for (int i = 1; i < k; ++i) zmax = std::max(zmax, z[i]);
    T sum = T(0);
    for (int i = 0; i < k; ++i) {
      p[i] = std::exp(z[i] - zmax);
      sum += p[i];
    }
    const T inv = T(1) / sum;
    for (int i = 0; i < k; ++i) p[i] *= inv;
  }
}

}  // namespace detail

// Free-function convolution matching the kernel above; output shape
// [n, out, (h + 2 pad - k)/stride + 1, (w + 2 pad - k)/stride + 1].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                 int stride, int pad) {
  check(input.ndim() == 4, "conv2d: input must be [n,c,h,w]");
  check(weights.ndim() == 4, "conv2d: weights must be [out,in,k,k]");
  check(weights.dim(2) == weights.dim(3), "conv2d: kernel must be square");
  check(input.dim(1) == weights.dim(1),
        strf("conv2d: input channels %d != weight in-channels %d", input.dim(1),
             weights.dim(1)));
  if (!bias.empty())
    check(bias.numel() == weights.dim(0), "conv2d: bias length != out channels");
  const int k = weights.dim(2);
  const int oh = (input.dim(2) + 2 * pad - k) / stride + 1;
  const int ow = (input.dim(3) + 2 * pad - k) / stride + 1;
  check(oh >= 1 && ow >= 1, strf("conv2d: kernel %d does not fit input %dx%d with pad %d",
                                 k, input.dim(2), input.dim(3), pad));
  Tensor<T> out({input.dim(0), weights.dim(0), oh, ow});
  detail::conv2d_kernel(input, weights, bias, stride, pad, {}, {}, out);
  return out;
}

// Forward evaluation of the whole chain. Evaluates the tail starting at
// layer `from` when an injected activation is supplied (used by the
// finite-difference oracles); `from == -1` starts at the input.
template <typename T>
void forward_from(const NetworkGraph<T>& net, const PruneMask& mask, ActivationRecord<T>& rec,
                  int from) {
  const int L = net.layer_count();
  rec.act.resize(static_cast<size_t>(L));
  rec.pool_argmax.assign(static_cast<size_t>(L), {});
  const int n = rec.input.dim(0);
  for (int l = from + 1; l < L; ++l) {
    const auto& layer = net.layers[static_cast<size_t>(l)];
    const Tensor<T>& x = (l == 0) ? rec.input : rec.act[static_cast<size_t>(l - 1)];
    const Dims od = net.out_dims[static_cast<size_t>(l)];
    Tensor<T>& y = rec.act[static_cast<size_t>(l)];
    y = Tensor<T>({n, od.c, od.h, od.w});
    switch (layer.spec.kind) {
      case LayerKind::conv:
      case LayerKind::dense: {
        const auto& om = mask.out[static_cast<size_t>(l)];
        detail::conv2d_kernel(x, layer.weights, layer.bias, layer.spec.stride, layer.spec.pad,
                              om, net.input_mask(mask, l), y);
        break;
      }
      case LayerKind::relu:
        detail::relu_kernel(x, y);
        break;
      case LayerKind::maxpool:
        detail::maxpool_kernel(x, layer.spec.kernel, layer.spec.stride, y,
                               rec.pool_argmax[static_cast<size_t>(l)]);
        break;
      case LayerKind::gap:
        detail::gap_kernel(x, y);
        break;
      case LayerKind::flatten:
        y = x;
        y.reshape({n, od.c, 1, 1});
        break;
    }
  }

  // Loss over the final output, averaged over the batch.
  const Tensor<T>& out = rec.act.back();
  const int k = static_cast<int>(out.numel() / n);
  double loss = 0.0;
  if (net.loss_kind == LossKind::softmax_xent) {
    check(static_cast<int>(rec.labels.size()) == n, "forward: labels missing for softmax_xent");
    rec.probs = Tensor<T>({n, k});
    detail::softmax_rows(out, rec.probs);
    for (int b = 0; b < n; ++b) {
      const int t = rec.labels[static_cast<size_t>(b)];
      check(t >= 0 && t < k, strf("forward: label %d out of range [0,%d)", t, k));
      loss -= std::log(static_cast<double>(rec.probs[static_cast<int64_t>(b) * k + t]));
    }
    loss /= n;
  } else {
    check(rec.targets.numel() == out.numel(), "forward: mse targets shape mismatch");
    for (int64_t i = 0; i < out.numel(); ++i) {
      const double d = static_cast<double>(out[i]) - static_cast<double>(rec.targets[i]);
      loss += 0.5 * d * d;
    }
    loss /= n;
  }
  rec.loss = static_cast<T>(loss);
  if (!std::isfinite(loss)) {
    for (int l = 0; l < L; ++l) {
      if (!rec.act[static_cast<size_t>(l)].all_finite())
        fail(strf("forward: non-finite values first appear at layer %d (%s)", l,
                  layer_kind_name(net.layers[static_cast<size_t>(l)].spec.kind)));
    }
    fail("forward: non-finite loss");
  }
}

template <typename T>
ActivationRecord<T> forward(const NetworkGraph<T>& net, const Batch<T>& batch,
                            const PruneMask& mask) {
  check(batch.size() >= 1, "forward: empty batch");
  check(batch.inputs.dim(1) == net.input_dims.c && batch.inputs.dim(2) == net.input_dims.h &&
            batch.inputs.dim(3) == net.input_dims.w,
        strf("forward: batch shape [%d,%d,%d] does not match network input [%d,%d,%d]",
             batch.inputs.dim(1), batch.inputs.dim(2), batch.inputs.dim(3), net.input_dims.c,
             net.input_dims.h, net.input_dims.w));
  ActivationRecord<T> rec;
  rec.input = batch.inputs;
  rec.labels = batch.labels;
  rec.targets = batch.targets;
  forward_from(net, mask, rec, -1);
  return rec;
}

template <typename T>
ActivationRecord<T> forward(const NetworkGraph<T>& net, const Batch<T>& batch) {
  return forward(net, batch, net.empty_mask());
}

// Top-1 accuracy over a stream of batches; argmax ties break to the lowest
// class index.
template <typename T>
int count_correct(const NetworkGraph<T>& net, const PruneMask& mask, const Batch<T>& batch) {
  ActivationRecord<T> rec = forward(net, batch, mask);
  const Tensor<T>& out = rec.act.back();
  const int n = batch.size();
  const int k = static_cast<int>(out.numel() / n);
  int correct = 0;
  for (int b = 0; b < n; ++b) {
    const T* z = out.data() + static_cast<int64_t>(b) * k;
    int arg = 0;
    for (int i = 1; i < k; ++i)
      if (z[i] > z[arg]) arg = i;
    if (arg == batch.labels[static_cast<size_t>(b)]) ++correct;
  }
  return correct;
}

template <typename T>
double accuracy(const NetworkGraph<T>& net, const PruneMask& mask,
                const std::vector<Batch<T>>& batches) {
  check(net.loss_kind == LossKind::softmax_xent, "accuracy: requires classification loss");
  int64_t correct = 0, total = 0;
  for (const auto& b : batches) {
    correct += count_correct(net, mask, b);
    total += b.size();
  }
  check(total > 0, "accuracy: empty dataset");
  return static_cast<double>(correct) / static_cast<double>(total);
}

// He-style init for relu chains.
template <typename T>
void init_weights(NetworkGraph<T>& net, Rng& rng) {
  for (auto& layer : net.layers) {
    if (layer.weights.empty()) continue;
    const auto& s = layer.spec;
    const double fan_in = static_cast<double>(s.in_channels) * s.kernel * s.kernel;
    const double stddev = std::sqrt(2.0 / fan_in);
    for (int64_t i = 0; i < layer.weights.numel(); ++i)
      layer.weights[i] = static_cast<T>(rng.normal(0.0, stddev));
    if (!layer.bias.empty()) layer.bias.fill(T(0));
  }
}

// The two named desk-scale architectures. Layer tables scale with the input
// dims read from the dataset header.
template <typename T>
NetworkGraph<T> make_lenet5_like(Dims input, int num_classes) {
  NetworkGraph<T> net;
  net.input_dims = input;
  net.num_classes = num_classes;
  net.loss_kind = LossKind::softmax_xent;
  auto add = [&](LayerSpec s) { net.layers.push_back({s, {}, {}}); };
  add({LayerKind::conv, input.c, 6, 5, 1, 2, true});
  add({LayerKind::relu});
  add({LayerKind::maxpool, 0, 0, 2, 2, 0, false});
  add({LayerKind::conv, 6, 16, 5, 1, 0, true});
  add({LayerKind::relu});
  add({LayerKind::maxpool, 0, 0, 2, 2, 0, false});
  add({LayerKind::flatten});
  // Spatial size after the two conv/pool stages.
  const int h1 = (input.h + 2 * 2 - 5) / 1 + 1;
  const int p1 = (h1 - 2) / 2 + 1;
  const int h2 = (p1 - 5) / 1 + 1;
  const int p2 = (h2 - 2) / 2 + 1;
  const int w1 = (input.w + 2 * 2 - 5) / 1 + 1;
  const int q1 = (w1 - 2) / 2 + 1;
  const int w2 = (q1 - 5) / 1 + 1;
  const int q2 = (w2 - 2) / 2 + 1;
  const int feat = 16 * p2 * q2;
  add({LayerKind::dense, feat, 48, 1, 1, 0, true});
  add({LayerKind::relu});
  add({LayerKind::dense, 48, num_classes, 1, 1, 0, true});
  net.finalize();
  return net;
}

template <typename T>
NetworkGraph<T> make_cifar10_quick_like(Dims input, int num_classes) {
  NetworkGraph<T> net;
  net.input_dims = input;
  net.num_classes = num_classes;
  net.loss_kind = LossKind::softmax_xent;
  auto add = [&](LayerSpec s) { net.layers.push_back({s, {}, {}}); };
  add({LayerKind::conv, input.c, 8, 5, 1, 2, true});
  add({LayerKind::relu});
  add({LayerKind::maxpool, 0, 0, 2, 2, 0, false});
  add({LayerKind::conv, 8, 16, 5, 1, 2, true});
  add({LayerKind::relu});
  add({LayerKind::maxpool, 0, 0, 2, 2, 0, false});
  add({LayerKind::conv, 16, 32, 3, 1, 1, true});
  add({LayerKind::relu});
  add({LayerKind::gap});
  add({LayerKind::flatten});
  add({LayerKind::dense, 32, num_classes, 1, 1, 0, true});
  net.finalize();
  return net;
}

template <typename T>
NetworkGraph<T> make_model(const std::string& name, Dims input, int num_classes) {
  if (name == "lenet5-like") return make_lenet5_like<T>(input, num_classes);
  if (name == "cifar10-quick-like") return make_cifar10_quick_like<T>(input, num_classes);
  fail(strf("unknown model '%s' (valid: lenet5-like, cifar10-quick-like)", name.c_str()));
}

}  // namespace prunetax
