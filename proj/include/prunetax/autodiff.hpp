#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "prunetax/network.hpp"

namespace prunetax {

namespace detail {

// Shared index walk for the gradient and second-order convolution backward
// passes. Under the layer-diagonal assumption the second-order recurrence is
// the gradient recurrence with weights and inputs squared:
//   y = W x + b:   dL/dx_j    = sum_i W_ij   * dL/dy_i
//                  d2L/dx_j2  = sum_i W_ij^2 * d2L/dy_i2
//                  d2L/dW_ij2 = x_j^2 * d2L/dy_i2,  d2L/db_i2 = d2L/dy_i2
// (cross terms of the output Hessian are dropped; the pointwise-nonlinearity
// chain term g''(x) * dL/dy vanishes for the piecewise-linear layers here).
template <typename T, bool Squared>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad,
                     const std::vector<uint8_t>& out_mask, const std::vector<uint8_t>& in_mask,
                     const Tensor<T>& gy, Tensor<T>& gx, Tensor<T>& gw, Tensor<T>& gb,
                     bool has_bias) {
  const int n = x.dim(0), ci = x.dim(1), ih = x.dim(2), iw = x.dim(3);
  const int co = w.dim(0), k = w.dim(2);
  const int oh = gy.dim(2), ow = gy.dim(3);
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < co; ++o) {
      if (!out_mask.empty() && out_mask[static_cast<size_t>(o)]) continue;
      const T* gyrow = &gy.at4(b, o, 0, 0);
      if (has_bias) {
        T s = T(0);
        for (int p = 0; p < oh * ow; ++p) s += gyrow[p];
        gb[o] += s;
      }
      for (int i = 0; i < ci; ++i) {
        if (!in_mask.empty() && in_mask[static_cast<size_t>(i)]) continue;
        const T* xch = &x.at4(b, i, 0, 0);
        T* gxch = &gx.at4(b, i, 0, 0);
        const T* wrow = &w.at4(o, i, 0, 0);
        T* gwrow = &gw.at4(o, i, 0, 0);
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            T wv = wrow[kh * k + kw];
            if (Squared) wv *= wv;
            T acc = T(0);
            for (int y0 = 0; y0 < oh; ++y0) {
              const int xh = y0 * stride - pad + kh;
              if (xh < 0 || xh >= ih) continue;
              const T* xr = xch + static_cast<int64_t>(xh) * iw;
              T* gxr = gxch + static_cast<int64_t>(xh) * iw;
              const T* gyr = gyrow + static_cast<int64_t>(y0) * ow;
              for (int x0 = 0; x0 < ow; ++x0) {
                const int xw = x0 * stride - pad + kw;
                if (xw < 0 || xw >= iw) continue;
                const T g = gyr[x0];
                T xv = xr[xw];
                if (Squared) xv *= xv;
                acc += xv * g;
                gxr[xw] += wv * g;
              }
            }
            gwrow[kh * k + kw] += acc;
          }
        }
      }
    }
  }
}

template <typename T>
void alloc_like(std::vector<Tensor<T>>& dst, const std::vector<Tensor<T>>& src) {
  dst.resize(src.size());
  for (size_t i = 0; i < src.size(); ++i)
    dst[i] = src[i].empty() ? Tensor<T>() : Tensor<T>::zeros_like(src[i]);
}

// Seeds d/d(logits); factor 1/n makes saliencies batch-size independent.
template <typename T>
Tensor<T> loss_grad_seed(const NetworkGraph<T>& net, const ActivationRecord<T>& rec) {
  const Tensor<T>& out = rec.act.back();
  Tensor<T> g = Tensor<T>::zeros_like(out);
  const int n = out.dim(0);
  const int k = static_cast<int>(out.numel() / n);
  const T inv_n = T(1) / static_cast<T>(n);
  if (net.loss_kind == LossKind::softmax_xent) {
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < k; ++i) {
        const T p = rec.probs[static_cast<int64_t>(b) * k + i];
        const T y = (i == rec.labels[static_cast<size_t>(b)]) ? T(1) : T(0);
        g[static_cast<int64_t>(b) * k + i] = (p - y) * inv_n;
      }
  } else {
    for (int64_t i = 0; i < out.numel(); ++i) g[i] = (out[i] - rec.targets[i]) * inv_n;
  }
  return g;
}

// Exact diagonal of the loss Hessian with respect to the logits.
template <typename T>
Tensor<T> loss_hessian_seed(const NetworkGraph<T>& net, const ActivationRecord<T>& rec) {
  const Tensor<T>& out = rec.act.back();
  Tensor<T> h = Tensor<T>::zeros_like(out);
  const int n = out.dim(0);
  const int k = static_cast<int>(out.numel() / n);
  const T inv_n = T(1) / static_cast<T>(n);
  if (net.loss_kind == LossKind::softmax_xent) {
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < k; ++i) {
        const T p = rec.probs[static_cast<int64_t>(b) * k + i];
        h[static_cast<int64_t>(b) * k + i] = p * (T(1) - p) * inv_n;
      }
  } else {
    h.fill(inv_n);
  }
  return h;
}

// One reverse sweep shared by backward() and hessian_diag_app1().
template <typename T, bool Squared>
void reverse_sweep(const NetworkGraph<T>& net, const PruneMask& mask, ActivationRecord<T>& rec,
                   Tensor<T> seed, std::vector<Tensor<T>>& act_out,
                   std::vector<Tensor<T>>& w_out, std::vector<Tensor<T>>& b_out,
                   Tensor<T>& input_out) {
  const int L = net.layer_count();
  act_out.resize(static_cast<size_t>(L));
  w_out.resize(static_cast<size_t>(L));
  b_out.resize(static_cast<size_t>(L));
  for (int l = 0; l < L; ++l) {
    const auto& layer = net.layers[static_cast<size_t>(l)];
    if (!layer.weights.empty()) w_out[static_cast<size_t>(l)] = Tensor<T>::zeros_like(layer.weights);
    if (!layer.bias.empty()) b_out[static_cast<size_t>(l)] = Tensor<T>::zeros_like(layer.bias);
  }
  act_out[static_cast<size_t>(L - 1)] = std::move(seed);
  input_out = Tensor<T>::zeros_like(rec.input);

  for (int l = L - 1; l >= 0; --l) {
    const auto& layer = net.layers[static_cast<size_t>(l)];
    const Tensor<T>& x = (l == 0) ? rec.input : rec.act[static_cast<size_t>(l - 1)];
    const Tensor<T>& gy = act_out[static_cast<size_t>(l)];
    Tensor<T> gx = Tensor<T>::zeros_like(x);
    switch (layer.spec.kind) {
      case LayerKind::conv:
      case LayerKind::dense: {
        const auto& om = mask.out[static_cast<size_t>(l)];
        conv2d_backward<T, Squared>(x, layer.weights, layer.spec.stride, layer.spec.pad, om,
                                    net.input_mask(mask, l), gy, gx,
                                    w_out[static_cast<size_t>(l)], b_out[static_cast<size_t>(l)],
                                    !layer.bias.empty());
        break;
      }
      case LayerKind::relu: {
        for (int64_t i = 0; i < x.numel(); ++i) gx[i] = x[i] > T(0) ? gy[i] : T(0);
        break;
      }
      case LayerKind::maxpool: {
        const auto& arg = rec.pool_argmax[static_cast<size_t>(l)];
        check(!arg.empty(), "backward: missing maxpool routing (forward not run?)");
        for (int64_t i = 0; i < gy.numel(); ++i) gx[arg[static_cast<size_t>(i)]] += gy[i];
        break;
      }
      case LayerKind::gap: {
        const int n = x.dim(0), c = x.dim(1);
        const int hw = x.dim(2) * x.dim(3);
        T f = T(1) / static_cast<T>(hw);
        if (Squared) f *= f;
        for (int b = 0; b < n; ++b)
          for (int ch = 0; ch < c; ++ch) {
            const T g = gy.at4(b, ch, 0, 0) * f;
            T* gxch = &gx.at4(b, ch, 0, 0);
            for (int i = 0; i < hw; ++i) gxch[i] += g;
          }
        break;
      }
      case LayerKind::flatten: {
        gx = gy;
        gx.reshape(x.shape());
        break;
      }
    }
    if (l == 0)
      input_out = std::move(gx);
    else
      act_out[static_cast<size_t>(l - 1)] = std::move(gx);
  }
}

}  // namespace detail

// Fills dL/dx for every layer output and dL/dw, dL/db for every parameter.
// Gradients follow the batch-mean loss convention of forward().
template <typename T>
void backward(const NetworkGraph<T>& net, const PruneMask& mask, ActivationRecord<T>& rec) {
  check(!rec.act.empty(), "backward: forward record missing");
  Tensor<T> seed = detail::loss_grad_seed(net, rec);
  detail::reverse_sweep<T, false>(net, mask, rec, std::move(seed), rec.act_grad, rec.w_grad,
                                  rec.b_grad, rec.input_grad);
  rec.has_grad = true;
}

template <typename T>
void backward(const NetworkGraph<T>& net, ActivationRecord<T>& rec) {
  backward(net, net.empty_mask(), rec);
}

// app.1: layer-by-layer second-derivative backprop keeping only the diagonal
// terms (no Levenberg-Marquardt truncation). Seeds with the exact diagonal of
// the loss Hessian and propagates through the recurrence documented on
// conv2d_backward above.
template <typename T>
void hessian_diag_app1(const NetworkGraph<T>& net, const PruneMask& mask,
                       ActivationRecord<T>& rec) {
  check(!rec.act.empty(), "hessian_diag_app1: forward record missing");
  Tensor<T> seed = detail::loss_hessian_seed(net, rec);
  Tensor<T> input_h;
  detail::reverse_sweep<T, true>(net, mask, rec, std::move(seed), rec.act_h1, rec.w_h1,
                                 rec.b_h1, input_h);
  rec.has_h1 = true;
}

template <typename T>
void hessian_diag_app1(const NetworkGraph<T>& net, ActivationRecord<T>& rec) {
  hessian_diag_app1(net, net.empty_mask(), rec);
}

// app.2: Gauss-Newton diagonal realized as the elementwise squared gradient,
// for activations, weights and biases.
template <typename T>
void hessian_diag_app2(ActivationRecord<T>& rec) {
  check(rec.has_grad, "hessian_diag_app2: gradients missing (run backward first)");
  auto square_all = [](const std::vector<Tensor<T>>& src, std::vector<Tensor<T>>& dst) {
    dst.resize(src.size());
    for (size_t i = 0; i < src.size(); ++i) {
      if (src[i].empty()) {
        dst[i] = Tensor<T>();
        continue;
      }
      dst[i] = Tensor<T>::zeros_like(src[i]);
      for (int64_t j = 0; j < src[i].numel(); ++j) dst[i][j] = src[i][j] * src[i][j];
    }
  };
  square_all(rec.act_grad, rec.act_h2);
  square_all(rec.w_grad, rec.w_h2);
  square_all(rec.b_grad, rec.b_h2);
  rec.has_h2 = true;
}

// Arithmetic mean of records over batches ("if the saliency is dependent on
// batches of inputs, an average is used").
template <typename T>
class BatchAccumulator {
 public:
  void accumulate(const ActivationRecord<T>& rec) {
    if (count_ == 0) {
      sum_ = rec;
      sum_.labels.clear();
      sum_.targets = Tensor<T>();
      sum_.probs = Tensor<T>();
      sum_.pool_argmax.clear();
      count_ = 1;
      return;
    }
    check(rec.has_grad == sum_.has_grad && rec.has_h1 == sum_.has_h1 &&
              rec.has_h2 == sum_.has_h2,
          "accumulate: records carry different derivative sets");
    add_tensor(sum_.input, rec.input, "input");
    add_all(sum_.act, rec.act, "act");
    if (sum_.has_grad) {
      add_all(sum_.act_grad, rec.act_grad, "act_grad");
      add_all(sum_.w_grad, rec.w_grad, "w_grad");
      add_all(sum_.b_grad, rec.b_grad, "b_grad");
      add_tensor(sum_.input_grad, rec.input_grad, "input_grad");
    }
    if (sum_.has_h1) {
      add_all(sum_.act_h1, rec.act_h1, "act_h1");
      add_all(sum_.w_h1, rec.w_h1, "w_h1");
      add_all(sum_.b_h1, rec.b_h1, "b_h1");
    }
    if (sum_.has_h2) {
      add_all(sum_.act_h2, rec.act_h2, "act_h2");
      add_all(sum_.w_h2, rec.w_h2, "w_h2");
      add_all(sum_.b_h2, rec.b_h2, "b_h2");
    }
    sum_.loss += rec.loss;
    ++count_;
  }

  int count() const { return count_; }

  ActivationRecord<T> read_average() const {
    check(count_ >= 1, "read_average: no batches accumulated");
    ActivationRecord<T> avg = sum_;
    const T inv = T(1) / static_cast<T>(count_);
    scale_tensor(avg.input, inv);
    scale_all(avg.act, inv);
    scale_all(avg.act_grad, inv);
    scale_all(avg.w_grad, inv);
    scale_all(avg.b_grad, inv);
    scale_tensor(avg.input_grad, inv);
    scale_all(avg.act_h1, inv);
    scale_all(avg.w_h1, inv);
    scale_all(avg.b_h1, inv);
    scale_all(avg.act_h2, inv);
    scale_all(avg.w_h2, inv);
    scale_all(avg.b_h2, inv);
    avg.loss = sum_.loss * inv;
    return avg;
  }

 private:
  static void add_tensor(Tensor<T>& dst, const Tensor<T>& src, const char* what) {
    if (dst.empty() && src.empty()) return;
    check(dst.same_shape(src), strf("accumulate: %s shape drift between batches", what));
    for (int64_t i = 0; i < dst.numel(); ++i) dst[i] += src[i];
  }
  static void add_all(std::vector<Tensor<T>>& dst, const std::vector<Tensor<T>>& src,
                      const char* what) {
    check(dst.size() == src.size(), strf("accumulate: %s layer count drift", what));
    for (size_t i = 0; i < dst.size(); ++i) add_tensor(dst[i], src[i], what);
  }
  static void scale_tensor(Tensor<T>& t, T f) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] *= f;
  }
  static void scale_all(std::vector<Tensor<T>>& ts, T f) {
    for (auto& t : ts) scale_tensor(t, f);
  }

  ActivationRecord<T> sum_;
  int count_ = 0;
};

}  // namespace prunetax
