#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prunetax/autodiff.hpp"
#include "prunetax/network.hpp"

namespace prunetax {

// One point in the four-axis taxonomy: base input x pointwise metric x
// reduction x scaling, S(C_i) = (1/L) * R(F(X)).
enum class BaseInput { weights, activations };
enum class Pointwise { value, gradient, taylor1, taylor2_full, taylor2_2nd_only, indicator_positive };
enum class HessianVariant { none, app1, app2 };
enum class Reduction { sum, l1, abs_of_sum, sum_of_squares, square_of_sum, l2 };
enum class Scaling { none, cardinality, layerwise_l1, layerwise_l2, weights_removed };

// Which feature map stands in for a channel's output: the rectified map that
// pruning actually removes (default) or the raw convolution output.
enum class ActivationTap { post_nonlinearity, conv_output };

struct SignalSpec {
  BaseInput base = BaseInput::weights;
  Pointwise pointwise = Pointwise::value;
  HessianVariant hessian = HessianVariant::none;
  Reduction reduction = Reduction::sum;
  Scaling scaling = Scaling::none;

  bool needs_gradient() const {
    return pointwise == Pointwise::gradient || pointwise == Pointwise::taylor1 ||
           pointwise == Pointwise::taylor2_full || pointwise == Pointwise::taylor2_2nd_only;
  }
  bool needs_hessian() const {
    return pointwise == Pointwise::taylor2_full || pointwise == Pointwise::taylor2_2nd_only;
  }
  // Weight-value-only signals can be evaluated from the checkpoint alone.
  bool needs_data() const { return base == BaseInput::activations || needs_gradient(); }

  std::string id() const;
  static SignalSpec parse(const std::string& id);

  bool operator==(const SignalSpec&) const = default;
};

namespace detail {

inline const char* base_token(BaseInput b) {
  return b == BaseInput::weights ? "weights" : "activations";
}
inline const char* pointwise_token(Pointwise p) {
  switch (p) {
    case Pointwise::value: return "value";
    case Pointwise::gradient: return "gradient";
    case Pointwise::taylor1: return "taylor1";
    case Pointwise::taylor2_full: return "taylor2_full";
    case Pointwise::taylor2_2nd_only: return "taylor2_2nd_only";
    case Pointwise::indicator_positive: return "indicator_positive";
  }
  return "?";
}
inline const char* reduction_token(Reduction r) {
  switch (r) {
    case Reduction::sum: return "sum";
    case Reduction::l1: return "l1";
    case Reduction::abs_of_sum: return "abs_of_sum";
    case Reduction::sum_of_squares: return "sum_of_squares";
    case Reduction::square_of_sum: return "square_of_sum";
    case Reduction::l2: return "l2";
  }
  return "?";
}
inline const char* scaling_token(Scaling s) {
  switch (s) {
    case Scaling::none: return "none";
    case Scaling::cardinality: return "cardinality";
    case Scaling::layerwise_l1: return "layerwise_l1";
    case Scaling::layerwise_l2: return "layerwise_l2";
    case Scaling::weights_removed: return "weights_removed";
  }
  return "?";
}

template <typename E>
std::optional<E> token_to(const std::string& tok);

template <>
inline std::optional<BaseInput> token_to<BaseInput>(const std::string& t) {
  if (t == "weights") return BaseInput::weights;
  if (t == "activations") return BaseInput::activations;
  return std::nullopt;
}
template <>
inline std::optional<Pointwise> token_to<Pointwise>(const std::string& t) {
  if (t == "value") return Pointwise::value;
  if (t == "gradient") return Pointwise::gradient;
  if (t == "taylor1") return Pointwise::taylor1;
  if (t == "taylor2_full") return Pointwise::taylor2_full;
  if (t == "taylor2_2nd_only") return Pointwise::taylor2_2nd_only;
  if (t == "indicator_positive") return Pointwise::indicator_positive;
  return std::nullopt;
}
template <>
inline std::optional<HessianVariant> token_to<HessianVariant>(const std::string& t) {
  if (t == "app1") return HessianVariant::app1;
  if (t == "app2") return HessianVariant::app2;
  return std::nullopt;
}
template <>
inline std::optional<Reduction> token_to<Reduction>(const std::string& t) {
  if (t == "sum") return Reduction::sum;
  if (t == "l1") return Reduction::l1;
  if (t == "abs_of_sum") return Reduction::abs_of_sum;
  if (t == "sum_of_squares") return Reduction::sum_of_squares;
  if (t == "square_of_sum") return Reduction::square_of_sum;
  if (t == "l2") return Reduction::l2;
  return std::nullopt;
}
template <>
inline std::optional<Scaling> token_to<Scaling>(const std::string& t) {
  if (t == "none") return Scaling::none;
  if (t == "cardinality") return Scaling::cardinality;
  if (t == "layerwise_l1") return Scaling::layerwise_l1;
  if (t == "layerwise_l2") return Scaling::layerwise_l2;
  if (t == "weights_removed") return Scaling::weights_removed;
  return std::nullopt;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

// Stable id grammar: base.pointwise[.hessvariant].reduction.scaling
inline std::string SignalSpec::id() const {
  std::string s = detail::base_token(base);
  s += '.';
  s += detail::pointwise_token(pointwise);
  if (hessian != HessianVariant::none) {
    s += '.';
    s += (hessian == HessianVariant::app1 ? "app1" : "app2");
  }
  s += '.';
  s += detail::reduction_token(reduction);
  s += '.';
  s += detail::scaling_token(scaling);
  return s;
}

inline SignalSpec SignalSpec::parse(const std::string& id) {
  const auto parts = detail::split(id, '.');
  check(parts.size() == 4 || parts.size() == 5,
        strf("signal id '%s' does not match base.pointwise[.hessvariant].reduction.scaling",
             id.c_str()));
  SignalSpec spec;
  auto base = detail::token_to<BaseInput>(parts[0]);
  auto pw = detail::token_to<Pointwise>(parts[1]);
  check(base.has_value(), strf("signal id '%s': unknown base '%s'", id.c_str(), parts[0].c_str()));
  check(pw.has_value(), strf("signal id '%s': unknown pointwise '%s'", id.c_str(), parts[1].c_str()));
  spec.base = *base;
  spec.pointwise = *pw;
  size_t next = 2;
  if (spec.needs_hessian()) {
    check(parts.size() == 5, strf("signal id '%s': hessian variant required", id.c_str()));
    auto hv = detail::token_to<HessianVariant>(parts[2]);
    check(hv.has_value(), strf("signal id '%s': unknown hessian variant '%s'", id.c_str(),
                               parts[2].c_str()));
    spec.hessian = *hv;
    next = 3;
  } else {
    check(parts.size() == 4,
          strf("signal id '%s': hessian variant only valid for taylor2 metrics", id.c_str()));
  }
  auto red = detail::token_to<Reduction>(parts[next]);
  auto sc = detail::token_to<Scaling>(parts[next + 1]);
  check(red.has_value(),
        strf("signal id '%s': unknown reduction '%s'", id.c_str(), parts[next].c_str()));
  check(sc.has_value(),
        strf("signal id '%s': unknown scaling '%s'", id.c_str(), parts[next + 1].c_str()));
  spec.reduction = *red;
  spec.scaling = *sc;
  return spec;
}

// Pointwise saliency f(x). taylor1/taylor2 use the negative convention of the
// loss-change expansion (predicted increase in loss when the element is
// zeroed); sign-insensitive reductions make the published rows identical
// under either sign. indicator_positive maps x == 0 to 0 (a non-firing unit).
inline double pointwise_eval(const SignalSpec& spec, double x, std::optional<double> g1,
                             std::optional<double> g2) {
  switch (spec.pointwise) {
    case Pointwise::value:
      return x;
    case Pointwise::indicator_positive:
      return x > 0.0 ? 1.0 : 0.0;
    case Pointwise::gradient:
      check(g1.has_value(), "pointwise_eval: gradient required but missing");
      return *g1;
    case Pointwise::taylor1:
      check(g1.has_value(), "pointwise_eval: gradient required but missing");
      return -x * *g1;
    case Pointwise::taylor2_full:
      check(g1.has_value(), "pointwise_eval: gradient required but missing");
      check(g2.has_value(), "pointwise_eval: second derivative required but missing");
      return -x * *g1 + 0.5 * x * x * *g2;
    case Pointwise::taylor2_2nd_only:
      check(g2.has_value(), "pointwise_eval: second derivative required but missing");
      return 0.5 * x * x * *g2;
  }
  fail("pointwise_eval: bad metric");
}

// Channel reduction R over the pointwise saliencies.
inline double reduce(Reduction r, const std::vector<double>& values) {
  check(!values.empty(), "reduce: empty value vector");
  double s = 0.0;
  switch (r) {
    case Reduction::sum:
      for (double v : values) s += v;
      return s;
    case Reduction::l1:
      for (double v : values) s += std::fabs(v);
      return s;
    case Reduction::abs_of_sum:
      for (double v : values) s += v;
      return std::fabs(s);
    case Reduction::sum_of_squares:
      for (double v : values) s += v * v;
      return s;
    case Reduction::square_of_sum:
      for (double v : values) s += v;
      return s * s;
    case Reduction::l2:
      for (double v : values) s += v * v;
      return std::sqrt(s);
  }
  fail("reduce: bad reduction");
}

struct LayerScaleContext {
  int64_t cardinality = 0;                // card(X) for this layer's channels
  const std::vector<double>* reduced = nullptr;  // all S~ of the layer
  int64_t weights_removed = 0;            // weights removed by pruning one channel
};

struct ScaleResult {
  double denom = 1.0;
  bool fallback = false;  // layerwise denominator was zero, L := 1
};

inline ScaleResult scale_denominator(Scaling s, const LayerScaleContext& ctx) {
  switch (s) {
    case Scaling::none:
      return {1.0, false};
    case Scaling::cardinality:
      check(ctx.cardinality > 0, "scale_denominator: cardinality missing");
      return {static_cast<double>(ctx.cardinality), false};
    case Scaling::layerwise_l1: {
      check(ctx.reduced != nullptr, "scale_denominator: layer saliencies missing");
      double d = 0.0;
      for (double v : *ctx.reduced) d += std::fabs(v);
      return d == 0.0 ? ScaleResult{1.0, true} : ScaleResult{d, false};
    }
    case Scaling::layerwise_l2: {
      check(ctx.reduced != nullptr, "scale_denominator: layer saliencies missing");
      double d = 0.0;
      for (double v : *ctx.reduced) d += v * v;
      d = std::sqrt(d);
      return d == 0.0 ? ScaleResult{1.0, true} : ScaleResult{d, false};
    }
    case Scaling::weights_removed:
      check(ctx.weights_removed > 0, "scale_denominator: weights-removed count missing");
      return {static_cast<double>(ctx.weights_removed), false};
  }
  fail("scale_denominator: bad scaling");
}

// Parameters removed by pruning channel i of layer l: the channel's own
// filter block and bias plus the matching input slice of every consumer
// (both tensors shrink, Fig.-1 coupling). Identical for every channel of a
// layer, so the channel index is not needed.
template <typename T>
int64_t weights_removed_count(const NetworkGraph<T>& net, int l) {
  const auto& spec = net.layers[static_cast<size_t>(l)].spec;
  int64_t n = static_cast<int64_t>(spec.in_channels) * spec.kernel * spec.kernel;
  if (spec.has_bias) n += 1;
  for (const ConsumerSlice& c : net.consumers[static_cast<size_t>(l)]) {
    const auto& cs = net.layers[static_cast<size_t>(c.layer)].spec;
    n += static_cast<int64_t>(cs.out_channels) * c.features_per_channel * cs.kernel * cs.kernel;
  }
  return n;
}

// Per-channel saliencies of every prunable layer. Pruned channels are
// excluded from candidacy and contribute S~ = 0 to the layerwise
// denominators.
struct LayerSaliency {
  int layer = -1;
  std::vector<double> reduced;    // S~(C_i)
  std::vector<double> saliency;   // S(C_i) = S~ / L
  std::vector<uint8_t> excluded;  // already pruned
  double denom = 1.0;             // L, shared across the layer's channels
  bool denom_fallback = false;
};

struct SaliencyMap {
  std::vector<LayerSaliency> layers;
  bool denom_fallback = false;

  const LayerSaliency* find(int layer) const {
    for (const auto& ls : layers)
      if (ls.layer == layer) return &ls;
    return nullptr;
  }
};

// Evaluates S(C_i) for every unpruned channel. `avg` is the batch-averaged
// ActivationRecord from the evaluation set; it may be null for signals that
// need no data (weight value/indicator metrics).
template <typename T>
SaliencyMap channel_saliency(const NetworkGraph<T>& net, const ActivationRecord<T>* avg,
                             const SignalSpec& spec, const PruneMask& mask,
                             ActivationTap tap = ActivationTap::post_nonlinearity) {
  if (spec.needs_data())
    check(avg != nullptr, strf("signal %s requires evaluation data", spec.id().c_str()));
  if (avg != nullptr) {
    if (spec.needs_gradient())
      check(avg->has_grad, strf("signal %s requires gradients (run backward)", spec.id().c_str()));
    if (spec.needs_hessian()) {
      if (spec.hessian == HessianVariant::app1)
        check(avg->has_h1, strf("signal %s requires app.1 second derivatives", spec.id().c_str()));
      else
        check(avg->has_h2, strf("signal %s requires app.2 second derivatives", spec.id().c_str()));
    }
  }

  SaliencyMap map;
  std::vector<double> vals;
  for (int l = 0; l < net.layer_count(); ++l) {
    if (!net.prunable(l)) continue;
    const auto& layer = net.layers[static_cast<size_t>(l)];
    const int m = layer.spec.out_channels;
    LayerSaliency ls;
    ls.layer = l;
    ls.reduced.assign(static_cast<size_t>(m), 0.0);
    ls.saliency.assign(static_cast<size_t>(m), 0.0);
    ls.excluded.assign(static_cast<size_t>(m), 0);
    int64_t cardinality = 0;

    for (int i = 0; i < m; ++i) {
      if (mask.pruned(l, i)) {
        ls.excluded[static_cast<size_t>(i)] = 1;  // S~ stays 0
        continue;
      }
      vals.clear();
      if (spec.base == BaseInput::weights) {
        const Tensor<T>& w = layer.weights;
        const int64_t block = w.numel() / m;
        cardinality = block;
        const int64_t off = static_cast<int64_t>(i) * block;
        const Tensor<T>* g1t = spec.needs_gradient() ? &avg->w_grad[static_cast<size_t>(l)] : nullptr;
        const Tensor<T>* g2t = nullptr;
        if (spec.needs_hessian())
          g2t = spec.hessian == HessianVariant::app1 ? &avg->w_h1[static_cast<size_t>(l)]
                                                     : &avg->w_h2[static_cast<size_t>(l)];
        for (int64_t j = 0; j < block; ++j) {
          const double x = static_cast<double>(w[off + j]);
          std::optional<double> g1, g2;
          if (g1t) g1 = static_cast<double>((*g1t)[off + j]);
          if (g2t) g2 = static_cast<double>((*g2t)[off + j]);
          vals.push_back(pointwise_eval(spec, x, g1, g2));
        }
      } else {
        const int t = tap == ActivationTap::post_nonlinearity ? net.post_tap[static_cast<size_t>(l)] : l;
        const Tensor<T>& a = avg->act[static_cast<size_t>(t)];
        const int n = a.dim(0), hw = a.dim(2) * a.dim(3);
        cardinality = static_cast<int64_t>(n) * hw;
        const Tensor<T>* g1t = spec.needs_gradient() ? &avg->act_grad[static_cast<size_t>(t)] : nullptr;
        const Tensor<T>* g2t = nullptr;
        if (spec.needs_hessian())
          g2t = spec.hessian == HessianVariant::app1 ? &avg->act_h1[static_cast<size_t>(t)]
                                                     : &avg->act_h2[static_cast<size_t>(t)];
        for (int b = 0; b < n; ++b) {
          const int64_t off = a.idx4(b, i, 0, 0);
          for (int j = 0; j < hw; ++j) {
            const double x = static_cast<double>(a[off + j]);
            std::optional<double> g1, g2;
            if (g1t) g1 = static_cast<double>((*g1t)[off + j]);
            if (g2t) g2 = static_cast<double>((*g2t)[off + j]);
            vals.push_back(pointwise_eval(spec, x, g1, g2));
          }
        }
      }
      ls.reduced[static_cast<size_t>(i)] = reduce(spec.reduction, vals);
    }

    LayerScaleContext ctx;
    ctx.cardinality = cardinality;
    ctx.reduced = &ls.reduced;
    ctx.weights_removed = weights_removed_count(net, l);
    const ScaleResult sr = scale_denominator(spec.scaling, ctx);
    ls.denom = sr.denom;
    ls.denom_fallback = sr.fallback;
    map.denom_fallback = map.denom_fallback || sr.fallback;
    for (int i = 0; i < m; ++i)
      ls.saliency[static_cast<size_t>(i)] = ls.reduced[static_cast<size_t>(i)] / ls.denom;
    map.layers.push_back(std::move(ls));
  }
  return map;
}

struct ValidityRules {
  // Drop combinations whose channel saliency provably equals an already
  // listed one: for nonnegative pointwise outputs (indicator_positive and
  // the app.2-only second-order term) l1 and |sum| collapse to sum, and for
  // the 0/1 indicator sum-of-squares collapses to sum as well.
  bool drop_equivalent = true;
};

inline constexpr int kFullGridSignalCount = 480;   // 2 x 8 x 6 x 5
inline constexpr int kDefaultSignalCount = 430;    // after equivalence pruning

// Deterministic, duplicate-free enumeration of the taxonomy grid.
inline std::vector<SignalSpec> enumerate_signals(const ValidityRules& rules = {}) {
  static constexpr BaseInput kBases[] = {BaseInput::weights, BaseInput::activations};
  static constexpr Pointwise kPointwise[] = {
      Pointwise::value,        Pointwise::gradient,
      Pointwise::taylor1,      Pointwise::taylor2_full,
      Pointwise::taylor2_2nd_only, Pointwise::indicator_positive};
  static constexpr Reduction kReductions[] = {Reduction::sum,          Reduction::l1,
                                              Reduction::abs_of_sum,   Reduction::sum_of_squares,
                                              Reduction::square_of_sum, Reduction::l2};
  static constexpr Scaling kScalings[] = {Scaling::none, Scaling::cardinality,
                                          Scaling::layerwise_l1, Scaling::layerwise_l2,
                                          Scaling::weights_removed};
  std::vector<SignalSpec> out;
  for (BaseInput b : kBases) {
    for (Pointwise p : kPointwise) {
      std::vector<HessianVariant> variants;
      if (p == Pointwise::taylor2_full || p == Pointwise::taylor2_2nd_only)
        variants = {HessianVariant::app1, HessianVariant::app2};
      else
        variants = {HessianVariant::none};
      for (HessianVariant h : variants) {
        const bool nonneg = p == Pointwise::indicator_positive ||
                            (p == Pointwise::taylor2_2nd_only && h == HessianVariant::app2);
        for (Reduction r : kReductions) {
          if (rules.drop_equivalent && nonneg &&
              (r == Reduction::l1 || r == Reduction::abs_of_sum))
            continue;
          if (rules.drop_equivalent && p == Pointwise::indicator_positive &&
              r == Reduction::sum_of_squares)
            continue;
          for (Scaling s : kScalings) out.push_back({b, p, h, r, s});
        }
      }
    }
  }
  return out;
}

struct PublishedSignal {
  std::string name;
  SignalSpec spec;
  std::string note;
};

// The eight published channel-saliency signals expressed as taxonomy points.
// Fisher's constant factor 2 is normalized to L = 1: constant scalings leave
// every channel ranking unchanged.
inline const std::vector<PublishedSignal>& published_catalog() {
  static const std::vector<PublishedSignal> catalog = {
      {"L1-norm of weights",
       {BaseInput::weights, Pointwise::value, HessianVariant::none, Reduction::l1, Scaling::none},
       ""},
      {"Min-Weight",
       {BaseInput::weights, Pointwise::value, HessianVariant::none, Reduction::sum_of_squares,
        Scaling::cardinality},
       ""},
      {"APoZ",
       {BaseInput::activations, Pointwise::indicator_positive, HessianVariant::none,
        Reduction::sum, Scaling::cardinality},
       ""},
      {"Fisher Information",
       {BaseInput::activations, Pointwise::taylor1, HessianVariant::none,
        Reduction::square_of_sum, Scaling::none},
       "constant scaling 2 normalized to 1"},
      {"1st Order Taylor",
       {BaseInput::activations, Pointwise::taylor1, HessianVariant::none, Reduction::abs_of_sum,
        Scaling::cardinality},
       ""},
      {"1st Order Taylor, w. norm",
       {BaseInput::activations, Pointwise::taylor1, HessianVariant::none, Reduction::abs_of_sum,
        Scaling::layerwise_l2},
       ""},
      {"Average of gradient",
       {BaseInput::activations, Pointwise::gradient, HessianVariant::none, Reduction::sum,
        Scaling::cardinality},
       ""},
      {"L2 norm of activations",
       {BaseInput::activations, Pointwise::value, HessianVariant::none, Reduction::l2,
        Scaling::none},
       ""},
  };
  return catalog;
}

inline SignalSpec published_signal(const std::string& name) {
  for (const auto& p : published_catalog())
    if (p.name == name) return p.spec;
  std::string valid;
  for (const auto& p : published_catalog()) {
    if (!valid.empty()) valid += "; ";
    valid += p.name;
  }
  fail(strf("unknown published signal '%s' (valid: %s)", name.c_str(), valid.c_str()));
}

// Closest enumerated ids by edit distance, for error messages.
inline std::vector<std::string> nearest_signal_ids(const std::string& id, int k = 3) {
  auto dist = [](const std::string& a, const std::string& b) {
    std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
      cur[0] = i;
      for (size_t j = 1; j <= b.size(); ++j) {
        const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
        cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
      }
      std::swap(prev, cur);
    }
    return prev[b.size()];
  };
  std::vector<std::pair<size_t, std::string>> scored;
  for (const auto& s : enumerate_signals()) {
    const std::string sid = s.id();
    scored.emplace_back(dist(id, sid), sid);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (int i = 0; i < k && i < static_cast<int>(scored.size()); ++i)
    out.push_back(scored[static_cast<size_t>(i)].second);
  return out;
}

}  // namespace prunetax
