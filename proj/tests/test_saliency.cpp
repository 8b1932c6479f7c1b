#include <algorithm>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "support/test_support.hpp"

using namespace prunetax;
using namespace prunetax::testing;

TEST_CASE("pointwise metrics") {
  SignalSpec spec;
  SECTION("taylor1") {
    spec.pointwise = Pointwise::taylor1;
    REQUIRE(pointwise_eval(spec, 2.0, 0.3, std::nullopt) == -0.6);
  }
  SECTION("taylor2_full") {
    spec.pointwise = Pointwise::taylor2_full;
    spec.hessian = HessianVariant::app1;
    REQUIRE_THAT(pointwise_eval(spec, 2.0, 0.3, 0.1),
                 Catch::Matchers::WithinRel(-0.4, 1e-14));
    // Dyadic variant is exact: -2*0.25 + 2*0.125 = -0.25.
    REQUIRE(pointwise_eval(spec, 2.0, 0.25, 0.125) == -0.25);
  }
  SECTION("taylor2_2nd_only") {
    spec.pointwise = Pointwise::taylor2_2nd_only;
    spec.hessian = HessianVariant::app2;
    REQUIRE(pointwise_eval(spec, 2.0, std::nullopt, 0.5) == 1.0);
  }
  SECTION("indicator maps zero and negatives to 0") {
    spec.pointwise = Pointwise::indicator_positive;
    REQUIRE(pointwise_eval(spec, -1.0, std::nullopt, std::nullopt) == 0.0);
    REQUIRE(pointwise_eval(spec, 0.0, std::nullopt, std::nullopt) == 0.0);
    REQUIRE(pointwise_eval(spec, 1e-300, std::nullopt, std::nullopt) == 1.0);
  }
  SECTION("value and gradient") {
    spec.pointwise = Pointwise::value;
    REQUIRE(pointwise_eval(spec, -3.5, std::nullopt, std::nullopt) == -3.5);
    spec.pointwise = Pointwise::gradient;
    REQUIRE(pointwise_eval(spec, -3.5, 0.75, std::nullopt) == 0.75);
  }
  SECTION("missing derivatives are errors") {
    spec.pointwise = Pointwise::taylor1;
    REQUIRE_THROWS_AS(pointwise_eval(spec, 1.0, std::nullopt, std::nullopt), Error);
    spec.pointwise = Pointwise::taylor2_full;
    REQUIRE_THROWS_AS(pointwise_eval(spec, 1.0, 0.5, std::nullopt), Error);
  }
}

TEST_CASE("reductions") {
  REQUIRE(reduce(Reduction::sum, {1, -1}) == 0.0);
  REQUIRE(reduce(Reduction::l1, {1, -2, 3}) == 6.0);
  REQUIRE(reduce(Reduction::abs_of_sum, {1, -2}) == 1.0);
  REQUIRE(reduce(Reduction::sum_of_squares, {1, -1, 2}) == 6.0);
  REQUIRE(reduce(Reduction::square_of_sum, {1, 2}) == 9.0);
  REQUIRE(reduce(Reduction::l2, {3, 4}) == 5.0);
  REQUIRE_THROWS_WITH(reduce(Reduction::sum, {}),
                      Catch::Matchers::ContainsSubstring("empty"));

  SECTION("nonnegative-output reductions") {
    Rng rng(40);
    std::vector<double> v(17);
    for (auto& x : v) x = rng.normal();
    for (Reduction r : {Reduction::l1, Reduction::abs_of_sum, Reduction::sum_of_squares,
                        Reduction::square_of_sum, Reduction::l2})
      REQUIRE(reduce(r, v) >= 0.0);
  }
}

TEST_CASE("scaling denominators") {
  LayerScaleContext ctx;
  SECTION("none is 1") { REQUIRE(scale_denominator(Scaling::none, ctx).denom == 1.0); }
  SECTION("cardinality of a 3x3x2 weight block") {
    ctx.cardinality = 18;
    REQUIRE(scale_denominator(Scaling::cardinality, ctx).denom == 18.0);
  }
  SECTION("layerwise l2 of [3, 4]") {
    std::vector<double> reduced = {3.0, 4.0};
    ctx.reduced = &reduced;
    REQUIRE(scale_denominator(Scaling::layerwise_l2, ctx).denom == 5.0);
  }
  SECTION("all-zero layer saliencies fall back to 1 with a flag") {
    std::vector<double> reduced = {0.0, 0.0};
    ctx.reduced = &reduced;
    const auto r = scale_denominator(Scaling::layerwise_l1, ctx);
    REQUIRE(r.denom == 1.0);
    REQUIRE(r.fallback);
  }
}

namespace {

// conv(2 ch) -> relu -> flatten -> dense toy used by channel_saliency tests.
NetworkGraph<double> weight_toy(const std::vector<double>& ch0, const std::vector<double>& ch1) {
  NetworkGraph<double> net;
  const int k = static_cast<int>(ch0.size());
  net.input_dims = {k, 1, 1};
  net.num_classes = 2;
  net.loss_kind = LossKind::softmax_xent;
  net.layers.push_back({{LayerKind::conv, k, 2, 1, 1, 0, true}, {}, {}});
  net.layers.push_back({{LayerKind::relu}, {}, {}});
  net.layers.push_back({{LayerKind::flatten}, {}, {}});
  net.layers.push_back({{LayerKind::dense, 2, 2, 1, 1, 0, true}, {}, {}});
  net.finalize();
  for (int j = 0; j < k; ++j) {
    net.layers[0].weights[j] = ch0[static_cast<size_t>(j)];
    net.layers[0].weights[k + j] = ch1[static_cast<size_t>(j)];
  }
  return net;
}

}  // namespace

TEST_CASE("channel_saliency on weight-based signals") {
  SECTION("Table 2: L1-norm of weights") {
    const auto net = weight_toy({0.5, -0.5}, {0.25, 0.25});
    const auto map = channel_saliency<double>(net, nullptr, published_signal("L1-norm of weights"),
                                              net.empty_mask());
    REQUIRE(map.layers.size() == 1);
    REQUIRE(map.layers[0].saliency[0] == 1.0);
    REQUIRE(map.layers[0].saliency[1] == 0.5);
  }
  SECTION("Table 2: Min-Weight") {
    const auto net = weight_toy({1.0, -1.0, 2.0}, {0.5, 0.5, 0.5});
    const auto map =
        channel_saliency<double>(net, nullptr, published_signal("Min-Weight"), net.empty_mask());
    REQUIRE(map.layers[0].saliency[0] == 2.0);  // (1 + 1 + 4) / 3
    REQUIRE(map.layers[0].saliency[1] == 0.25);
  }
  SECTION("identical weights give identical saliencies") {
    const auto net = weight_toy({0.3, -0.7, 0.1}, {0.3, -0.7, 0.1});
    for (const auto& spec : enumerate_signals()) {
      if (spec.base != BaseInput::weights || spec.needs_data()) continue;
      const auto map = channel_saliency<double>(net, nullptr, spec, net.empty_mask());
      REQUIRE(map.layers[0].saliency[0] == map.layers[0].saliency[1]);
    }
  }
  SECTION("sign-flip symmetry for even reductions") {
    const auto base = weight_toy({0.3, -0.7, 0.1}, {-0.2, 0.9, 0.4});
    auto flipped = base;
    for (int j = 0; j < 3; ++j) flipped.layers[0].weights[j] = -base.layers[0].weights[j];
    SignalSpec spec;
    spec.base = BaseInput::weights;
    spec.pointwise = Pointwise::value;
    for (Reduction r : {Reduction::l1, Reduction::sum_of_squares, Reduction::square_of_sum,
                        Reduction::l2}) {
      spec.reduction = r;
      const auto m1 = channel_saliency<double>(base, nullptr, spec, base.empty_mask());
      const auto m2 = channel_saliency<double>(flipped, nullptr, spec, flipped.empty_mask());
      REQUIRE(m1.layers[0].saliency[0] == m2.layers[0].saliency[0]);
    }
  }
  SECTION("data-dependent signals demand a record") {
    const auto net = weight_toy({0.5, -0.5}, {0.25, 0.25});
    REQUIRE_THROWS_WITH(
        channel_saliency<double>(net, nullptr, published_signal("APoZ"), net.empty_mask()),
        Catch::Matchers::ContainsSubstring("requires evaluation data"));
  }
  SECTION("missing hessian fields are reported") {
    const auto net = weight_toy({0.5, -0.5}, {0.25, 0.25});
    Batch<double> batch;
    batch.inputs = Tensor<double>({1, 2, 1, 1}, {1.0, -1.0});
    batch.labels = {0};
    auto rec = forward(net, batch);
    backward(net, rec);
    SignalSpec spec = SignalSpec::parse("weights.taylor2_full.app1.sum.none");
    REQUIRE_THROWS_WITH(channel_saliency<double>(net, &rec, spec, net.empty_mask()),
                        Catch::Matchers::ContainsSubstring("app.1"));
  }
}

TEST_CASE("Table 2 catalog matches hand computation on the fixed toy") {
  const Table2Toy toy = make_table2_toy();
  const PruneMask mask = toy.net.empty_mask();
  for (const auto& exp : toy.expected) {
    const SignalSpec spec = published_signal(exp.name);
    const auto map = channel_saliency<double>(toy.net, &toy.record, spec, mask,
                                              ActivationTap::conv_output);
    INFO(exp.name);
    REQUIRE(map.layers.size() == 1);
    REQUIRE(map.layers[0].saliency[0] == exp.ch0);
    REQUIRE(map.layers[0].saliency[1] == exp.ch1);
  }
}

TEST_CASE("exact Taylor oracle: single linear layer + mse") {
  // The loss is quadratic, so -w g + w^2/2 h (app.1) equals the measured
  // loss change from zeroing one weight.
  NetworkGraph<double> net;
  net.input_dims = {4, 1, 1};
  net.num_classes = 3;
  net.loss_kind = LossKind::mse;
  net.layers.push_back({{LayerKind::dense, 4, 3, 1, 1, 0, true}, {}, {}});
  net.finalize();
  Rng rng(91);
  for (int64_t i = 0; i < net.layers[0].weights.numel(); ++i)
    net.layers[0].weights[i] = rng.normal();
  Batch<double> batch;
  batch.inputs = Tensor<double>({3, 4, 1, 1});
  for (int64_t i = 0; i < batch.inputs.numel(); ++i) batch.inputs[i] = rng.normal();
  batch.targets = Tensor<double>({3, 3});
  for (int64_t i = 0; i < batch.targets.numel(); ++i) batch.targets[i] = rng.normal();

  const PruneMask mask = net.empty_mask();
  auto rec = forward(net, batch, mask);
  backward(net, mask, rec);
  hessian_diag_app1(net, mask, rec);

  SignalSpec spec = SignalSpec::parse("weights.taylor2_full.app1.sum.none");
  for (int64_t i = 0; i < net.layers[0].weights.numel(); ++i) {
    const double w = net.layers[0].weights[i];
    const double predicted = pointwise_eval(spec, w, rec.w_grad[0][i], rec.w_h1[0][i]);
    auto zeroed = net;
    zeroed.layers[0].weights[i] = 0.0;
    const double measured = forward(zeroed, batch, mask).loss - rec.loss;
    REQUIRE(rel_err(measured, predicted) < 1e-6);
  }
}

TEST_CASE("signal enumeration") {
  SECTION("full grid is 2 x 8 x 6 x 5 = 480") {
    ValidityRules rules;
    rules.drop_equivalent = false;
    REQUIRE(enumerate_signals(rules).size() == kFullGridSignalCount);
  }
  SECTION("default rules ship the documented constant, >= 360") {
    const auto signals = enumerate_signals();
    REQUIRE(signals.size() == kDefaultSignalCount);
    REQUIRE(signals.size() >= 360);
  }
  SECTION("duplicate-free, deterministic, and ids round-trip") {
    const auto a = enumerate_signals();
    const auto b = enumerate_signals();
    REQUIRE(a.size() == b.size());
    std::set<std::string> ids;
    for (size_t i = 0; i < a.size(); ++i) {
      REQUIRE(a[i] == b[i]);
      REQUIRE(SignalSpec::parse(a[i].id()) == a[i]);
      ids.insert(a[i].id());
    }
    REQUIRE(ids.size() == a.size());
  }
  SECTION("every published row is enumerated") {
    const auto signals = enumerate_signals();
    for (const auto& p : published_catalog())
      REQUIRE(std::find(signals.begin(), signals.end(), p.spec) != signals.end());
  }
  SECTION("dropped combinations are value-equal to kept ones") {
    // The equivalence rules only prune reductions that provably coincide for
    // nonnegative pointwise outputs; verify on random data.
    Rng rng(17);
    std::vector<double> indicator(25), nonneg(25);
    for (auto& v : indicator) v = rng.uniform() < 0.4 ? 0.0 : 1.0;
    for (auto& v : nonneg) v = rng.uniform() * 2.0;  // app.2-only outputs are x^2/2 g^2 >= 0
    for (const auto& v : {indicator, nonneg}) {
      REQUIRE(reduce(Reduction::l1, v) == reduce(Reduction::sum, v));
      REQUIRE(reduce(Reduction::abs_of_sum, v) == reduce(Reduction::sum, v));
    }
    REQUIRE(reduce(Reduction::sum_of_squares, indicator) == reduce(Reduction::sum, indicator));
    const auto def = enumerate_signals();
    ValidityRules full_rules;
    full_rules.drop_equivalent = false;
    for (const auto& spec : enumerate_signals(full_rules)) {
      const bool kept = std::find(def.begin(), def.end(), spec) != def.end();
      const bool nonneg_pw =
          spec.pointwise == Pointwise::indicator_positive ||
          (spec.pointwise == Pointwise::taylor2_2nd_only && spec.hessian == HessianVariant::app2);
      const bool dropped_reduction =
          (nonneg_pw && (spec.reduction == Reduction::l1 || spec.reduction == Reduction::abs_of_sum)) ||
          (spec.pointwise == Pointwise::indicator_positive &&
           spec.reduction == Reduction::sum_of_squares);
      REQUIRE(kept == !dropped_reduction);
    }
  }
}

TEST_CASE("published signal lookup") {
  SECTION("APoZ mapping") {
    const SignalSpec s = published_signal("APoZ");
    REQUIRE(s.base == BaseInput::activations);
    REQUIRE(s.pointwise == Pointwise::indicator_positive);
    REQUIRE(s.reduction == Reduction::sum);
    REQUIRE(s.scaling == Scaling::cardinality);
  }
  SECTION("Fisher Information mapping") {
    const SignalSpec s = published_signal("Fisher Information");
    REQUIRE(s.pointwise == Pointwise::taylor1);
    REQUIRE(s.reduction == Reduction::square_of_sum);
    REQUIRE(s.scaling == Scaling::none);
  }
  SECTION("L2 norm of activations mapping") {
    const SignalSpec s = published_signal("L2 norm of activations");
    REQUIRE(s.base == BaseInput::activations);
    REQUIRE(s.pointwise == Pointwise::value);
    REQUIRE(s.reduction == Reduction::l2);
    REQUIRE(s.scaling == Scaling::none);
  }
  SECTION("unknown name lists the catalog") {
    REQUIRE_THROWS_WITH(published_signal("OBD"),
                        Catch::Matchers::ContainsSubstring("APoZ") &&
                            Catch::Matchers::ContainsSubstring("Min-Weight"));
  }
}

TEST_CASE("signal id grammar") {
  REQUIRE(SignalSpec::parse("weights.value.l1.none").id() == "weights.value.l1.none");
  REQUIRE(SignalSpec::parse("activations.taylor2_full.app2.l2.cardinality").hessian ==
          HessianVariant::app2);
  REQUIRE_THROWS_AS(SignalSpec::parse("weights.value.l1"), Error);
  REQUIRE_THROWS_AS(SignalSpec::parse("weights.taylor2_full.l1.none"), Error);  // variant missing
  REQUIRE_THROWS_AS(SignalSpec::parse("weights.value.app1.l1.none"), Error);
  REQUIRE_THROWS_AS(SignalSpec::parse("pixels.value.l1.none"), Error);
  SECTION("nearest matches are sensible") {
    const auto near = nearest_signal_ids("weights.value.l1.nonee");
    REQUIRE(near[0] == "weights.value.l1.none");
  }
}

TEST_CASE("ranking is invariant under constant scaling of L") {
  const Table2Toy toy = make_table2_toy();
  const PruneMask mask = toy.net.empty_mask();
  for (const auto& name : {"L1-norm of weights", "Fisher Information", "1st Order Taylor"}) {
    const SignalSpec spec = published_signal(name);
    const auto map = channel_saliency<double>(toy.net, &toy.record, spec, mask,
                                              ActivationTap::conv_output);
    const auto& s = map.layers[0].saliency;
    // Divide every saliency by the same positive constant; the ordering of
    // channels cannot change.
    std::vector<size_t> order = {0, 1};
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return s[a] < s[b]; });
    std::vector<double> scaled = {s[0] / 7.5, s[1] / 7.5};
    std::vector<size_t> order2 = {0, 1};
    std::sort(order2.begin(), order2.end(),
              [&](size_t a, size_t b) { return scaled[a] < scaled[b]; });
    REQUIRE(order == order2);
  }
}

TEST_CASE("pruned channels are excluded and contribute zero to layer denominators") {
  const auto net = weight_toy({1.0, 1.0, 1.0}, {0.5, 0.5, 0.5});
  auto live = net;
  PruneMask mask = live.empty_mask();
  prune_channel(live, mask, 0, 0);
  SignalSpec spec = SignalSpec::parse("weights.value.l1.layerwise_l1");
  const auto map = channel_saliency<double>(live, nullptr, spec, mask);
  REQUIRE(map.layers[0].excluded[0] == 1);
  REQUIRE(map.layers[0].reduced[0] == 0.0);
  REQUIRE(map.layers[0].reduced[1] == 1.5);
  REQUIRE(map.layers[0].denom == 1.5);  // only the live channel contributes
  REQUIRE(map.layers[0].saliency[1] == 1.0);
}

TEST_CASE("weights_removed counts filter, bias and consumer slices") {
  // conv(1->3 k3) -> relu -> pool -> flatten -> dense: one channel removes
  // 9 filter weights + 1 bias + fpc dense columns x out rows.
  NetworkGraph<double> net;
  net.input_dims = {1, 4, 4};
  net.num_classes = 2;
  auto add = [&](LayerSpec s) { net.layers.push_back({s, {}, {}}); };
  add({LayerKind::conv, 1, 3, 3, 1, 1, true});
  add({LayerKind::relu});
  add({LayerKind::maxpool, 0, 0, 2, 2, 0, false});
  add({LayerKind::flatten});
  add({LayerKind::dense, 12, 2, 1, 1, 0, true});
  net.finalize();
  REQUIRE(weights_removed_count(net, 0) == 9 + 1 + 2 * 4);
}
