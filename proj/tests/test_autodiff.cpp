#include <catch2/catch_amalgamated.hpp>

#include "support/test_support.hpp"

using namespace prunetax;
using namespace prunetax::testing;

namespace {

// Single dense layer + mse with one sample; the quadratic workhorse.
NetworkGraph<double> linear_mse_net(int in, int out, bool bias = true) {
  NetworkGraph<double> net;
  net.input_dims = {in, 1, 1};
  net.num_classes = out;
  net.loss_kind = LossKind::mse;
  net.layers.push_back({{LayerKind::dense, in, out, 1, 1, 0, bias}, {}, {}});
  net.finalize();
  return net;
}

}  // namespace

TEST_CASE("backward on hand-checkable cases") {
  SECTION("relu routes gradient only through positive inputs") {
    // relu([-1, 2]) = [0, 2]; mse targets chosen so dL/dy = [1, 1].
    NetworkGraph<double> net;
    net.input_dims = {2, 1, 1};
    net.num_classes = 2;
    net.loss_kind = LossKind::mse;
    net.layers.push_back({{LayerKind::relu}, {}, {}});
    net.finalize();
    Batch<double> batch;
    batch.inputs = Tensor<double>({1, 2, 1, 1}, {-1.0, 2.0});
    batch.targets = Tensor<double>({1, 2}, {-1.0, 1.0});
    auto rec = forward(net, batch);
    backward(net, rec);
    REQUIRE(rec.input_grad[0] == 0.0);
    REQUIRE(rec.input_grad[1] == 1.0);
  }
  SECTION("single weight quadratic: loss (wx - t)^2 / 2, w=3, x=1, t=0") {
    NetworkGraph<double> net = linear_mse_net(1, 1, false);
    net.layers[0].weights[0] = 3.0;
    Batch<double> batch;
    batch.inputs = Tensor<double>({1, 1, 1, 1}, {1.0});
    batch.targets = Tensor<double>({1, 1}, {0.0});
    auto rec = forward(net, batch);
    REQUIRE(rec.loss == 4.5);
    backward(net, rec);
    REQUIRE(rec.w_grad[0][0] == 3.0);
  }
  SECTION("missing forward record is an error") {
    NetworkGraph<double> net = linear_mse_net(2, 2);
    ActivationRecord<double> rec;
    REQUIRE_THROWS_WITH(backward(net, rec),
                        Catch::Matchers::ContainsSubstring("forward record missing"));
  }
}

TEST_CASE("gradients match central finite differences on a random net") {
  NetworkGraph<double> net = make_fd_net(0);
  randomize(net, 101);
  const Batch<double> batch = random_batch(net, 2, 102);
  REQUIRE(fd_check_weight_gradients(net, batch, 1e-5) < 1e-4);
  REQUIRE(fd_check_activation_gradients(net, batch, 1e-5) < 1e-4);
}

TEST_CASE("app.1 second derivatives") {
  SECTION("single linear layer + mse: d2L/dW_ij^2 = x_j^2") {
    NetworkGraph<double> net = linear_mse_net(3, 2);
    Rng rng(9);
    for (int64_t i = 0; i < net.layers[0].weights.numel(); ++i)
      net.layers[0].weights[i] = rng.normal();
    Batch<double> batch;
    batch.inputs = Tensor<double>({1, 3, 1, 1}, {0.5, -2.0, 3.0});
    batch.targets = Tensor<double>({1, 2}, {1.0, -1.0});
    auto rec = forward(net, batch);
    backward(net, rec);
    hessian_diag_app1(net, rec);
    const double x2[3] = {0.25, 4.0, 9.0};
    for (int o = 0; o < 2; ++o)
      for (int j = 0; j < 3; ++j) REQUIRE(rec.w_h1[0][o * 3 + j] == x2[j]);
    REQUIRE(rec.b_h1[0][0] == 1.0);
  }
  SECTION("activation recurrence: d2L/dx_j^2 = sum_i W_ij^2 d2L/dy_i^2") {
    NetworkGraph<double> net;
    net.input_dims = {3, 1, 1};
    net.num_classes = 2;
    net.loss_kind = LossKind::mse;
    net.layers.push_back({{LayerKind::dense, 3, 2, 1, 1, 0, false}, {}, {}});
    net.layers.push_back({{LayerKind::dense, 2, 2, 1, 1, 0, false}, {}, {}});
    net.finalize();
    Rng rng(13);
    for (auto& layer : net.layers)
      for (int64_t i = 0; i < layer.weights.numel(); ++i) layer.weights[i] = rng.normal();
    Batch<double> batch;
    batch.inputs = Tensor<double>({1, 3, 1, 1}, {1.0, -0.5, 2.0});
    batch.targets = Tensor<double>({1, 2}, {0.5, 0.25});
    auto rec = forward(net, batch);
    backward(net, rec);
    hessian_diag_app1(net, rec);
    const auto& w2 = net.layers[1].weights;  // [2, 2, 1, 1]
    for (int j = 0; j < 2; ++j) {
      const double expect = w2[j] * w2[j] * 1.0 + w2[2 + j] * w2[2 + j] * 1.0;  // seeds 1/n = 1
      REQUIRE_THAT(rec.act_h1[0][j], Catch::Matchers::WithinRel(expect, 1e-14));
    }
  }
  SECTION("single conv layer + mse equals the finite-difference Hessian diagonal") {
    NetworkGraph<double> net;
    net.input_dims = {2, 4, 4};
    net.num_classes = 0;
    net.loss_kind = LossKind::mse;
    net.layers.push_back({{LayerKind::conv, 2, 3, 3, 1, 0, true}, {}, {}});
    net.finalize();
    randomize(net, 55);
    Batch<double> batch;
    batch.inputs = Tensor<double>({2, 2, 4, 4});
    Rng rng(56);
    for (int64_t i = 0; i < batch.inputs.numel(); ++i) batch.inputs[i] = rng.normal();
    batch.targets = Tensor<double>({2, 12});  // 3 channels x 2x2 output
    for (int64_t i = 0; i < batch.targets.numel(); ++i) batch.targets[i] = rng.normal();
    REQUIRE(fd_check_hessian_diag(net, batch, 1e-4) < 1e-3);
  }
  SECTION("all-zero activations into relu zero the upstream second derivatives") {
    NetworkGraph<double> net;
    net.input_dims = {2, 3, 3};
    net.num_classes = 2;
    net.loss_kind = LossKind::softmax_xent;
    auto add = [&](LayerSpec s) { net.layers.push_back({s, {}, {}}); };
    add({LayerKind::conv, 2, 2, 3, 1, 0, true});  // zero weights/bias -> zero output
    add({LayerKind::relu});
    add({LayerKind::flatten});
    add({LayerKind::dense, 2, 2, 1, 1, 0, true});
    net.finalize();
    Rng rng(3);
    for (int64_t i = 0; i < net.layers[3].weights.numel(); ++i)
      net.layers[3].weights[i] = rng.normal();
    Batch<double> batch = random_batch(net, 2, 4);
    auto rec = forward(net, batch);
    backward(net, rec);
    hessian_diag_app1(net, rec);
    for (int64_t i = 0; i < rec.act_h1[0].numel(); ++i) REQUIRE(rec.act_h1[0][i] == 0.0);
    for (int64_t i = 0; i < rec.w_h1[0].numel(); ++i) REQUIRE(rec.w_h1[0][i] == 0.0);
  }
}

TEST_CASE("app.2 is the elementwise squared gradient") {
  SECTION("hand values") {
    NetworkGraph<double> net = linear_mse_net(1, 1, false);
    net.layers[0].weights[0] = 3.0;
    Batch<double> batch;
    batch.inputs = Tensor<double>({1, 1, 1, 1}, {1.0});
    batch.targets = Tensor<double>({1, 1}, {0.0});
    auto rec = forward(net, batch);
    backward(net, rec);
    hessian_diag_app2(rec);
    REQUIRE(rec.w_h2[0][0] == 9.0);  // gradient 3 -> 9
  }
  SECTION("definitional property on a random net, and nonnegativity") {
    NetworkGraph<double> net = make_fd_net(2);
    randomize(net, 77);
    Batch<double> batch = random_batch(net, 3, 78);
    auto rec = forward(net, batch);
    backward(net, rec);
    hessian_diag_app2(rec);
    for (size_t l = 0; l < rec.act_grad.size(); ++l)
      for (int64_t i = 0; i < rec.act_grad[l].numel(); ++i) {
        REQUIRE(rec.act_h2[l][i] == rec.act_grad[l][i] * rec.act_grad[l][i]);
        REQUIRE(rec.act_h2[l][i] >= 0.0);
      }
    for (size_t l = 0; l < rec.w_grad.size(); ++l)
      for (int64_t i = 0; i < rec.w_grad[l].numel(); ++i) {
        REQUIRE(rec.w_h2[l][i] == rec.w_grad[l][i] * rec.w_grad[l][i]);
        REQUIRE(rec.w_h2[l][i] >= 0.0);
      }
  }
  SECTION("requires gradients") {
    ActivationRecord<double> rec;
    REQUIRE_THROWS_WITH(hessian_diag_app2(rec),
                        Catch::Matchers::ContainsSubstring("gradients missing"));
  }
}

TEST_CASE("batch accumulator") {
  NetworkGraph<double> net = make_fd_net(1);
  randomize(net, 31);
  auto make_rec = [&](uint64_t seed) {
    Batch<double> b = random_batch(net, 2, seed);
    auto rec = forward(net, b);
    backward(net, rec);
    return rec;
  };

  SECTION("one batch averages to itself") {
    auto rec = make_rec(1);
    BatchAccumulator<double> acc;
    acc.accumulate(rec);
    const auto avg = acc.read_average();
    REQUIRE(avg.loss == rec.loss);
    for (size_t l = 0; l < rec.act.size(); ++l)
      for (int64_t i = 0; i < rec.act[l].numel(); ++i) REQUIRE(avg.act[l][i] == rec.act[l][i]);
  }
  SECTION("k identical records average to the record") {
    auto rec = make_rec(2);
    BatchAccumulator<double> acc;
    for (int k = 0; k < 4; ++k) acc.accumulate(rec);
    const auto avg = acc.read_average();
    for (size_t l = 0; l < rec.w_grad.size(); ++l)
      for (int64_t i = 0; i < rec.w_grad[l].numel(); ++i)
        REQUIRE_THAT(avg.w_grad[l][i], Catch::Matchers::WithinRel(rec.w_grad[l][i], 1e-15));
  }
  SECTION("v and -v average to zero") {
    auto rec = make_rec(3);
    auto neg = rec;
    for (size_t l = 0; l < neg.act.size(); ++l)
      for (int64_t i = 0; i < neg.act[l].numel(); ++i) neg.act[l][i] = -neg.act[l][i];
    // Only the activation average is asserted; derivative tensors of `neg`
    // are left as-is to keep the record internally consistent in shape.
    BatchAccumulator<double> acc;
    acc.accumulate(rec);
    acc.accumulate(neg);
    const auto avg = acc.read_average();
    for (size_t l = 0; l < rec.act.size(); ++l)
      for (int64_t i = 0; i < rec.act[l].numel(); ++i) REQUIRE(avg.act[l][i] == 0.0);
  }
  SECTION("three random batches match an independent mean") {
    auto r1 = make_rec(4), r2 = make_rec(5), r3 = make_rec(6);
    BatchAccumulator<double> acc;
    acc.accumulate(r1);
    acc.accumulate(r2);
    acc.accumulate(r3);
    const auto avg = acc.read_average();
    for (size_t l = 0; l < r1.w_grad.size(); ++l)
      for (int64_t i = 0; i < r1.w_grad[l].numel(); ++i) {
        const double expect = (r1.w_grad[l][i] + r2.w_grad[l][i] + r3.w_grad[l][i]) / 3.0;
        REQUIRE_THAT(avg.w_grad[l][i],
                     Catch::Matchers::WithinRel(expect, 1e-14) ||
                         Catch::Matchers::WithinAbs(expect, 1e-300));
      }
  }
  SECTION("shape drift between batches is an error") {
    auto rec = make_rec(7);
    auto other = rec;
    other.input = Tensor<double>({1, 1, 8, 8});
    BatchAccumulator<double> acc;
    acc.accumulate(rec);
    REQUIRE_THROWS_WITH(acc.accumulate(other),
                        Catch::Matchers::ContainsSubstring("shape drift"));
  }
  SECTION("read before accumulate is an error") {
    BatchAccumulator<double> acc;
    REQUIRE_THROWS_WITH(acc.read_average(),
                        Catch::Matchers::ContainsSubstring("no batches"));
  }
}

TEST_CASE("maxpool gradient routing picks the first maximal element") {
  NetworkGraph<double> net;
  net.input_dims = {1, 2, 2};
  net.num_classes = 1;
  net.loss_kind = LossKind::mse;
  net.layers.push_back({{LayerKind::maxpool, 0, 0, 2, 2, 0, false}, {}, {}});
  net.layers.push_back({{LayerKind::flatten}, {}, {}});
  net.finalize();
  Batch<double> batch;
  batch.inputs = Tensor<double>({1, 1, 2, 2}, {7.0, 7.0, 3.0, 7.0});  // tie on the max
  batch.targets = Tensor<double>({1, 1}, {0.0});
  auto rec = forward(net, batch);
  backward(net, rec);
  REQUIRE(rec.input_grad[0] == 7.0);  // dL/dy = y - t = 7, routed to the first max
  REQUIRE(rec.input_grad[1] == 0.0);
  REQUIRE(rec.input_grad[3] == 0.0);
}
