#include <cmath>
#include <cstdio>
#include <unistd.h>

#include "doctest.h"
#include "opposd/adam.hpp"
#include "opposd/checkpoint.hpp"
#include "opposd/gradcheck.hpp"
#include "opposd/mlp.hpp"

using namespace opposd;

namespace {

DenseMatrix row_vector(std::initializer_list<double> vals) {
  DenseMatrix m(1, vals.size());
  std::size_t i = 0;
  for (double v : vals) m(0, i++) = v;
  return m;
}

MlpParams zero_net(std::vector<std::size_t> sizes, Head head) {
  MlpParams p;
  p.layer_sizes = sizes;
  p.head = head;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    p.weights.emplace_back(sizes[l], sizes[l + 1], 0.0);
    p.biases.emplace_back(1, sizes[l + 1], 0.0);
  }
  return p;
}

}  // namespace

TEST_CASE("zero-weight net maps everything to zero under the linear head") {
  MlpParams net = zero_net({3, 4, 2}, Head::linear);
  const DenseMatrix out = mlp_forward(net, row_vector({0.3, -1.2, 5.0}));
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("zero-weight softmax head is uniform") {
  MlpParams net = zero_net({3, 4, 5}, Head::softmax);
  const DenseMatrix out = mlp_forward(net, row_vector({1.0, 2.0, 3.0}));
  for (double v : out.data) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("hand-evaluated one-hidden-unit composition") {
  // y = w2 * relu(w1 * x + b1) + b2 with w1=2, b1=-0.5, w2=3, b2=0.25, x=1:
  // relu(1.5) = 1.5, y = 3*1.5 + 0.25 = 4.75
  MlpParams net = zero_net({1, 1, 1}, Head::linear);
  net.weights[0](0, 0) = 2.0;
  net.biases[0](0, 0) = -0.5;
  net.weights[1](0, 0) = 3.0;
  net.biases[1](0, 0) = 0.25;
  const DenseMatrix out = mlp_forward(net, row_vector({1.0}));
  CHECK(out(0, 0) == doctest::Approx(4.75).epsilon(1e-15));

  // Negative pre-activation goes through the ReLU as zero.
  const DenseMatrix out2 = mlp_forward(net, row_vector({-1.0}));
  CHECK(out2(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("input dimension mismatch is rejected") {
  MlpParams net = zero_net({3, 2}, Head::linear);
  CHECK_THROWS_AS(mlp_forward(net, row_vector({1.0, 2.0})), NumericError);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  Rng rng(7);
  MlpParams net = make_mlp({3, 4, 2}, Head::linear, rng);
  ForwardCache cache;
  mlp_forward(net, row_vector({0.5, 1.5, -0.5}), &cache);
  const MlpGradients g = mlp_backward(net, cache, DenseMatrix(1, 2, 0.0));
  for (const auto& m : g.d_weights) {
    for (double v : m.data) CHECK(v == 0.0);
  }
  for (const auto& m : g.d_biases) {
    for (double v : m.data) CHECK(v == 0.0);
  }
}

TEST_CASE("single linear layer squared-error gradient is 2(pred-target)x") {
  // One layer, no hidden units: pred = x.w; loss = (pred - y)^2.
  MlpParams net = zero_net({2, 1}, Head::linear);
  net.weights[0](0, 0) = 0.7;
  net.weights[0](1, 0) = -0.3;
  const DenseMatrix x = row_vector({1.5, 2.0});
  const double target = 0.4;
  ForwardCache cache;
  const DenseMatrix pred = mlp_forward(net, x, &cache);
  DenseMatrix upstream(1, 1);
  upstream(0, 0) = 2.0 * (pred(0, 0) - target);
  const MlpGradients g = mlp_backward(net, cache, upstream);
  const double resid = 0.7 * 1.5 - 0.3 * 2.0 - 0.4;
  CHECK(g.d_weights[0](0, 0) == doctest::Approx(2.0 * resid * 1.5).epsilon(1e-14));
  CHECK(g.d_weights[0](1, 0) == doctest::Approx(2.0 * resid * 2.0).epsilon(1e-14));
  CHECK(g.d_biases[0](0, 0) == doctest::Approx(2.0 * resid).epsilon(1e-14));
}

TEST_CASE("random small nets match central finite differences") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    MlpParams net = make_mlp({3, 5, 2}, Head::linear, rng, 0.6);
    for (double* p : mlp_param_ptrs(net)) *p += 0.05 * rng.normal();
    DenseMatrix inputs(4, 3);
    for (double& v : inputs.data) v = rng.normal();
    DenseMatrix weights(4, 2);
    for (double& v : weights.data) v = rng.normal();
    auto loss_and_grads = [&]() -> std::pair<double, MlpGradients> {
      ForwardCache cache;
      const DenseMatrix y = mlp_forward(net, inputs, &cache);
      double loss = 0.0;
      for (std::size_t k = 0; k < y.data.size(); ++k) loss += weights.data[k] * y.data[k];
      return {loss, mlp_backward(net, cache, weights)};
    };
    const GradCheckReport rep = gradient_check(net, loss_and_grads, 1e-4);
    CHECK(rep.pass);
  }
}

TEST_CASE("gradient check on a pure linear model is exact to roundoff") {
  Rng rng(5);
  MlpParams net = make_mlp({3, 1}, Head::linear, rng, 0.5);
  const DenseMatrix x = row_vector({0.2, -1.0, 0.5});
  auto loss_and_grads = [&]() -> std::pair<double, MlpGradients> {
    ForwardCache cache;
    const DenseMatrix y = mlp_forward(net, x, &cache);
    DenseMatrix upstream(1, 1);
    upstream(0, 0) = 2.0 * (y(0, 0) - 0.3);
    double loss = (y(0, 0) - 0.3) * (y(0, 0) - 0.3);
    return {loss, mlp_backward(net, cache, upstream)};
  };
  const GradCheckReport rep = gradient_check(net, loss_and_grads, 1e-8);
  CHECK(rep.max_rel_err <= 1e-8);
}

TEST_CASE("softplus head net passes the finite-difference check") {
  Rng rng(17);
  MlpParams net = make_mlp({3, 6, 1}, Head::softplus, rng, 0.5);
  for (double* p : mlp_param_ptrs(net)) *p += 0.05 * rng.normal();
  DenseMatrix inputs(5, 3);
  for (double& v : inputs.data) v = rng.normal();
  auto loss_and_grads = [&]() -> std::pair<double, MlpGradients> {
    ForwardCache cache;
    const DenseMatrix y = mlp_forward(net, inputs, &cache);
    double loss = 0.0;
    for (double v : y.data) loss += v * v;
    DenseMatrix upstream(y.rows, y.cols);
    for (std::size_t k = 0; k < y.data.size(); ++k) upstream.data[k] = 2.0 * y.data[k];
    return {loss, mlp_backward(net, cache, upstream)};
  };
  const GradCheckReport rep = gradient_check(net, loss_and_grads, 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("softmax outputs stay valid distributions for huge logits") {
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    VecD z(6);
    for (double& v : z) v = rng.uniform(-1e3, 1e3);
    softmax_row_inplace(z.data(), z.size());
    double sum = 0.0;
    for (double v : z) {
      CHECK(v >= 0.0);
      CHECK(std::isfinite(v));
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("softplus is positive and overflow-free up to |x| = 1e3") {
  CHECK(softplus(1e3) == doctest::Approx(1e3).epsilon(1e-12));
  CHECK(softplus(-1e3) > 0.0);
  CHECK(std::isfinite(softplus(-1e3)));
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("adam leaves parameters unchanged on zero gradients") {
  Rng rng(3);
  MlpParams net = make_mlp({2, 3, 1}, Head::linear, rng);
  AdamState opt = make_adam(net, 1e-2);
  const MlpParams before = net;
  adam_step(opt, net, zero_gradients_like(net));
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    CHECK(net.weights[l] == before.weights[l]);
    CHECK(net.biases[l] == before.biases[l]);
  }
}

TEST_CASE("first adam step has magnitude close to the learning rate") {
  // Bias correction makes step one equal lr * g / (|g| + eps).
  MlpParams net = zero_net({1, 1}, Head::linear);
  net.weights[0](0, 0) = 1.0;
  AdamState opt = make_adam(net, 0.01);
  MlpGradients g = zero_gradients_like(net);
  g.d_weights[0](0, 0) = 0.3;
  adam_step(opt, net, g);
  CHECK(net.weights[0](0, 0) == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(opt.step_count == 1);
}

TEST_CASE("weight decay alone behaves as an L2 gradient term") {
  MlpParams net = zero_net({1, 1}, Head::linear);
  net.weights[0](0, 0) = 2.0;
  AdamState opt = make_adam(net, 0.01, /*weight_decay=*/0.5);
  adam_step(opt, net, zero_gradients_like(net));
  // Effective gradient 0.5 * 2.0 = 1.0 > 0, so the parameter must shrink by
  // about lr after bias correction.
  CHECK(net.weights[0](0, 0) == doctest::Approx(2.0 - 0.01).epsilon(1e-6));
}

TEST_CASE("adam rejects non-finite gradients with a diagnostic") {
  MlpParams net = zero_net({1, 1}, Head::linear);
  AdamState opt = make_adam(net, 0.01);
  MlpGradients g = zero_gradients_like(net);
  g.d_weights[0](0, 0) = std::nan("");
  CHECK_THROWS_AS(adam_step(opt, net, g), NumericError);
}

TEST_CASE("adam is deterministic given identical state and inputs") {
  Rng rng(11);
  MlpParams net1 = make_mlp({3, 4, 2}, Head::linear, rng);
  MlpParams net2 = net1;
  AdamState opt1 = make_adam(net1, 3e-3);
  AdamState opt2 = make_adam(net2, 3e-3);
  MlpGradients g = zero_gradients_like(net1);
  Rng grng(12);
  for (auto& m : g.d_weights) {
    for (double& v : m.data) v = grng.normal();
  }
  for (int i = 0; i < 5; ++i) {
    adam_step(opt1, net1, g);
    adam_step(opt2, net2, g);
  }
  for (std::size_t l = 0; l < net1.n_layers(); ++l) {
    CHECK(net1.weights[l] == net2.weights[l]);
    CHECK(net1.biases[l] == net2.biases[l]);
  }
}

TEST_CASE("entropy values and limits") {
  DenseMatrix probs(3, 2);
  probs(0, 0) = 0.5;
  probs(0, 1) = 0.5;
  probs(1, 0) = 1.0;
  probs(1, 1) = 0.0;
  probs(2, 0) = 0.7;
  probs(2, 1) = 0.3;
  const EntropyResult res = entropy_of_policy(probs);
  CHECK(res.entropy[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(res.entropy[1] == 0.0);
  const double expected = -0.7 * std::log(0.7) - 0.3 * std::log(0.3);
  CHECK(res.entropy[2] == doctest::Approx(expected).epsilon(1e-15));
  // Deterministic row: gradient is finite (p log p -> 0 handling).
  for (double v : res.d_logits.data) CHECK(std::isfinite(v));
}

TEST_CASE("entropy gradient matches finite differences through the softmax") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    DenseMatrix logits(2, 4);
    for (double& v : logits.data) v = 2.0 * rng.normal();
    auto entropy_total = [&]() {
      DenseMatrix p = logits;
      for (std::size_t i = 0; i < p.rows; ++i) softmax_row_inplace(p.row(i), p.cols);
      double h = 0.0;
      for (double e : entropy_of_policy(p).entropy) h += e;
      return h;
    };
    DenseMatrix p = logits;
    for (std::size_t i = 0; i < p.rows; ++i) softmax_row_inplace(p.row(i), p.cols);
    const EntropyResult res = entropy_of_policy(p);
    std::vector<double*> params;
    for (double& v : logits.data) params.push_back(&v);
    const GradCheckReport rep =
        check_gradients(params, res.d_logits.data, entropy_total, 1e-6, 1e-4);
    CHECK(rep.pass);
  }
}

TEST_CASE("checkpoints round-trip the model and optimizer bit-for-bit") {
  Rng rng(41);
  MlpParams net = make_mlp({4, 8, 3}, Head::softmax, rng);
  AdamState opt = make_adam(net, 2e-3, 1e-5);
  // Take a few steps so the moments are nonzero.
  MlpGradients g = zero_gradients_like(net);
  for (auto& m : g.d_weights) {
    for (double& v : m.data) v = rng.normal();
  }
  adam_step(opt, net, g);
  adam_step(opt, net, g);

  const std::string stem = "ckpt_test_model";
  save_model(stem, net, opt, "{\"note\":42}");
  const LoadedModel loaded = load_model(stem);
  CHECK(loaded.params.layer_sizes == net.layer_sizes);
  CHECK(loaded.params.head == net.head);
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    CHECK(loaded.params.weights[l] == net.weights[l]);
    CHECK(loaded.params.biases[l] == net.biases[l]);
  }
  CHECK(loaded.opt.step_count == opt.step_count);
  for (std::size_t b = 0; b < opt.first_moment.size(); ++b) {
    CHECK(loaded.opt.first_moment[b] == opt.first_moment[b]);
    CHECK(loaded.opt.second_moment[b] == opt.second_moment[b]);
  }
  CHECK(loaded.extra_json.find("42") != std::string::npos);
  std::remove((stem + ".bin").c_str());
  std::remove((stem + ".json").c_str());
}

TEST_CASE("truncated checkpoint file is rejected") {
  Rng rng(43);
  MlpParams net = make_mlp({2, 2}, Head::linear, rng);
  AdamState opt = make_adam(net, 1e-3);
  const std::string stem = "ckpt_truncated";
  save_model(stem, net, opt);
  // Chop the binary file in half.
  {
    std::FILE* f = std::fopen((stem + ".bin").c_str(), "rb+");
    REQUIRE(f != nullptr);
    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    std::fclose(f);
    REQUIRE(truncate((stem + ".bin").c_str(), size / 2) == 0);
  }
  CHECK_THROWS_AS(load_model(stem), DataError);
  std::remove((stem + ".bin").c_str());
  std::remove((stem + ".json").c_str());
}
