#include <doctest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "splitbench/error.hpp"
#include "splitbench/nn/gradcheck.hpp"
#include "splitbench/nn/loss.hpp"
#include "splitbench/nn/models.hpp"
#include "splitbench/nn/optim.hpp"
#include "splitbench/nn/stack.hpp"

using namespace splitbench;
using namespace splitbench::nn;

namespace {

template <typename T>
BasicTensor<T> random_batch(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  BasicTensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal());
  return t;
}

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("tensor construction checks") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5)), ShapeError);
  CHECK_THROWS_AS(Tensor::checked({2}, {1.0f, NAN}), Error);
  CHECK_THROWS_AS(Tensor::checked({2}, {1.0f, INFINITY}), Error);
  CHECK(Tensor::checked({2}, {1.0f, 2.0f}).numel() == 2);
}

TEST_CASE("relu forward and backward") {
  Layer<float> relu = make_layer<float>(ReLU{});
  Tensor x({1, 2}, {-1.0f, 2.0f});
  auto y = layer_forward(relu, x);
  CHECK(y[0] == 0.0f);
  CHECK(y[1] == 2.0f);
  auto g = layer_backward(relu, x, Tensor({1, 2}, {1.0f, 1.0f}), true);
  CHECK(g.input[0] == 0.0f);
  CHECK(g.input[1] == 1.0f);
}

TEST_CASE("dense with identity weight is the identity") {
  Layer<float> dense = make_layer<float>(Dense{3, 3});
  for (std::size_t i = 0; i < 3; ++i) dense.params[0][i * 3 + i] = 1.0f;
  Tensor x({2, 3}, {1, -2, 3, 0.5f, 0, -7});
  CHECK(layer_forward(dense, x) == x);
}

TEST_CASE("lenet shapes") {
  auto net = make_lenet<float>(1);
  CHECK(net.size() == 10);
  CHECK(net.boundary_shape(kLenetCutSmall) == Shape{6, 12, 12});
  CHECK(net.boundary_shape(kLenetCutLarge) == Shape{16, 4, 4});
  CHECK(net.boundary_shape(7) == Shape{256});
  auto out = forward(net, random_batch<float>({5, 1, 28, 28}, 3)).output;
  CHECK(out.shape() == Shape{5, 10});
}

TEST_CASE("forward rejects a mismatched batch with the layer index") {
  auto net = make_lenet<float>(1);
  try {
    forward(net, Tensor({2, 1, 27, 28}));
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    REQUIRE(e.layer_index().has_value());
    CHECK(*e.layer_index() == 0);
  }
  CHECK_THROWS_AS(LayerStack<float>({4}, {make_layer<float>(Dense{4, 3}), make_layer<float>(Dense{4, 2})}),
                  ShapeError);
}

TEST_CASE("backward rejects stale or foreign tapes") {
  std::vector<std::size_t> hidden{4};
  auto a = make_mlp<float>(3, hidden, 2, 1);
  auto b = a;
  auto x = random_batch<float>({2, 3}, 1);
  auto fwd = forward(a, x);
  Tensor g(fwd.output.shape());
  CHECK(error_code([&] { backward(b, fwd.tape, g); }) == "stale_tape");
  auto grads = backward(a, fwd.tape, g);
  sgd_step(a, grads.params, 0.1);
  CHECK(error_code([&] { backward(a, fwd.tape, g); }) == "stale_tape");
}

TEST_CASE("cross entropy") {
  SUBCASE("uniform logits give ln K") {
    Tensor logits({3, 10});
    std::vector<std::int32_t> labels{0, 4, 9};
    auto r = cross_entropy(logits, labels);
    CHECK(r.loss == doctest::Approx(std::log(10.0)).epsilon(1e-6));
    CHECK(r.loss == doctest::Approx(2.302585).epsilon(1e-6));
  }
  SUBCASE("gradient rows sum to zero") {
    auto logits = random_batch<double>({6, 5}, 9);
    std::vector<std::int32_t> labels{0, 1, 2, 3, 4, 0};
    auto r = cross_entropy(logits, labels);
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) s += r.grad[i * 5 + k];
      CHECK(std::abs(s) < 1e-15);
    }
  }
  SUBCASE("loss vanishes as the margin grows") {
    double prev = INFINITY;
    for (double margin : {1.0, 5.0, 20.0, 60.0}) {
      Tensor64 logits({1, 3}, {margin, 0, 0});
      std::vector<std::int32_t> label{0};
      const double l = cross_entropy(logits, label).loss;
      CHECK(l < prev);
      prev = l;
    }
    CHECK(prev < 1e-20);
  }
  SUBCASE("large logits stay finite") {
    Tensor logits({1, 2}, {1000.0f, -1000.0f});
    std::vector<std::int32_t> label{1};
    CHECK(std::isfinite(cross_entropy(logits, label).loss));
  }
  SUBCASE("gradient matches finite differences") {
    auto logits = random_batch<double>({4, 3}, 17);
    std::vector<std::int32_t> labels{2, 0, 1, 1};
    auto r = cross_entropy(logits, labels);
    const double eps = 1e-5;
    double worst = 0, scale = 0;
    for (std::size_t i = 0; i < logits.numel(); ++i) {
      auto up = logits, down = logits;
      up[i] += eps;
      down[i] -= eps;
      const double numeric =
          (cross_entropy(up, labels).loss - cross_entropy(down, labels).loss) / (2 * eps);
      worst = std::max(worst, std::abs(numeric - r.grad[i]));
      scale = std::max(scale, std::abs(numeric));
    }
    CHECK(worst / scale < 1e-5);
  }
  SUBCASE("labels out of range are rejected") {
    Tensor logits({2, 3});
    std::vector<std::int32_t> bad{0, 3};
    CHECK(error_code([&] { cross_entropy(logits, bad); }) == "label_out_of_range");
    std::vector<std::int32_t> neg{0, -1};
    CHECK(error_code([&] { cross_entropy(logits, neg); }) == "label_out_of_range");
  }
}

TEST_CASE("sgd step arithmetic") {
  Tensor p({1}, {1.0f});
  Tensor* ps[] = {&p};
  std::vector<Tensor> g{Tensor({1}, {0.5f})};
  sgd_step<float>(ps, g, 0.01f);
  CHECK(p[0] == doctest::Approx(0.995).epsilon(1e-7));

  SUBCASE("lr zero leaves parameters unchanged") {
    Tensor q({2}, {0.25f, -3.0f});
    const Tensor before = q;
    Tensor* qs[] = {&q};
    std::vector<Tensor> gq{Tensor({2}, {100.0f, -7.0f})};
    sgd_step<float>(qs, gq, 0.0f);
    CHECK(q == before);
  }
  SUBCASE("steps apply per call") {
    // p = [1, 2]; g1 = [0.5, -1] at lr 0.1 -> [0.95, 2.1]; g2 = [1, 1] -> [0.85, 2.0]
    Tensor64 q({2}, {1.0, 2.0});
    Tensor64* qs[] = {&q};
    std::vector<Tensor64> g1{Tensor64({2}, {0.5, -1.0})};
    std::vector<Tensor64> g2{Tensor64({2}, {1.0, 1.0})};
    sgd_step<double>(qs, g1, 0.1);
    CHECK(q[0] == doctest::Approx(0.95));
    CHECK(q[1] == doctest::Approx(2.1));
    sgd_step<double>(qs, g2, 0.1);
    CHECK(q[0] == doctest::Approx(0.85));
    CHECK(q[1] == doctest::Approx(2.0));
  }
  SUBCASE("mismatched gradients are rejected") {
    std::vector<Tensor> wrong{Tensor({2})};
    CHECK_THROWS_AS(sgd_step<float>(ps, wrong, 0.1f), ShapeError);
  }
}

TEST_CASE("split positions") {
  auto net = make_lenet<float>(2);
  auto parts = split(net, CutSpec::two_way(kLenetCutSmall));
  CHECK(std::holds_alternative<MaxPool2D>(parts.front().layers().back().kind));
  CHECK(parts.role(0) == SegmentRole::Front);
  CHECK(parts.role(1) == SegmentRole::Back);

  std::vector<std::size_t> hidden{8};
  auto mlp = make_mlp<float>(6, hidden, 2, 2);
  const auto cut = boundary_after_first_relu(mlp);
  auto fc = split(mlp, CutSpec::two_way(cut));
  REQUIRE(fc.front().size() == 2);
  CHECK(std::holds_alternative<Dense>(fc.front().layer(0).kind));
  CHECK(std::holds_alternative<ReLU>(fc.front().layer(1).kind));
  REQUIRE(fc.back().size() == 1);
  CHECK(std::holds_alternative<Dense>(fc.back().layer(0).kind));

  auto three = split(net, CutSpec::three_way(3, 9));
  CHECK(three.role(0) == SegmentRole::Head);
  CHECK(three.role(2) == SegmentRole::Tail);
  CHECK(three.tail().size() == 1);
}

TEST_CASE("degenerate cuts are rejected") {
  auto net = make_lenet<float>(2);
  for (const auto& cut : {CutSpec::two_way(0), CutSpec::two_way(net.size()),
                          CutSpec::three_way(4, 4), CutSpec::three_way(5, 2), CutSpec{{}}})
    CHECK(error_code([&] { split(net, cut); }) == "invalid_cut");
}

TEST_CASE("split then concat reproduces the stack bit-exactly") {
  auto net = make_lenet<float>(4);
  auto x = random_batch<float>({3, 1, 28, 28}, 4);
  const auto whole = predict(net, x);
  for (std::size_t c = 1; c < net.size(); ++c) {
    auto parts = split(net, CutSpec::two_way(c));
    CHECK(predict(parts.back(), predict(parts.front(), x)) == whole);
    CHECK(concat<float>(parts.segments) == net);
  }
  auto three = split(net, CutSpec::three_way(3, 8));
  CHECK(predict(three.tail(), predict(three.body(), predict(three.head(), x))) == whole);
}

TEST_CASE("split segments are independent copies") {
  auto net = make_lenet<float>(4);
  auto parts = split(net, CutSpec::two_way(3));
  auto params = parts.front().parameters();
  params[0][0] += 1.0f;
  parts.front().set_parameters(params);
  CHECK(net.parameters()[0][0] != parts.front().parameters()[0][0]);
}

TEST_CASE("finite differences") {
  SUBCASE("dense stack agrees with backward") {
    Rng rng(5);
    LayerStack<double> s({3}, {make_layer<double>(Dense{3, 2}, rng)});
    auto x = random_batch<double>({4, 3}, 6);
    std::vector<std::int32_t> labels{0, 1, 1, 0};
    auto r = check_gradients("dense", 0, s, x, labels, 1e-4);
    CHECK(r.param_error < 1e-7);
    CHECK(r.input_error < 1e-7);
  }
  SUBCASE("zero input kills first-layer weight gradients") {
    std::vector<std::size_t> hidden{5};
    auto s = make_mlp<double>(4, hidden, 3, 7);
    Tensor64 x({2, 4});
    std::vector<std::int32_t> labels{0, 2};
    auto fwd = forward(s, x);
    auto loss = cross_entropy(fwd.output, labels);
    auto g = backward(s, fwd.tape, loss.grad);
    for (std::size_t i = 0; i < g.params[0].numel(); ++i) CHECK(g.params[0][i] == 0.0);
    auto numeric = finite_diff_grad(s, x, labels, 1e-4);
    for (std::size_t i = 0; i < numeric[0].numel(); ++i) CHECK(std::abs(numeric[0][i]) < 1e-12);
  }
  SUBCASE("suite passes for every layer kind") {
    std::vector<std::uint64_t> seeds{0, 1};
    for (const auto& r : run_gradient_suite(seeds)) {
      INFO(r.name << " seed " << r.seed);
      CHECK(r.param_error < 1e-4);
      CHECK(r.input_error < 1e-4);
    }
  }
}

TEST_CASE("forward is deterministic") {
  auto a = make_lenet<float>(11);
  auto b = make_lenet<float>(11);
  CHECK(a == b);
  auto x = random_batch<float>({2, 1, 28, 28}, 1);
  CHECK(predict(a, x) == predict(b, x));
  CHECK(!(make_lenet<float>(12) == a));
}
