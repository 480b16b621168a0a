#include "splitbench/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "splitbench/nn/loss.hpp"
#include "splitbench/rng.hpp"

namespace splitbench::nn {

namespace {

double loss_of(const LayerStack<double>& stack, const Tensor64& batch,
               std::span<const std::int32_t> labels) {
  return cross_entropy_value(predict(stack, batch), labels);
}

}  // namespace

std::vector<Tensor64> finite_diff_grad(const LayerStack<double>& stack, const Tensor64& batch,
                                       std::span<const std::int32_t> labels, double eps) {
  LayerStack<double> probe = stack;
  std::vector<Tensor64> grads;
  auto params = probe.mutable_parameters();
  for (Tensor64* p : params) {
    Tensor64 g(p->shape());
    for (std::size_t i = 0; i < p->numel(); ++i) {
      const double saved = (*p)[i];
      (*p)[i] = saved + eps;
      const double up = loss_of(probe, batch, labels);
      (*p)[i] = saved - eps;
      const double down = loss_of(probe, batch, labels);
      (*p)[i] = saved;
      g[i] = (up - down) / (2.0 * eps);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

Tensor64 finite_diff_input_grad(const LayerStack<double>& stack, const Tensor64& batch,
                                std::span<const std::int32_t> labels, double eps) {
  Tensor64 x = batch;
  Tensor64 g(batch.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = loss_of(stack, x, labels);
    x[i] = saved - eps;
    const double down = loss_of(stack, x, labels);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

double max_relative_error(std::span<const Tensor64> a, std::span<const Tensor64> b) {
  if (a.size() != b.size()) throw ShapeError("gradient lists differ in length");
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].shape() != b[t].shape()) throw ShapeError("gradient shapes differ");
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < a[t].numel(); ++i) {
      diff = std::max(diff, std::abs(a[t][i] - b[t][i]));
      scale = std::max({scale, std::abs(a[t][i]), std::abs(b[t][i])});
    }
    if (scale > 0.0) worst = std::max(worst, diff / scale);
  }
  return worst;
}

GradCheckResult check_gradients(const std::string& name, std::uint64_t seed,
                                const LayerStack<double>& stack, const Tensor64& batch,
                                std::span<const std::int32_t> labels, double eps) {
  auto fwd = forward(stack, batch);
  auto loss = cross_entropy(fwd.output, labels);
  auto analytic = backward(stack, fwd.tape, loss.grad, true);

  GradCheckResult r{name, seed, stack.parameter_count(), 0.0, 0.0};
  r.param_error = max_relative_error(analytic.params, finite_diff_grad(stack, batch, labels, eps));
  const Tensor64 numeric_in = finite_diff_input_grad(stack, batch, labels, eps);
  r.input_error = max_relative_error(std::span<const Tensor64>(&analytic.input, 1),
                                     std::span<const Tensor64>(&numeric_in, 1));
  return r;
}

std::vector<std::string> gradient_suite_cases() {
  return {"dense", "relu", "conv2d", "conv2d_stride2", "maxpool", "lenet_mini"};
}

LayerStack<double> gradient_suite_stack(const std::string& name, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "gradcheck-init"));
  auto mk = [&](const LayerKind& k) { return make_layer<double>(k, rng); };
  if (name == "dense") return LayerStack<double>({6}, {mk(Dense{6, 4})});
  if (name == "relu")
    return LayerStack<double>({5}, {mk(Dense{5, 6}), mk(ReLU{}), mk(Dense{6, 3})});
  if (name == "conv2d")
    return LayerStack<double>({2, 6, 6}, {mk(Conv2D{2, 3, 3, 1}), mk(Flatten{}), mk(Dense{48, 5})});
  if (name == "conv2d_stride2")
    return LayerStack<double>({2, 7, 7}, {mk(Conv2D{2, 3, 3, 2}), mk(Flatten{}), mk(Dense{27, 4})});
  if (name == "maxpool")
    return LayerStack<double>({2, 4, 4}, {mk(MaxPool2D{2}), mk(Flatten{}), mk(Dense{8, 3})});
  if (name == "lenet_mini")
    return LayerStack<double>(
        {1, 10, 10}, {mk(Conv2D{1, 2, 3, 1}), mk(ReLU{}), mk(MaxPool2D{2}), mk(Conv2D{2, 3, 3, 1}),
                      mk(ReLU{}), mk(MaxPool2D{2}), mk(Flatten{}), mk(Dense{3, 4}), mk(ReLU{}),
                      mk(Dense{4, 3})});
  throw Error("unknown_case", "no gradient suite case named " + name);
}

std::vector<GradCheckResult> run_gradient_suite(std::span<const std::uint64_t> seeds,
                                                double eps) {
  std::vector<GradCheckResult> out;
  constexpr std::size_t kBatch = 3;
  for (const auto& name : gradient_suite_cases()) {
    for (std::uint64_t seed : seeds) {
      const auto stack = gradient_suite_stack(name, seed);
      Rng rng(derive_seed(seed, "gradcheck-data"));
      Shape bs{kBatch};
      bs.insert(bs.end(), stack.input_shape().begin(), stack.input_shape().end());
      Tensor64 batch(bs);
      for (auto& v : batch.data()) v = rng.normal();
      std::vector<std::int32_t> labels(kBatch);
      for (auto& l : labels)
        l = static_cast<std::int32_t>(rng.below(stack.output_shape().at(0)));
      out.push_back(check_gradients(name, seed, stack, batch, labels, eps));
    }
  }
  return out;
}

}  // namespace splitbench::nn
