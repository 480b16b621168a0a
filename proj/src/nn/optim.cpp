#include "splitbench/nn/optim.hpp"

namespace splitbench::nn {

void OptimizerConfig::validate() const {
  if (!(lr_client > 0.0)) throw ConfigError("lr_client", "must be > 0");
  if (!(lr_server > 0.0)) throw ConfigError("lr_server", "must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
}

template <typename T>
void sgd_step(std::span<BasicTensor<T>* const> params, std::span<const BasicTensor<T>> grads,
              T lr) {
  if (params.size() != grads.size())
    throw ShapeError("sgd_step got " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->shape() != grads[i].shape())
      throw ShapeError("gradient " + std::to_string(i) + " has shape " +
                       shape_str(grads[i].shape()) + ", parameter is " +
                       shape_str(params[i]->shape()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    const auto g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
  }
}

template <typename T>
void sgd_step(LayerStack<T>& stack, std::type_identity_t<std::span<const BasicTensor<T>>> grads,
              double lr) {
  auto params = stack.mutable_parameters();
  sgd_step<T>(std::span<BasicTensor<T>* const>(params), grads, static_cast<T>(lr));
}

template void sgd_step(std::span<Tensor* const>, std::span<const Tensor>, float);
template void sgd_step(std::span<Tensor64* const>, std::span<const Tensor64>, double);
template void sgd_step(LayerStack<float>&, std::span<const Tensor>, double);
template void sgd_step(LayerStack<double>&, std::span<const Tensor64>, double);

}  // namespace splitbench::nn
