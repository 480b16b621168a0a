#pragma once

#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "splitbench/nn/stack.hpp"

namespace splitbench::nn {

// Learning rates are split between client- and server-held segments.
struct OptimizerConfig {
  double lr_client = 0.01;
  double lr_server = 0.01;
  std::size_t batch_size = 64;

  void validate() const;
  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

// p <- p - lr * g, elementwise, for each aligned (param, grad) pair.
template <typename T>
void sgd_step(std::span<BasicTensor<T>* const> params, std::span<const BasicTensor<T>> grads,
              T lr);

template <typename T>
void sgd_step(LayerStack<T>& stack, std::type_identity_t<std::span<const BasicTensor<T>>> grads,
              double lr);

}  // namespace splitbench::nn
