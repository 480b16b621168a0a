#pragma once

#include <cstdint>
#include <span>

#include "splitbench/nn/tensor.hpp"

namespace splitbench::nn {

template <typename T>
struct LossResult {
  T loss = 0;
  BasicTensor<T> grad;  // d(loss)/d(logits), same shape as the logits
};

// Mean softmax cross-entropy over a batch x K logit matrix. The softmax is
// shifted by the row maximum before exponentiation.
template <typename T>
LossResult<T> cross_entropy(const BasicTensor<T>& logits, std::span<const std::int32_t> labels);

// Loss value only; no gradient allocation.
template <typename T>
double cross_entropy_value(const BasicTensor<T>& logits, std::span<const std::int32_t> labels);

}  // namespace splitbench::nn
