#include "splitbench/nn/loss.hpp"

#include <algorithm>
#include <cmath>

namespace splitbench::nn {

namespace {

template <typename T>
void check_inputs(const BasicTensor<T>& logits, std::span<const std::int32_t> labels) {
  if (logits.rank() != 2)
    throw ShapeError("cross-entropy expects batch x K logits, got " + shape_str(logits.shape()));
  if (labels.size() != logits.dim(0))
    throw ShapeError("got " + std::to_string(labels.size()) + " labels for a batch of " +
                     std::to_string(logits.dim(0)));
  const auto k = static_cast<std::int64_t>(logits.dim(1));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= k)
      throw Error("label_out_of_range", "label " + std::to_string(labels[i]) + " at row " +
                                            std::to_string(i) + " is outside [0, " +
                                            std::to_string(k) + ")");
}

}  // namespace

template <typename T>
LossResult<T> cross_entropy(const BasicTensor<T>& logits, std::span<const std::int32_t> labels) {
  check_inputs(logits, labels);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  LossResult<T> r;
  r.grad = BasicTensor<T>(logits.shape());
  double total = 0.0;
  const T inv_n = T{1} / static_cast<T>(n);
  for (std::size_t s = 0; s < n; ++s) {
    const T* z = logits.raw() + s * k;
    T* g = r.grad.raw() + s * k;
    const T zmax = *std::max_element(z, z + k);
    T sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      g[j] = std::exp(z[j] - zmax);
      sum += g[j];
    }
    const auto y = static_cast<std::size_t>(labels[s]);
    total += static_cast<double>(std::log(sum) - (z[y] - zmax));
    for (std::size_t j = 0; j < k; ++j) g[j] = g[j] / sum * inv_n;
    g[y] -= inv_n;
  }
  r.loss = static_cast<T>(total / static_cast<double>(n));
  return r;
}

template <typename T>
double cross_entropy_value(const BasicTensor<T>& logits, std::span<const std::int32_t> labels) {
  check_inputs(logits, labels);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const T* z = logits.raw() + s * k;
    const T zmax = *std::max_element(z, z + k);
    double sum = 0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(static_cast<double>(z[j] - zmax));
    total += std::log(sum) - static_cast<double>(z[labels[s]] - zmax);
  }
  return total / static_cast<double>(n);
}

template LossResult<float> cross_entropy(const Tensor&, std::span<const std::int32_t>);
template LossResult<double> cross_entropy(const Tensor64&, std::span<const std::int32_t>);
template double cross_entropy_value(const Tensor&, std::span<const std::int32_t>);
template double cross_entropy_value(const Tensor64&, std::span<const std::int32_t>);

}  // namespace splitbench::nn
