#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "splitbench/nn/tensor.hpp"
#include "splitbench/rng.hpp"

namespace splitbench::nn {

// Fully connected: weight is in x out, bias is out.
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  friend bool operator==(const Dense&, const Dense&) = default;
};

// Valid (unpadded) convolution over CxHxW samples. Weight is
// out_ch x in_ch x kernel x kernel, bias is out_ch.
struct Conv2D {
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  friend bool operator==(const Conv2D&, const Conv2D&) = default;
};

// Non-overlapping max pooling; stride equals the window.
struct MaxPool2D {
  std::size_t window = 2;
  friend bool operator==(const MaxPool2D&, const MaxPool2D&) = default;
};

struct ReLU {
  friend bool operator==(const ReLU&, const ReLU&) = default;
};

struct Flatten {
  friend bool operator==(const Flatten&, const Flatten&) = default;
};

using LayerKind = std::variant<Dense, Conv2D, MaxPool2D, ReLU, Flatten>;

std::string kind_name(const LayerKind& kind);

// Per-sample output shape (no batch dimension). Throws ShapeError.
Shape infer_output_shape(const LayerKind& kind, const Shape& sample_shape);

std::vector<Shape> param_shapes(const LayerKind& kind);

template <typename T>
struct Layer {
  LayerKind kind;
  std::vector<BasicTensor<T>> params;

  friend bool operator==(const Layer&, const Layer&) = default;
};

// Parameters drawn He-uniform, U(-sqrt(6/fan_in), sqrt(6/fan_in)); biases
// start at zero.
template <typename T>
Layer<T> make_layer(const LayerKind& kind, Rng& rng);

template <typename T>
Layer<T> make_layer(const LayerKind& kind);  // zero-initialized

// Batched kernels. `input` carries a leading batch dimension.
template <typename T>
BasicTensor<T> layer_forward(const Layer<T>& layer, const BasicTensor<T>& input);

template <typename T>
struct LayerGrad {
  BasicTensor<T> input;  // empty when not requested
  std::vector<BasicTensor<T>> params;
};

template <typename T>
LayerGrad<T> layer_backward(const Layer<T>& layer, const BasicTensor<T>& input,
                            const BasicTensor<T>& grad_output,
                            bool need_input_grad);

}  // namespace splitbench::nn
