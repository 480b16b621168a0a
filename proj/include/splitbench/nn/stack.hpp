#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "splitbench/nn/layer.hpp"

namespace splitbench::nn {

// An ordered model with a declared per-sample input shape. Each instance
// carries an identity and a parameter version so a tape recorded on one
// stack (or before an update) cannot be replayed against another.
template <typename T>
class LayerStack {
 public:
  LayerStack() : id_(next_id()) {}
  LayerStack(Shape input_shape, std::vector<Layer<T>> layers);

  LayerStack(const LayerStack& other);
  LayerStack& operator=(const LayerStack& other);
  LayerStack(LayerStack&&) noexcept = default;
  LayerStack& operator=(LayerStack&&) noexcept = default;

  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const noexcept { return output_shape_; }
  // Per-sample input shape of layer i (i == size() gives the output shape).
  const Shape& boundary_shape(std::size_t i) const { return boundaries_.at(i); }

  std::size_t size() const noexcept { return layers_.size(); }
  const Layer<T>& layer(std::size_t i) const { return layers_.at(i); }
  const std::vector<Layer<T>>& layers() const noexcept { return layers_; }

  // Parameters flattened in layer order.
  std::size_t parameter_tensor_count() const;
  std::size_t parameter_count() const;
  std::vector<BasicTensor<T>> parameters() const;
  void set_parameters(std::span<const BasicTensor<T>> params);
  std::vector<BasicTensor<T>*> mutable_parameters();

  std::uint64_t id() const noexcept { return id_; }
  std::uint64_t version() const noexcept { return version_; }
  void touch() noexcept { ++version_; }

  template <typename U>
  LayerStack<U> cast() const {
    std::vector<Layer<U>> layers;
    for (const auto& l : layers_) {
      Layer<U> c{l.kind, {}};
      for (const auto& p : l.params) c.params.push_back(p.template cast<U>());
      layers.push_back(std::move(c));
    }
    return LayerStack<U>(input_shape_, std::move(layers));
  }

  // Same layers and parameters; identity is ignored.
  friend bool operator==(const LayerStack& a, const LayerStack& b) {
    return a.input_shape_ == b.input_shape_ && a.layers_ == b.layers_;
  }

 private:
  static std::uint64_t next_id();

  Shape input_shape_;
  Shape output_shape_;
  std::vector<Shape> boundaries_;
  std::vector<Layer<T>> layers_;
  std::uint64_t id_ = 0;
  std::uint64_t version_ = 0;
};

// Per-layer inputs retained by forward for use in backward.
template <typename T>
struct Tape {
  std::uint64_t stack_id = 0;
  std::uint64_t version = 0;
  std::vector<BasicTensor<T>> inputs;
  Shape output_shape;
};

template <typename T>
struct ForwardResult {
  BasicTensor<T> output;
  Tape<T> tape;
};

template <typename T>
struct Gradients {
  BasicTensor<T> input;  // gradient w.r.t. the stack input (the cut gradient)
  std::vector<BasicTensor<T>> params;
};

template <typename T>
ForwardResult<T> forward(const LayerStack<T>& stack, BasicTensor<T> batch);

// Forward without recording a tape.
template <typename T>
BasicTensor<T> predict(const LayerStack<T>& stack, BasicTensor<T> batch);

template <typename T>
Gradients<T> backward(const LayerStack<T>& stack, const Tape<T>& tape,
                      const BasicTensor<T>& grad_output,
                      bool need_input_grad = true);

// One cut (front/back) or two cuts (head/body/tail), counted in layer
// boundaries: cut c places layers [0, c) before the cut.
struct CutSpec {
  std::vector<std::size_t> cuts;

  static CutSpec two_way(std::size_t cut) { return {{cut}}; }
  static CutSpec three_way(std::size_t cut1, std::size_t cut2) { return {{cut1, cut2}}; }

  void validate(std::size_t layer_count) const;
  friend bool operator==(const CutSpec&, const CutSpec&) = default;
};

enum class SegmentRole { Front, Back, Head, Body, Tail };

std::string role_name(SegmentRole role);

template <typename T>
struct SplitParts {
  std::vector<LayerStack<T>> segments;

  SegmentRole role(std::size_t i) const;
  LayerStack<T>& front() { return segments.at(0); }
  LayerStack<T>& back() { return segments.at(1); }
  LayerStack<T>& head() { return segments.at(0); }
  LayerStack<T>& body() { return segments.at(1); }
  LayerStack<T>& tail() { return segments.at(2); }
};

// Segments are independent copies of the stack's layers.
template <typename T>
SplitParts<T> split(const LayerStack<T>& stack, const CutSpec& cut);

template <typename T>
LayerStack<T> concat(std::span<const LayerStack<T>> segments);

extern template class LayerStack<float>;
extern template class LayerStack<double>;

}  // namespace splitbench::nn
