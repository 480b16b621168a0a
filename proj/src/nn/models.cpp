#include "splitbench/nn/models.hpp"

namespace splitbench::nn {

template <typename T>
LayerStack<T> make_lenet(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Layer<T>> layers;
  layers.push_back(make_layer<T>(Conv2D{1, 6, 5, 1}, rng));
  layers.push_back(make_layer<T>(ReLU{}, rng));
  layers.push_back(make_layer<T>(MaxPool2D{2}, rng));
  layers.push_back(make_layer<T>(Conv2D{6, 16, 5, 1}, rng));
  layers.push_back(make_layer<T>(ReLU{}, rng));
  layers.push_back(make_layer<T>(MaxPool2D{2}, rng));
  layers.push_back(make_layer<T>(Flatten{}, rng));
  layers.push_back(make_layer<T>(Dense{256, 120}, rng));
  layers.push_back(make_layer<T>(ReLU{}, rng));
  layers.push_back(make_layer<T>(Dense{120, 10}, rng));
  return LayerStack<T>({1, 28, 28}, std::move(layers));
}

template <typename T>
LayerStack<T> make_mlp(std::size_t in, std::span<const std::size_t> hidden, std::size_t out,
                       std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Layer<T>> layers;
  std::size_t width = in;
  for (std::size_t h : hidden) {
    layers.push_back(make_layer<T>(Dense{width, h}, rng));
    layers.push_back(make_layer<T>(ReLU{}, rng));
    width = h;
  }
  layers.push_back(make_layer<T>(Dense{width, out}, rng));
  return LayerStack<T>({in}, std::move(layers));
}

std::string arch_name(Arch arch) { return arch == Arch::LeNet ? "lenet" : "mlp"; }

template <typename T>
LayerStack<T> build_model(const ModelSpec& spec, const Shape& sample_shape, std::size_t classes,
                          std::uint64_t seed) {
  if (spec.arch == Arch::LeNet) {
    if (sample_shape != Shape{1, 28, 28})
      throw ShapeError("lenet expects 1x28x28 samples, dataset has " + shape_str(sample_shape));
    if (classes != 10) throw ShapeError("lenet has 10 outputs, dataset has " +
                                        std::to_string(classes) + " classes");
    return make_lenet<T>(seed);
  }
  if (sample_shape.size() != 1)
    throw ShapeError("mlp expects flat samples, dataset has " + shape_str(sample_shape));
  return make_mlp<T>(sample_shape[0], spec.hidden, classes, seed);
}

template <typename T>
std::size_t boundary_after_first_relu(const LayerStack<T>& stack) {
  for (std::size_t i = 0; i < stack.size(); ++i)
    if (std::holds_alternative<ReLU>(stack.layer(i).kind)) return i + 1;
  throw Error("invalid_cut", "model has no ReLU layer");
}

template LayerStack<float> make_lenet<float>(std::uint64_t);
template LayerStack<double> make_lenet<double>(std::uint64_t);
template LayerStack<float> make_mlp<float>(std::size_t, std::span<const std::size_t>,
                                           std::size_t, std::uint64_t);
template LayerStack<double> make_mlp<double>(std::size_t, std::span<const std::size_t>,
                                             std::size_t, std::uint64_t);
template LayerStack<float> build_model<float>(const ModelSpec&, const Shape&, std::size_t,
                                              std::uint64_t);
template LayerStack<double> build_model<double>(const ModelSpec&, const Shape&, std::size_t,
                                                std::uint64_t);
template std::size_t boundary_after_first_relu(const LayerStack<float>&);
template std::size_t boundary_after_first_relu(const LayerStack<double>&);

}  // namespace splitbench::nn
