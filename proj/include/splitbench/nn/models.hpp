#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "splitbench/nn/stack.hpp"

namespace splitbench::nn {

// Conv(1->6,5)-ReLU-MaxPool(2)-Conv(6->16,5)-ReLU-MaxPool(2)-Flatten-
// Dense(256->120)-ReLU-Dense(120->10) over 1x28x28 inputs.
template <typename T>
LayerStack<T> make_lenet(std::uint64_t seed);

// Cut after the first MaxPool: the client holds one convolution.
inline constexpr std::size_t kLenetCutSmall = 3;
// Cut after the second MaxPool: the client holds both convolutions.
inline constexpr std::size_t kLenetCutLarge = 6;

// Dense-ReLU-...-Dense with the given hidden widths.
template <typename T>
LayerStack<T> make_mlp(std::size_t in, std::span<const std::size_t> hidden, std::size_t out,
                       std::uint64_t seed);

enum class Arch { LeNet, Mlp };

struct ModelSpec {
  Arch arch = Arch::Mlp;
  std::vector<std::size_t> hidden{16, 16};  // Mlp only

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

std::string arch_name(Arch arch);

// Builds the architecture for a dataset's sample shape and class count.
template <typename T>
LayerStack<T> build_model(const ModelSpec& spec, const Shape& sample_shape, std::size_t classes,
                          std::uint64_t seed);

// Layer boundary just after the first ReLU (the FC-ReLU-FC split point).
template <typename T>
std::size_t boundary_after_first_relu(const LayerStack<T>& stack);

}  // namespace splitbench::nn
