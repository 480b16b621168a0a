#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "splitbench/nn/tensor.hpp"

namespace splitbench::data {

struct Dataset {
  std::string name;
  nn::Tensor features;                 // N x sample shape
  std::vector<std::int32_t> labels;    // N class indices
  std::size_t class_count = 0;
  // Named per-sample group ids (categorical attribute values) used by
  // attribute-keyed partitioning.
  std::map<std::string, std::vector<std::int32_t>> attributes;

  std::size_t size() const noexcept { return labels.size(); }
  nn::Shape sample_shape() const;
  std::size_t sample_numel() const;

  // Throws if feature/label counts disagree or a label is out of range.
  void validate() const;
};

struct Batch {
  nn::Tensor features;
  std::vector<std::int32_t> labels;
};

// Rows `indices` of the dataset, in that order.
Batch gather(const Dataset& dataset, std::span<const std::size_t> indices);

// The first `n` samples (or all of them if n exceeds the size).
Dataset take_prefix(const Dataset& dataset, std::size_t n);

}  // namespace splitbench::data
