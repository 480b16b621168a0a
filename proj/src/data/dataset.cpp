#include "splitbench/data/dataset.hpp"

#include <algorithm>
#include <cstring>

namespace splitbench::data {

nn::Shape Dataset::sample_shape() const {
  const auto& s = features.shape();
  return s.empty() ? nn::Shape{} : nn::Shape(s.begin() + 1, s.end());
}

std::size_t Dataset::sample_numel() const { return nn::shape_numel(sample_shape()); }

void Dataset::validate() const {
  if (features.rank() < 2 || features.dim(0) != labels.size())
    throw Error("count_mismatch", name + ": " + std::to_string(labels.size()) +
                                      " labels for features " + nn::shape_str(features.shape()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_count)
      throw Error("label_out_of_range", name + ": label " + std::to_string(labels[i]) +
                                            " at sample " + std::to_string(i));
  for (const auto& [attr, groups] : attributes)
    if (groups.size() != labels.size())
      throw Error("count_mismatch", name + ": attribute " + attr + " has " +
                                        std::to_string(groups.size()) + " entries");
}

Batch gather(const Dataset& dataset, std::span<const std::size_t> indices) {
  const std::size_t stride = dataset.sample_numel();
  nn::Shape shape{indices.size()};
  const auto sample = dataset.sample_shape();
  shape.insert(shape.end(), sample.begin(), sample.end());
  Batch b{nn::Tensor(shape), {}};
  b.labels.reserve(indices.size());
  const float* src = dataset.features.raw();
  float* dst = b.features.raw();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t idx = indices[i];
    if (idx >= dataset.size())
      throw Error("index_out_of_range", "sample index " + std::to_string(idx) + " >= " +
                                            std::to_string(dataset.size()));
    std::memcpy(dst + i * stride, src + idx * stride, stride * sizeof(float));
    b.labels.push_back(dataset.labels[idx]);
  }
  return b;
}

Dataset take_prefix(const Dataset& dataset, std::size_t n) {
  n = std::min(n, dataset.size());
  if (n == dataset.size()) return dataset;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Batch b = gather(dataset, idx);
  Dataset out{dataset.name, std::move(b.features), std::move(b.labels), dataset.class_count, {}};
  for (const auto& [attr, groups] : dataset.attributes)
    out.attributes[attr] = std::vector<std::int32_t>(groups.begin(), groups.begin() + n);
  return out;
}

}  // namespace splitbench::data
