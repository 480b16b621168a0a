#include "splitbench/data/batches.hpp"

#include "splitbench/error.hpp"
#include "splitbench/rng.hpp"

namespace splitbench::data {

std::vector<std::vector<std::size_t>> epoch_batches(std::span<const std::size_t> indices,
                                                    std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw ConfigError("batch_size", "must be >= 1");
  std::vector<std::size_t> order(indices.begin(), indices.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t pos = 0; pos < order.size(); pos += batch_size) {
    const std::size_t end = std::min(order.size(), pos + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(pos),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace splitbench::data
