#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace splitbench::data {

// One epoch's minibatches over `indices`: a seeded shuffle cut into chunks
// of `batch_size`; the final chunk may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::span<const std::size_t> indices,
                                                    std::size_t batch_size, std::uint64_t seed);

}  // namespace splitbench::data
