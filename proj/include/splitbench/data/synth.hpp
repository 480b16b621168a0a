#pragma once

#include <cstdint>

#include "splitbench/data/dataset.hpp"

namespace splitbench::data {

struct SynthParams {
  std::size_t n = 1000;
  std::size_t dims = 8;
  std::size_t k = 4;
  double spread = 0.5;
  std::uint64_t seed = 0;

  friend bool operator==(const SynthParams&, const SynthParams&) = default;
};

// k Gaussian clusters. Class means are N(0, 2^2) per coordinate and depend
// only on the seed; sample i has label i % k and noise N(0, spread^2) drawn
// from stream `stream`, so stream 0 (train) and stream 1 (test) share the
// same clusters.
Dataset synth_blobs(const SynthParams& params, std::uint64_t stream = 0);

}  // namespace splitbench::data
