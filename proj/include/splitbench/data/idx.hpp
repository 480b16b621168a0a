#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "splitbench/data/dataset.hpp"

namespace splitbench::data {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// Reads an MNIST-style image/label IDX pair. Pixels are scaled to [0, 1];
// features are N x 1 x rows x cols. Errors: "bad_magic", "truncated",
// "count_mismatch", "io_error".
Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path);

// Byte-level parsers behind load_mnist_idx, exposed for fixtures.
struct IdxImages {
  std::uint32_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;
};
IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

}  // namespace splitbench::data
