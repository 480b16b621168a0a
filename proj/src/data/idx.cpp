#include "splitbench/data/idx.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

namespace splitbench::data {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void check_magic(std::span<const std::uint8_t> b, std::uint32_t want, const char* what) {
  if (b.size() < 4) throw Error("truncated", std::string(what) + " file shorter than its magic");
  const std::uint32_t got = read_be32(b, 0);
  if (got != want) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s file has magic 0x%08x, expected 0x%08x", what, got, want);
    throw Error("bad_magic", buf);
  }
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, kIdxImageMagic, "image");
  if (bytes.size() < 16) throw Error("truncated", "image header is incomplete");
  IdxImages img{read_be32(bytes, 4), read_be32(bytes, 8), read_be32(bytes, 12), {}};
  const std::size_t need = std::size_t{img.count} * img.rows * img.cols;
  if (bytes.size() - 16 < need)
    throw Error("truncated", "image file holds " + std::to_string(bytes.size() - 16) +
                                 " pixel bytes, header promises " + std::to_string(need));
  img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return img;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, kIdxLabelMagic, "label");
  if (bytes.size() < 8) throw Error("truncated", "label header is incomplete");
  const std::uint32_t count = read_be32(bytes, 4);
  if (bytes.size() - 8 < count)
    throw Error("truncated", "label file holds " + std::to_string(bytes.size() - 8) +
                                 " labels, header promises " + std::to_string(count));
  return {bytes.begin() + 8, bytes.begin() + 8 + count};
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxImageMagic);
  put_be32(out, images.count);
  put_be32(out, images.rows);
  put_be32(out, images.cols);
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path) {
  const IdxImages img = parse_idx_images(read_file(images_path));
  const std::vector<std::uint8_t> lab = parse_idx_labels(read_file(labels_path));
  if (lab.size() != img.count)
    throw Error("count_mismatch", images_path.filename().string() + " has " +
                                      std::to_string(img.count) + " images but " +
                                      labels_path.filename().string() + " has " +
                                      std::to_string(lab.size()) + " labels");
  Dataset ds;
  ds.name = "mnist";
  ds.class_count = 10;
  std::vector<float> px(img.pixels.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(img.pixels[i]) / 255.0f;
  ds.features = nn::Tensor({img.count, 1, img.rows, img.cols}, std::move(px));
  ds.labels.assign(lab.begin(), lab.end());
  ds.validate();
  return ds;
}

}  // namespace splitbench::data
