#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "splitbench/data/batches.hpp"
#include "splitbench/data/csv.hpp"
#include "splitbench/data/idx.hpp"
#include "splitbench/data/partition.hpp"
#include "splitbench/data/synth.hpp"
#include "splitbench/error.hpp"
#include "splitbench/rng.hpp"

using namespace splitbench;
using namespace splitbench::data;
namespace fs = std::filesystem;

namespace {

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

std::string error_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("splitbench-data-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Samples with labels 0..k-1 round robin and an attribute "group" = i % 3.
Dataset labelled(std::size_t n, std::size_t k) {
  Dataset ds;
  ds.name = "fixture";
  ds.class_count = k;
  ds.features = nn::Tensor({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels.push_back(static_cast<std::int32_t>(i % k));
    ds.attributes["group"].push_back(static_cast<std::int32_t>((i / k) % 3));
  }
  return ds;
}

void check_exact_cover(const Partition& p, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& s : p.shards) {
    CHECK(std::is_sorted(s.indices.begin(), s.indices.end()));
    for (auto i : s.indices) {
      REQUIRE(i < n);
      seen[i] += 1;
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

const std::vector<std::uint8_t> kTwoImages = {
    0x00, 0x00, 0x08, 0x03,  // magic
    0x00, 0x00, 0x00, 0x02,  // count
    0x00, 0x00, 0x00, 0x02,  // rows
    0x00, 0x00, 0x00, 0x02,  // cols
    0,    255,  128,  1,     // image 0
    7,    64,   200,  33};   // image 1

const std::vector<std::uint8_t> kTwoLabels = {0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 7, 3};

const char* kSchema = R"({
  "header": true,
  "columns": [
    {"name": "age", "type": "numeric", "min": 0, "max": 100},
    {"name": "color", "type": "categorical", "values": ["red", "green", "blue"]},
    {"name": "id", "type": "ignore"},
    {"name": "hours", "type": "numeric"},
    {"name": "income", "type": "label", "positive": [">50K", ">50K."], "negative": ["<=50K", "<=50K."]}
  ]
})";

const char* kThreeRows =
    "age,color,id,hours,income\n"
    "50, green, a, 40, >50K\n"
    "| a comment line\n"
    "25, red, b, 20, <=50K\n"
    "100, blue, c, 60, <=50K.\n";

}  // namespace

TEST_CASE("idx fixture round trip") {
  auto img = parse_idx_images(kTwoImages);
  CHECK(img.count == 2);
  CHECK(img.rows == 2);
  CHECK(img.cols == 2);
  CHECK(img.pixels == std::vector<std::uint8_t>{0, 255, 128, 1, 7, 64, 200, 33});
  CHECK(encode_idx_images(img) == kTwoImages);
  auto labels = parse_idx_labels(kTwoLabels);
  CHECK(labels == std::vector<std::uint8_t>{7, 3});
  CHECK(encode_idx_labels(labels) == kTwoLabels);
}

TEST_CASE("idx loader scales 28x28 images to [0,1]") {
  IdxImages img{2, 28, 28, std::vector<std::uint8_t>(2 * 784)};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i % 256);
  const std::vector<std::uint8_t> labels{4, 9};
  auto dir = temp_dir("idx");
  write_bytes(dir / "img", encode_idx_images(img));
  write_bytes(dir / "lbl", encode_idx_labels(labels));
  auto ds = load_mnist_idx(dir / "img", dir / "lbl");
  CHECK(ds.size() == 2);
  CHECK(ds.class_count == 10);
  CHECK(ds.sample_shape() == nn::Shape{1, 28, 28});
  CHECK(ds.labels == std::vector<std::int32_t>{4, 9});
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    REQUIRE(ds.features[i] == static_cast<float>(img.pixels[i]) / 255.0f);
}

TEST_CASE("idx format errors are distinct") {
  CHECK(error_code([] { parse_idx_images(kTwoLabels); }) == "bad_magic");
  CHECK(error_code([] { parse_idx_labels(kTwoImages); }) == "bad_magic");
  auto cut = kTwoImages;
  cut.pop_back();
  CHECK(error_code([&] { parse_idx_images(cut); }) == "truncated");

  IdxImages img{3, 28, 28, std::vector<std::uint8_t>(3 * 784)};
  auto dir = temp_dir("idx-mismatch");
  write_bytes(dir / "img", encode_idx_images(img));
  write_bytes(dir / "lbl", kTwoLabels);
  CHECK(error_code([&] { load_mnist_idx(dir / "img", dir / "lbl"); }) == "count_mismatch");
  CHECK(error_code([&] { load_mnist_idx(dir / "missing", dir / "lbl"); }) == "io_error");
}

TEST_CASE("csv fixture one-hot layout") {
  const auto schema = parse_csv_schema(kSchema);
  std::istringstream in(kThreeRows);
  auto ds = parse_csv_dataset(in, schema, CategoryMode::Strict);
  REQUIRE(ds.size() == 3);
  CHECK(ds.class_count == 2);
  CHECK(ds.labels == std::vector<std::int32_t>{1, 0, 0});
  // age/100 | red green blue | hours scaled over [20, 60]
  const std::vector<float> expected{0.5f,  0, 1, 0, 0.5f,   //
                                    0.25f, 1, 0, 0, 0.0f,   //
                                    1.0f,  0, 0, 1, 1.0f};
  REQUIRE(ds.sample_shape() == nn::Shape{5});
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(ds.features[i] == expected[i]);
  CHECK(ds.attributes.at("color") == std::vector<std::int32_t>{1, 0, 2});
}

TEST_CASE("csv errors name the line") {
  const auto schema = parse_csv_schema(kSchema);
  std::istringstream missing("age,color,id,hours,income\n30, red, x, 10, <=50K\n31, red, y, 12\n");
  const auto msg = error_message([&] { parse_csv_dataset(missing, schema, CategoryMode::Strict); });
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("income") != std::string::npos);

  std::istringstream unknown("age,color,id,hours,income\n30, purple, x, 10, <=50K\n");
  CHECK(error_code([&] { parse_csv_dataset(unknown, schema, CategoryMode::Strict); }) ==
        "unknown_category");

  std::istringstream bad_header("age,colour,id,hours,income\n");
  CHECK(error_code([&] { parse_csv_dataset(bad_header, schema, CategoryMode::Strict); }) ==
        "malformed_row");
}

TEST_CASE("csv lenient mode routes unknown values to an other slot") {
  const auto schema = parse_csv_schema(kSchema);
  std::istringstream in("age,color,id,hours,income\n30, purple, x, 10, <=50K\n40, ?, y, 20, >50K\n");
  auto ds = parse_csv_dataset(in, schema, CategoryMode::Lenient);
  REQUIRE(ds.sample_shape() == nn::Shape{6});
  CHECK(ds.features[4] == 1.0f);
  CHECK(ds.features[6 + 4] == 1.0f);
  CHECK(ds.attributes.at("color") == std::vector<std::int32_t>{3, 3});
}

TEST_CASE("bundled adult schema parses") {
  const auto schema = load_csv_schema(fs::path(SPLITBENCH_SOURCE_DIR) / "data" / "adult.schema.json");
  CHECK(schema.columns.size() == 15);
  CHECK(schema.columns[schema.label_column()].name == "income");
  std::istringstream row(
      "39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, Not-in-family, White, "
      "Male, 2174, 0, 40, United-States, <=50K\n");
  auto ds = parse_csv_dataset(row, schema, CategoryMode::Strict);
  CHECK(ds.size() == 1);
  CHECK(ds.labels[0] == 0);
}

TEST_CASE("synth blobs") {
  SynthParams p{1000, 4, 10, 0.5, 7};
  auto a = synth_blobs(p);
  auto b = synth_blobs(p);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(!(synth_blobs({1000, 4, 10, 0.5, 8}).features == a.features));

  std::vector<int> hist(10, 0);
  for (auto l : a.labels) hist[static_cast<std::size_t>(l)] += 1;
  for (int h : hist) CHECK(std::abs(h - 100) <= 1);

  SUBCASE("zero spread is linearly separable") {
    auto ds = synth_blobs({200, 5, 4, 0.0, 3});
    // Nearest-mean scoring w_k . x - |w_k|^2 / 2 is a linear classifier.
    std::vector<std::vector<double>> mean(4, std::vector<double>(5, 0.0));
    for (std::size_t i = 0; i < ds.size(); ++i)
      for (std::size_t d = 0; d < 5; ++d) mean[static_cast<std::size_t>(ds.labels[i])][d] = ds.features[i * 5 + d];
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      double best = -INFINITY;
      std::size_t arg = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        double s = 0, nn = 0;
        for (std::size_t d = 0; d < 5; ++d) {
          s += mean[k][d] * ds.features[i * 5 + d];
          nn += mean[k][d] * mean[k][d];
        }
        s -= nn / 2;
        if (s > best) best = s, arg = k;
      }
      correct += static_cast<std::int32_t>(arg) == ds.labels[i];
    }
    CHECK(correct == ds.size());
  }
  SUBCASE("test stream shares the clusters") {
    auto test = synth_blobs({40, 4, 10, 0.0, 7}, 1);
    auto train = synth_blobs({40, 4, 10, 0.0, 7}, 0);
    CHECK(test.features == train.features);
  }
}

TEST_CASE("largest remainder rounding conserves totals") {
  const std::vector<double> shares{0.5, 0.3, 0.2};
  CHECK(largest_remainder(shares, 10) == std::vector<std::size_t>{5, 3, 2});
  CHECK(largest_remainder(shares, 7) == std::vector<std::size_t>{4, 2, 1});  // 3.5 2.1 1.4
  const std::vector<double> tie{0.5, 0.5};
  CHECK(largest_remainder(tie, 3) == std::vector<std::size_t>{2, 1});
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    auto w = rng.dirichlet(7, 0.3);
    const std::size_t total = rng.below(500);
    auto counts = largest_remainder(w, total);
    CHECK(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == total);
  }
}

TEST_CASE("dirichlet proportions are column stochastic") {
  auto p = dirichlet_proportions(4, 6, 0.5, 3);
  REQUIRE(p.size() == 4);
  for (std::size_t g = 0; g < 6; ++g) {
    double s = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(p[c][g] >= 0);
      s += p[c][g];
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("partitions are disjoint and exhaustive") {
  const auto ds = labelled(997, 10);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (auto scheme : {Scheme::IID, Scheme::DirichletLabel, Scheme::StrictLabel,
                        Scheme::DirichletAttribute}) {
      PartitionSpec spec;
      spec.scheme = scheme;
      spec.alpha = scheme == Scheme::IID ? INFINITY : scheme == Scheme::StrictLabel ? 0.0 : 0.3;
      spec.n_clients = 4;
      spec.seed = seed;
      if (scheme == Scheme::DirichletAttribute) spec.attribute = "group";
      auto p = partition(ds, spec);
      REQUIRE(p.shards.size() == 4);
      check_exact_cover(p, ds.size());
      auto again = partition(ds, spec);
      for (std::size_t c = 0; c < 4; ++c) CHECK(again.shards[c].indices == p.shards[c].indices);
    }
  }
}

TEST_CASE("iid partition") {
  const auto ds = labelled(103, 5);
  auto one = partition(ds, {Scheme::IID, INFINITY, 1, {}, 0, false});
  REQUIRE(one.shards.size() == 1);
  CHECK(one.shards[0].indices.size() == 103);
  auto four = partition(ds, {Scheme::IID, INFINITY, 4, {}, 0, false});
  std::vector<std::size_t> sizes;
  for (const auto& s : four.shards) sizes.push_back(s.indices.size());
  CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
  CHECK(partition_stats(one.shards, ds).imbalance == 0.0);
}

TEST_CASE("strict label split deals disjoint class blocks") {
  const auto ds = labelled(1000, 10);
  auto p = partition(ds, {Scheme::StrictLabel, 0.0, 5, {}, 0, false});
  auto stats = partition_stats(p.shards, ds);
  std::set<std::size_t> all;
  for (std::size_t c = 0; c < 5; ++c) {
    std::set<std::size_t> classes;
    for (std::size_t k = 0; k < 10; ++k)
      if (stats.class_histograms[c][k] > 0) classes.insert(k);
    CHECK(classes.size() == 2);
    CHECK(classes == std::set<std::size_t>{2 * c, 2 * c + 1});
    all.insert(classes.begin(), classes.end());
  }
  CHECK(all.size() == 10);
  // alpha 0 under the dirichlet scheme takes the same path
  auto q = partition(ds, {Scheme::DirichletLabel, 0.0, 5, {}, 0, false});
  for (std::size_t c = 0; c < 5; ++c) CHECK(q.shards[c].indices == p.shards[c].indices);
}

TEST_CASE("empty shards: error when strict, flagged otherwise") {
  const auto ds = labelled(40, 2);
  PartitionSpec spec{Scheme::StrictLabel, 0.0, 5, {}, 0, false};
  auto p = partition(ds, spec);
  CHECK(p.has_empty_shard);
  check_exact_cover(p, ds.size());
  spec.strict = true;
  CHECK(error_code([&] { partition(ds, spec); }) == "empty_shard");
}

TEST_CASE("partition spec validation") {
  CHECK_THROWS_AS(partition(labelled(10, 2), {Scheme::DirichletLabel, -1.0, 2, {}, 0, false}), ConfigError);
  CHECK_THROWS_AS(partition(labelled(10, 2), {Scheme::IID, INFINITY, 0, {}, 0, false}), ConfigError);
  CHECK_THROWS_AS(partition(labelled(10, 2), {Scheme::DirichletAttribute, 1.0, 2, {}, 0, false}), ConfigError);
  CHECK_THROWS_AS(partition(labelled(10, 2), {Scheme::DirichletAttribute, 1.0, 2, "nope", 0, false}), ConfigError);
  CHECK(scheme_for_alpha(0.0) == Scheme::StrictLabel);
  CHECK(scheme_for_alpha(INFINITY) == Scheme::IID);
  CHECK(scheme_for_alpha(0.5) == Scheme::DirichletLabel);
  CHECK(scheme_from_name(scheme_name(Scheme::DirichletAttribute)) == Scheme::DirichletAttribute);
}

TEST_CASE("large alpha concentrates at the global distribution") {
  // Per class, a client's share is Beta(1000, 2000) around 1/3: relative sd
  // about 2.5%, so single bins drift past 5% routinely while the histogram
  // as a whole stays well inside it.
  const auto ds = labelled(60000, 10);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto p = partition(ds, {Scheme::DirichletLabel, 1000.0, 3, {}, seed, false});
    auto stats = partition_stats(p.shards, ds);
    for (std::size_t c = 0; c < 3; ++c) {
      const double size = static_cast<double>(stats.sizes[c]);
      double diff = 0, norm = 0;
      for (std::size_t k = 0; k < 10; ++k) {
        const double expected = stats.global_distribution[k] * size;
        const double got = static_cast<double>(stats.class_histograms[c][k]);
        diff += std::abs(got - expected);
        norm += expected;
        CHECK(std::abs(got - expected) / expected <= 0.15);
      }
      CHECK(diff / norm <= 0.05);
    }
  }
}

TEST_CASE("imbalance decreases with alpha") {
  const auto ds = labelled(2000, 10);
  std::vector<double> means;
  for (double alpha : {0.05, 0.1, 0.3, 1.0, 10.0}) {
    double sum = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
      sum += partition_stats(partition(ds, {Scheme::DirichletLabel, alpha, 5, {}, seed, false}).shards, ds)
                 .imbalance;
    means.push_back(sum / 20);
  }
  for (std::size_t i = 1; i < means.size(); ++i) CHECK(means[i] < means[i - 1]);
}

TEST_CASE("epoch batches") {
  std::vector<std::size_t> idx(130);
  std::iota(idx.begin(), idx.end(), 1000);
  auto a = epoch_batches(idx, 64, 5);
  REQUIRE(a.size() == 3);
  CHECK(a[0].size() == 64);
  CHECK(a[2].size() == 2);
  std::vector<std::size_t> flat;
  for (const auto& b : a) flat.insert(flat.end(), b.begin(), b.end());
  std::sort(flat.begin(), flat.end());
  CHECK(flat == idx);
  CHECK(epoch_batches(idx, 64, 5) == a);
  CHECK(epoch_batches(idx, 64, 6) != a);
  CHECK(epoch_batches({}, 64, 5).empty());
}
