#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitbench/data/dataset.hpp"

namespace splitbench::data {

enum class Scheme { IID, DirichletLabel, StrictLabel, DirichletAttribute };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& s);

struct PartitionSpec {
  Scheme scheme = Scheme::IID;
  double alpha = std::numeric_limits<double>::infinity();
  std::size_t n_clients = 1;
  std::optional<std::string> attribute;  // DirichletAttribute only
  std::uint64_t seed = 0;
  bool strict = false;  // empty shards are an error instead of a warning

  void validate() const;
  friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

// Scheme implied by a bare alpha: 0 -> StrictLabel, inf -> IID, otherwise
// DirichletLabel.
Scheme scheme_for_alpha(double alpha);

struct Shard {
  std::size_t client_id = 0;
  std::vector<std::size_t> indices;  // ascending positions into the dataset
};

struct Partition {
  std::vector<Shard> shards;
  bool has_empty_shard = false;  // lenient-mode warning flag
};

// Row i holds client i's share of each group (class or attribute value);
// each column sums to 1.
using ClassProportions = std::vector<std::vector<double>>;

ClassProportions dirichlet_proportions(std::size_t n_clients, std::size_t groups, double alpha,
                                       std::uint64_t seed);

// Integer counts summing exactly to `total`: floor of each share, then the
// remaining units go to the largest fractional parts (lower index on ties).
std::vector<std::size_t> largest_remainder(std::span<const double> shares, std::size_t total);

Partition partition(const Dataset& dataset, const PartitionSpec& spec);

struct PartitionStats {
  std::vector<std::vector<std::size_t>> class_histograms;  // per client, length K
  std::vector<std::size_t> sizes;
  std::vector<double> global_distribution;
  // Mean over non-empty clients of the total-variation distance between the
  // client's class distribution and the global one.
  double imbalance = 0;
};

PartitionStats partition_stats(std::span<const Shard> shards, const Dataset& dataset);

}  // namespace splitbench::data
