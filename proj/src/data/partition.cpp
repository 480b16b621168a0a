#include "splitbench/data/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "splitbench/rng.hpp"

namespace splitbench::data {

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::IID: return "iid";
    case Scheme::DirichletLabel: return "dirichlet_label";
    case Scheme::StrictLabel: return "strict_label";
    case Scheme::DirichletAttribute: return "dirichlet_attribute";
  }
  return "unknown";
}

Scheme scheme_from_name(const std::string& s) {
  if (s == "iid") return Scheme::IID;
  if (s == "dirichlet_label") return Scheme::DirichletLabel;
  if (s == "strict_label") return Scheme::StrictLabel;
  if (s == "dirichlet_attribute") return Scheme::DirichletAttribute;
  throw ConfigError("partition.scheme", "unknown scheme '" + s + "'");
}

Scheme scheme_for_alpha(double alpha) {
  if (alpha == 0.0) return Scheme::StrictLabel;
  if (std::isinf(alpha)) return Scheme::IID;
  return Scheme::DirichletLabel;
}

void PartitionSpec::validate() const {
  if (n_clients < 1) throw ConfigError("partition.n_clients", "must be >= 1");
  if (std::isnan(alpha) || alpha < 0.0) throw ConfigError("partition.alpha", "must be >= 0");
  if ((scheme == Scheme::DirichletAttribute) != attribute.has_value())
    throw ConfigError("partition.attribute",
                      "required for dirichlet_attribute and only allowed there");
}

ClassProportions dirichlet_proportions(std::size_t n_clients, std::size_t groups, double alpha,
                                       std::uint64_t seed) {
  ClassProportions p(n_clients, std::vector<double>(groups, 0.0));
  for (std::size_t g = 0; g < groups; ++g) {
    Rng rng(derive_seed(seed, "partition-dirichlet", g));
    const auto col = rng.dirichlet(n_clients, alpha);
    for (std::size_t c = 0; c < n_clients; ++c) p[c][g] = col[c];
  }
  return p;
}

std::vector<std::size_t> largest_remainder(std::span<const double> shares, std::size_t total) {
  const double sum = std::accumulate(shares.begin(), shares.end(), 0.0);
  std::vector<std::size_t> counts(shares.size(), 0);
  if (shares.empty() || total == 0) return counts;
  if (!(sum > 0.0)) throw Error("invalid_proportions", "proportions sum to zero");
  std::vector<double> frac(shares.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double exact = shares[i] / sum * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    frac[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

namespace {

// Sample positions per group id, groups in ascending id order.
std::vector<std::vector<std::size_t>> group_members(std::span<const std::int32_t> ids) {
  std::map<std::int32_t, std::vector<std::size_t>> by;
  for (std::size_t i = 0; i < ids.size(); ++i) by[ids[i]].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [id, members] : by) out.push_back(std::move(members));
  return out;
}

void deal_dirichlet(const std::vector<std::vector<std::size_t>>& groups, const PartitionSpec& spec,
                    std::vector<Shard>& shards) {
  const auto p = dirichlet_proportions(spec.n_clients, groups.size(), spec.alpha, spec.seed);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<std::size_t> members = groups[g];
    Rng rng(derive_seed(spec.seed, "partition-shuffle", g));
    rng.shuffle(std::span<std::size_t>(members));
    std::vector<double> col(spec.n_clients);
    for (std::size_t c = 0; c < spec.n_clients; ++c) col[c] = p[c][g];
    const auto counts = largest_remainder(col, members.size());
    std::size_t pos = 0;
    for (std::size_t c = 0; c < spec.n_clients; ++c)
      for (std::size_t k = 0; k < counts[c]; ++k) shards[c].indices.push_back(members[pos++]);
  }
}

// Disjoint group spaces: groups in ascending order, dealt to clients in
// contiguous blocks whose sizes differ by at most one.
void deal_strict(const std::vector<std::vector<std::size_t>>& groups, std::size_t n_clients,
                 std::vector<Shard>& shards) {
  const std::size_t base = groups.size() / n_clients, extra = groups.size() % n_clients;
  std::size_t g = 0;
  for (std::size_t c = 0; c < n_clients; ++c) {
    const std::size_t take = base + (c < extra ? 1 : 0);
    for (std::size_t k = 0; k < take; ++k, ++g)
      shards[c].indices.insert(shards[c].indices.end(), groups[g].begin(), groups[g].end());
  }
}

void deal_iid(std::size_t n, const PartitionSpec& spec, std::vector<Shard>& shards) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  Rng rng(derive_seed(spec.seed, "partition-iid"));
  rng.shuffle(std::span<std::size_t>(all));
  const std::size_t base = n / spec.n_clients, extra = n % spec.n_clients;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < spec.n_clients; ++c) {
    const std::size_t take = base + (c < extra ? 1 : 0);
    shards[c].indices.assign(all.begin() + static_cast<std::ptrdiff_t>(pos),
                             all.begin() + static_cast<std::ptrdiff_t>(pos + take));
    pos += take;
  }
}

}  // namespace

Partition partition(const Dataset& dataset, const PartitionSpec& spec) {
  spec.validate();
  Partition out;
  out.shards.resize(spec.n_clients);
  for (std::size_t c = 0; c < spec.n_clients; ++c) out.shards[c].client_id = c;

  std::span<const std::int32_t> keys = dataset.labels;
  if (spec.scheme == Scheme::DirichletAttribute) {
    const auto it = dataset.attributes.find(*spec.attribute);
    if (it == dataset.attributes.end())
      throw ConfigError("partition.attribute",
                        "dataset '" + dataset.name + "' has no attribute '" + *spec.attribute + "'");
    keys = it->second;
  }

  if (spec.scheme == Scheme::IID || std::isinf(spec.alpha)) {
    deal_iid(dataset.size(), spec, out.shards);
  } else if (spec.scheme == Scheme::StrictLabel || spec.alpha == 0.0) {
    deal_strict(group_members(keys), spec.n_clients, out.shards);
  } else {
    deal_dirichlet(group_members(keys), spec, out.shards);
  }

  for (auto& s : out.shards) {
    std::sort(s.indices.begin(), s.indices.end());
    if (s.indices.empty()) out.has_empty_shard = true;
  }
  if (out.has_empty_shard && spec.strict)
    throw Error("empty_shard", "partition left at least one of " +
                                   std::to_string(spec.n_clients) + " clients without samples");
  return out;
}

PartitionStats partition_stats(std::span<const Shard> shards, const Dataset& dataset) {
  const std::size_t k = dataset.class_count;
  PartitionStats st;
  st.global_distribution.assign(k, 0.0);
  for (auto y : dataset.labels) st.global_distribution[static_cast<std::size_t>(y)] += 1.0;
  for (auto& v : st.global_distribution) v /= static_cast<double>(std::max<std::size_t>(1, dataset.size()));

  double tv_sum = 0.0;
  std::size_t nonempty = 0;
  for (const auto& s : shards) {
    std::vector<std::size_t> hist(k, 0);
    for (auto idx : s.indices) ++hist[static_cast<std::size_t>(dataset.labels.at(idx))];
    st.sizes.push_back(s.indices.size());
    if (!s.indices.empty()) {
      double tv = 0.0;
      for (std::size_t c = 0; c < k; ++c)
        tv += std::abs(static_cast<double>(hist[c]) / static_cast<double>(s.indices.size()) -
                       st.global_distribution[c]);
      tv_sum += 0.5 * tv;
      ++nonempty;
    }
    st.class_histograms.push_back(std::move(hist));
  }
  st.imbalance = nonempty ? tv_sum / static_cast<double>(nonempty) : 0.0;
  return st;
}

}  // namespace splitbench::data
