#include "splitbench/data/synth.hpp"

#include "splitbench/rng.hpp"

namespace splitbench::data {

Dataset synth_blobs(const SynthParams& p, std::uint64_t stream) {
  if (p.k < 2 || p.n < p.k)
    throw ConfigError("dataset.synth", "need n >= k >= 2 (n=" + std::to_string(p.n) +
                                           ", k=" + std::to_string(p.k) + ")");
  if (p.dims == 0) throw ConfigError("dataset.synth.dims", "must be >= 1");
  if (!(p.spread >= 0.0)) throw ConfigError("dataset.synth.spread", "must be >= 0");

  Rng mean_rng(derive_seed(p.seed, "synth-means"));
  std::vector<double> means(p.k * p.dims);
  for (auto& m : means) m = 2.0 * mean_rng.normal();

  Rng noise(derive_seed(p.seed, "synth-noise", stream));
  Dataset ds;
  ds.name = "synth";
  ds.class_count = p.k;
  ds.features = nn::Tensor({p.n, p.dims});
  ds.labels.resize(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    const std::size_t c = i % p.k;
    ds.labels[i] = static_cast<std::int32_t>(c);
    for (std::size_t d = 0; d < p.dims; ++d)
      ds.features[i * p.dims + d] =
          static_cast<float>(means[c * p.dims + d] + p.spread * noise.normal());
  }
  return ds;
}

}  // namespace splitbench::data
