#include <algorithm>
#include <cmath>

#include "internal.hpp"
#include "splitbench/rng.hpp"

namespace splitbench::paradigms {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

}  // namespace

std::string async_state_name(AsyncState s) {
  switch (s) {
    case AsyncState::A: return "A";
    case AsyncState::B: return "B";
    case AsyncState::C: return "C";
  }
  return "?";
}

std::string paradigm_name(const ParadigmConfig& cfg) {
  return std::visit(Overloaded{
                        [](const VanillaConfig&) { return std::string("vanilla"); },
                        [](const UShapeConfig&) { return std::string("ushape"); },
                        [](const PslConfig&) { return std::string("psl"); },
                        [](const SplitFedConfig&) { return std::string("splitfed"); },
                        [](const SglrConfig&) { return std::string("sglr"); },
                        [](const AsyncConfig&) { return std::string("async"); },
                        [](const FedAvgConfig&) { return std::string("fedavg"); },
                        [](const LocalOnlyConfig&) { return std::string("local"); },
                    },
                    cfg);
}

void validate(const ParadigmConfig& cfg) {
  std::visit(Overloaded{
                 [](const SplitFedConfig& c) {
                   if (c.version != 1 && c.version != 2)
                     throw ConfigError("paradigm.version", "must be 1 or 2");
                   if (c.aggregate_every < 1)
                     throw ConfigError("paradigm.aggregate_every", "must be >= 1");
                 },
                 [](const SglrConfig& c) {
                   if (!(c.subset_fraction > 0.0 && c.subset_fraction <= 1.0))
                     throw ConfigError("paradigm.subset_fraction", "must be in (0, 1]");
                   if (c.server_lr_scale && !(*c.server_lr_scale >= 1.0))
                     throw ConfigError("paradigm.server_lr_scale", "must be >= 1");
                 },
                 [](const AsyncConfig& c) {
                   if (!(c.loss_threshold > 0.0))
                     throw ConfigError("paradigm.loss_threshold", "must be > 0");
                 },
                 [](const FedAvgConfig& c) {
                   if (c.local_epochs < 1)
                     throw ConfigError("paradigm.local_epochs", "must be >= 1");
                 },
                 [](const UShapeConfig& c) {
                   if ((c.cut1 == 0) != (c.cut2 == 0) || (c.cut1 && c.cut1 >= c.cut2))
                     throw ConfigError("paradigm.cuts", "need 0 < cut1 < cut2 (or both unset)");
                 },
                 [](const auto&) {},
             },
             cfg);
}

bool is_split(const ParadigmConfig& cfg) {
  return !std::holds_alternative<FedAvgConfig>(cfg) && !std::holds_alternative<LocalOnlyConfig>(cfg);
}

std::uint64_t batch_seed(std::uint64_t seed, std::size_t client, std::size_t epoch) {
  return derive_seed(seed, "batches", client, epoch);
}

std::vector<nn::Tensor> fed_avg(std::span<const std::vector<nn::Tensor>> weight_sets,
                                std::span<const std::size_t> sizes) {
  if (weight_sets.empty()) throw Error("empty_aggregation", "fed_avg needs at least one weight set");
  if (weight_sets.size() != sizes.size())
    throw ShapeError("fed_avg got " + std::to_string(sizes.size()) + " sizes for " +
                     std::to_string(weight_sets.size()) + " weight sets");
  double total = 0;
  for (auto s : sizes) {
    if (s == 0) throw Error("empty_aggregation", "fed_avg sizes must be positive");
    total += static_cast<double>(s);
  }
  const auto& ref = weight_sets.front();
  for (const auto& ws : weight_sets) {
    bool ok = ws.size() == ref.size();
    for (std::size_t t = 0; ok && t < ref.size(); ++t) ok = ws[t].shape() == ref[t].shape();
    if (!ok) throw ShapeError("fed_avg weight sets are not shape-compatible");
  }
  std::vector<nn::Tensor> out;
  std::vector<double> terms(weight_sets.size());
  for (std::size_t t = 0; t < ref.size(); ++t) {
    nn::Tensor avg(ref[t].shape());
    for (std::size_t e = 0; e < avg.numel(); ++e) {
      for (std::size_t c = 0; c < weight_sets.size(); ++c)
        terms[c] = static_cast<double>(weight_sets[c][t][e]) * static_cast<double>(sizes[c]);
      std::sort(terms.begin(), terms.end());
      double sum = 0;
      for (double v : terms) sum += v;
      avg[e] = static_cast<float>(sum / total);
    }
    out.push_back(std::move(avg));
  }
  return out;
}

void average_gradients(std::map<std::size_t, nn::Tensor>& grads,
                       std::span<const std::size_t> members) {
  if (members.empty()) return;
  const nn::Shape shape = grads.at(members[0]).shape();
  for (auto i : members)
    if (grads.at(i).shape() != shape) throw ShapeError("averaged cut gradients differ in shape");
  nn::Tensor mean(shape);
  for (std::size_t e = 0; e < mean.numel(); ++e) {
    double sum = 0;
    for (auto i : members) sum += static_cast<double>(grads.at(i)[e]);
    mean[e] = static_cast<float>(sum / static_cast<double>(members.size()));
  }
  for (auto i : members) grads.at(i) = mean;
}

std::unique_ptr<Paradigm> make_paradigm(const ParadigmConfig& cfg, Setup setup) {
  validate(cfg);
  // Learning rates are not checked here: a zero step is a useful probe.
  if (setup.opt.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (setup.train == nullptr) throw Error("invalid_setup", "no training set");
  if (setup.shards.empty()) throw Error("invalid_setup", "no client shards");
  return std::visit(
      Overloaded{
          [&](const VanillaConfig& c) { return detail::make_vanilla(c, std::move(setup)); },
          [&](const UShapeConfig& c) { return detail::make_ushape(c, std::move(setup)); },
          [&](const PslConfig&) { return detail::make_psl(std::move(setup)); },
          [&](const SplitFedConfig& c) { return detail::make_splitfed(c, std::move(setup)); },
          [&](const SglrConfig& c) { return detail::make_sglr(c, std::move(setup)); },
          [&](const AsyncConfig& c) { return detail::make_async(c, std::move(setup)); },
          [&](const FedAvgConfig& c) { return detail::make_fedavg(c, std::move(setup)); },
          [&](const LocalOnlyConfig&) { return detail::make_local(std::move(setup)); },
      },
      cfg);
}

namespace detail {

ParadigmBase::ParadigmBase(Setup setup) : setup_(std::move(setup)) {
  router_.register_participant(server_id());
  for (std::size_t i = 0; i < setup_.shards.size(); ++i) {
    ClientState c;
    c.index = i;
    c.shard = setup_.shards[i];
    clients_.push_back(std::move(c));
    router_.register_participant(client_id(i));
  }
}

std::vector<std::vector<std::size_t>> ParadigmBase::schedule(std::size_t client,
                                                             std::size_t epoch) const {
  return data::epoch_batches(clients_[client].shard.indices, opt().batch_size,
                             batch_seed(seed(), client, epoch));
}

data::Batch ParadigmBase::batch(std::span<const std::size_t> indices) const {
  return data::gather(train(), indices);
}

Evaluation ParadigmBase::evaluate_per_client(const data::Dataset& test) const {
  std::vector<Evaluation> evals;
  std::vector<const ClientState*> scored;
  std::vector<Evaluation> scored_evals;
  for (const auto& c : clients_) {
    if (!active(c.index)) continue;
    std::optional<Evaluation> ev;
    for (std::size_t k = 0; k < scored.size(); ++k)
      if (scored[k]->segments == c.segments) ev = scored_evals[k];
    if (!ev) {
      std::vector<Model> chain;
      chain.push_back(c.segments.at(0));
      if (server_.segment) chain.push_back(*server_.segment);
      for (std::size_t s = 1; s < c.segments.size(); ++s) chain.push_back(c.segments[s]);
      ev = paradigms::evaluate(chain, test);
      scored.push_back(&c);
      scored_evals.push_back(*ev);
    }
    evals.push_back(*ev);
  }
  if (evals.empty()) {
    std::vector<Model> chain{clients_.at(0).segments.at(0)};
    if (server_.segment) chain.push_back(*server_.segment);
    for (std::size_t s = 1; s < clients_[0].segments.size(); ++s)
      chain.push_back(clients_[0].segments[s]);
    return paradigms::evaluate(chain, test);
  }
  return mean_evaluation(evals);
}

void ParadigmBase::aggregate_fronts(std::size_t epoch) {
  const auto round = static_cast<std::uint32_t>(epoch);
  std::vector<nn::Shape> signature;
  for (const auto& p : clients_[0].segments[0].parameters()) signature.push_back(p.shape());
  for (auto& c : clients_) {
    if (!active(c.index)) continue;
    router_.send(Message::weights(client_id(c.index), server_id(), round, c.segments[0].parameters()));
  }
  std::vector<std::vector<nn::Tensor>> sets;
  std::vector<std::size_t> sizes;
  for (auto& c : clients_) {
    if (!active(c.index)) continue;
    Message m = router_.expect(server_id(), Tag::WeightBlob);
    protocol::check_weight_signature(m, signature);
    sizes.push_back(clients_[m.from.index].shard.indices.size());
    sets.push_back(std::move(m.tensors));
  }
  if (sets.empty()) return;
  const auto averaged = fed_avg(sets, sizes);
  for (auto& c : clients_)
    router_.send(Message::weights(server_id(), client_id(c.index), round, averaged));
  for (auto& c : clients_) {
    Message m = router_.expect(client_id(c.index), Tag::WeightBlob);
    protocol::check_weight_signature(m, signature);
    c.segments[0].set_parameters(m.tensors);
  }
}

ServerStep server_step(Model& back, const nn::Tensor& z, std::span<const std::int32_t> labels,
                       double lr) {
  auto fwd = nn::forward(back, z);
  auto loss = nn::cross_entropy(fwd.output, labels);
  auto grads = nn::backward(back, fwd.tape, loss.grad, true);
  nn::sgd_step(back, grads.params, lr);
  return {static_cast<double>(loss.loss), std::move(grads.input)};
}

void apply_cut_grad(Model& segment, const nn::Tape<float>& tape, const nn::Tensor& grad,
                    double lr) {
  auto grads = nn::backward(segment, tape, grad, false);
  nn::sgd_step(segment, grads.params, lr);
}

double local_step(Model& model, const data::Batch& batch, double lr) {
  auto fwd = nn::forward(model, batch.features);
  auto loss = nn::cross_entropy(fwd.output, batch.labels);
  auto grads = nn::backward(model, fwd.tape, loss.grad, false);
  nn::sgd_step(model, grads.params, lr);
  return static_cast<double>(loss.loss);
}

void finish_stats(EpochStats& stats, double loss_sum) {
  stats.mean_loss = stats.batches ? loss_sum / static_cast<double>(stats.batches)
                                  : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail
}  // namespace splitbench::paradigms
