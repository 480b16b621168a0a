#pragma once

#include <memory>

#include "splitbench/data/batches.hpp"
#include "splitbench/nn/loss.hpp"
#include "splitbench/paradigms/paradigm.hpp"

namespace splitbench::paradigms::detail {

using protocol::Message;
using protocol::ParticipantId;
using protocol::Tag;

inline ParticipantId client_id(std::size_t i) { return ParticipantId::client(i); }
inline ParticipantId server_id() { return ParticipantId::server(); }

// Base carrying the shared run context. Registers the server and every
// client with the router.
class ParadigmBase : public Paradigm {
 protected:
  explicit ParadigmBase(Setup setup);

  const data::Dataset& train() const { return *setup_.train; }
  const nn::OptimizerConfig& opt() const { return setup_.opt; }
  std::uint64_t seed() const { return setup_.seed; }
  bool active(std::size_t i) const { return !clients_[i].shard.indices.empty(); }
  std::size_t client_count() const { return clients_.size(); }

  std::vector<std::vector<std::size_t>> schedule(std::size_t client, std::size_t epoch) const;
  data::Batch batch(std::span<const std::size_t> indices) const;

  // Mean over active clients of evaluating (client segments around the
  // server segment); clients with identical weights are scored once.
  Evaluation evaluate_per_client(const data::Dataset& test) const;

  // Uploads each active client's segment 0 as a WeightBlob, averages by
  // shard size, and downloads the result to every client.
  void aggregate_fronts(std::size_t epoch);

  Setup setup_;
};

struct ServerStep {
  double loss = 0;
  nn::Tensor grad;  // gradient w.r.t. the received activation
};

// Forward, loss, backward and one SGD step on a server-held back segment.
ServerStep server_step(Model& back, const nn::Tensor& z, std::span<const std::int32_t> labels,
                       double lr);

// Applies a received cut gradient to a client segment recorded in `tape`.
void apply_cut_grad(Model& segment, const nn::Tape<float>& tape, const nn::Tensor& grad,
                    double lr);

// One plain SGD step on an unsplit model; returns the batch loss.
double local_step(Model& model, const data::Batch& batch, double lr);

void finish_stats(EpochStats& stats, double loss_sum);

std::unique_ptr<Paradigm> make_vanilla(const VanillaConfig& cfg, Setup setup);
std::unique_ptr<Paradigm> make_ushape(const UShapeConfig& cfg, Setup setup);
std::unique_ptr<Paradigm> make_psl(Setup setup);
std::unique_ptr<Paradigm> make_splitfed(const SplitFedConfig& cfg, Setup setup);
std::unique_ptr<Paradigm> make_sglr(const SglrConfig& cfg, Setup setup);
std::unique_ptr<Paradigm> make_async(const AsyncConfig& cfg, Setup setup);
std::unique_ptr<Paradigm> make_fedavg(const FedAvgConfig& cfg, Setup setup);
std::unique_ptr<Paradigm> make_local(Setup setup);

}  // namespace splitbench::paradigms::detail
