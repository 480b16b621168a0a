#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "splitbench/data/dataset.hpp"
#include "splitbench/data/partition.hpp"
#include "splitbench/nn/optim.hpp"
#include "splitbench/nn/stack.hpp"
#include "splitbench/paradigms/evaluate.hpp"
#include "splitbench/protocol/router.hpp"

namespace splitbench::paradigms {

using Model = nn::LayerStack<float>;

enum class Relay { Centralized, P2P };

// AsyncSL per-client, per-epoch exchange state.
//   A: smashed data up, cut gradient down; both sides update.
//   B: smashed data up only; the server updates, the client does not.
//   C: no exchange and no updates.
enum class AsyncState { A, B, C };

std::string async_state_name(AsyncState s);

inline constexpr std::size_t kNeverAggregate = std::numeric_limits<std::size_t>::max();

struct VanillaConfig {
  Relay relay = Relay::Centralized;
  friend bool operator==(const VanillaConfig&, const VanillaConfig&) = default;
};

// Cuts of zero mean "use the model's default three-way split".
struct UShapeConfig {
  std::size_t cut1 = 0;
  std::size_t cut2 = 0;
  friend bool operator==(const UShapeConfig&, const UShapeConfig&) = default;
};

struct PslConfig {
  friend bool operator==(const PslConfig&, const PslConfig&) = default;
};

struct SplitFedConfig {
  int version = 1;                     // 1: parallel batches, 2: clients in order
  std::size_t aggregate_every = 1;     // epochs; kNeverAggregate disables
  friend bool operator==(const SplitFedConfig&, const SplitFedConfig&) = default;
};

struct SglrConfig {
  double subset_fraction = 1.0;
  std::optional<double> server_lr_scale;  // defaults to the client count
  friend bool operator==(const SglrConfig&, const SglrConfig&) = default;
};

struct AsyncConfig {
  double loss_threshold = 0.10;
  std::optional<AsyncState> pin_state;  // hold every client in one state
  friend bool operator==(const AsyncConfig&, const AsyncConfig&) = default;
};

struct FedAvgConfig {
  std::size_t local_epochs = 1;
  friend bool operator==(const FedAvgConfig&, const FedAvgConfig&) = default;
};

struct LocalOnlyConfig {
  friend bool operator==(const LocalOnlyConfig&, const LocalOnlyConfig&) = default;
};

using ParadigmConfig = std::variant<VanillaConfig, UShapeConfig, PslConfig, SplitFedConfig,
                                    SglrConfig, AsyncConfig, FedAvgConfig, LocalOnlyConfig>;

std::string paradigm_name(const ParadigmConfig& cfg);
void validate(const ParadigmConfig& cfg);

// Whether the paradigm splits the model (false for FedAvg / LocalOnly).
bool is_split(const ParadigmConfig& cfg);

struct ClientState {
  std::size_t index = 0;
  data::Shard shard;
  // front | head + tail | full model, depending on the paradigm
  std::vector<Model> segments;
  AsyncState async_state = AsyncState::A;
  std::optional<double> last_loss;
};

struct ServerState {
  // back | body | global model (FedAvg); empty for LocalOnly
  std::optional<Model> segment;
  // Smashed batches received but not yet answered in the current step.
  std::vector<protocol::Message> pending;
};

struct ClientEpochStats {
  std::size_t batches = 0;
  double mean_loss = 0;  // NaN when the client computed no loss this epoch
  AsyncState state = AsyncState::A;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0;     // over every loss evaluation in the epoch
  std::size_t batches = 0;  // loss evaluations in the epoch
  std::vector<ClientEpochStats> clients;
};

struct Setup {
  const data::Dataset* train = nullptr;
  std::vector<data::Shard> shards;
  Model model;                 // initial weights, copied to every participant
  nn::CutSpec cut;             // two-way split
  nn::CutSpec ushape_cut;      // three-way split (U-shape only)
  nn::OptimizerConfig opt;
  std::uint64_t seed = 0;
};

class Paradigm {
 public:
  virtual ~Paradigm() = default;

  virtual std::string name() const = 0;
  // `epoch` is zero-based; it selects the batch order and tags messages.
  virtual EpochStats train_epoch(std::size_t epoch) = 0;
  virtual Evaluation evaluate(const data::Dataset& test) const = 0;

  const std::vector<ClientState>& clients() const noexcept { return clients_; }
  std::vector<ClientState>& clients() noexcept { return clients_; }
  const ServerState& server() const noexcept { return server_; }
  ServerState& server() noexcept { return server_; }
  const protocol::Router& router() const noexcept { return router_; }
  protocol::Router& router() noexcept { return router_; }

 protected:
  std::vector<ClientState> clients_;
  ServerState server_;
  protocol::Router router_;
};

std::unique_ptr<Paradigm> make_paradigm(const ParadigmConfig& cfg, Setup setup);

// Per-parameter mean weighted by shard size. Terms are summed in double in
// sorted order, so the result does not depend on argument order.
std::vector<nn::Tensor> fed_avg(std::span<const std::vector<nn::Tensor>> weight_sets,
                                std::span<const std::size_t> sizes);

// Sets every member's gradient to the members' elementwise mean, summed in
// double in member order. Members must share one shape.
void average_gradients(std::map<std::size_t, nn::Tensor>& grads,
                       std::span<const std::size_t> members);

// Seed for client `client`'s batch order in `epoch`.
std::uint64_t batch_seed(std::uint64_t seed, std::size_t client, std::size_t epoch);

}  // namespace splitbench::paradigms
