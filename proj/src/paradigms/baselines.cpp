// Unsplit baselines: FedAvg over full models, and local-only training.

#include "internal.hpp"

namespace splitbench::paradigms::detail {

namespace {

class FedAvg final : public ParadigmBase {
 public:
  FedAvg(const FedAvgConfig& cfg, Setup setup) : ParadigmBase(std::move(setup)), cfg_(cfg) {
    for (auto& c : clients_) c.segments = {setup_.model};
    server_.segment = setup_.model;
  }

  std::string name() const override { return "fedavg"; }

  EpochStats train_epoch(std::size_t epoch) override {
    EpochStats stats;
    stats.epoch = epoch;
    stats.clients.resize(client_count());
    double loss_sum = 0;
    for (std::size_t i = 0; i < client_count(); ++i) {
      auto& cs = stats.clients[i];
      if (!active(i)) {
        cs.mean_loss = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double sum = 0;
      for (std::size_t l = 0; l < cfg_.local_epochs; ++l) {
        for (const auto& idx : schedule(i, epoch * cfg_.local_epochs + l)) {
          sum += local_step(clients_[i].segments[0], batch(idx), opt().lr_client);
          cs.batches += 1;
        }
      }
      cs.mean_loss = sum / static_cast<double>(cs.batches);
      stats.batches += cs.batches;
      loss_sum += sum;
    }
    aggregate_fronts(epoch);
    server_.segment = clients_[0].segments[0];
    finish_stats(stats, loss_sum);
    return stats;
  }

  Evaluation evaluate(const data::Dataset& test) const override {
    const Model& global = *server_.segment;
    return paradigms::evaluate(std::span<const Model>(&global, 1), test);
  }

 private:
  FedAvgConfig cfg_;
};

class LocalOnly final : public ParadigmBase {
 public:
  explicit LocalOnly(Setup setup) : ParadigmBase(std::move(setup)) {
    for (auto& c : clients_) c.segments = {setup_.model};
  }

  std::string name() const override { return "local"; }

  EpochStats train_epoch(std::size_t epoch) override {
    EpochStats stats;
    stats.epoch = epoch;
    stats.clients.resize(client_count());
    double loss_sum = 0;
    for (std::size_t i = 0; i < client_count(); ++i) {
      auto& cs = stats.clients[i];
      if (!active(i)) {
        cs.mean_loss = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double sum = 0;
      for (const auto& idx : schedule(i, epoch)) {
        sum += local_step(clients_[i].segments[0], batch(idx), opt().lr_client);
        cs.batches += 1;
      }
      cs.mean_loss = sum / static_cast<double>(cs.batches);
      stats.batches += cs.batches;
      loss_sum += sum;
    }
    finish_stats(stats, loss_sum);
    return stats;
  }

  Evaluation evaluate(const data::Dataset& test) const override {
    return evaluate_per_client(test);
  }
};

}  // namespace

std::unique_ptr<Paradigm> make_fedavg(const FedAvgConfig& cfg, Setup setup) {
  return std::make_unique<FedAvg>(cfg, std::move(setup));
}

std::unique_ptr<Paradigm> make_local(Setup setup) {
  return std::make_unique<LocalOnly>(std::move(setup));
}

}  // namespace splitbench::paradigms::detail
