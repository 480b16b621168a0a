// PSL-style paradigms: every client forwards its batch for the step, the
// server answers each smashed batch in client-index order, and the cut
// gradients go back once the whole step has been processed.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "internal.hpp"
#include "splitbench/rng.hpp"

namespace splitbench::paradigms::detail {

namespace {

class ParallelBase : public ParadigmBase {
 public:
  explicit ParallelBase(Setup setup) : ParadigmBase(std::move(setup)) {
    auto parts = nn::split(setup_.model, setup_.cut);
    if (parts.segments.size() != 2) throw Error("invalid_cut", "expected a two-way cut");
    for (auto& c : clients_) c.segments = {parts.front()};
    server_.segment = parts.back();
  }

  Evaluation evaluate(const data::Dataset& test) const override {
    return evaluate_per_client(test);
  }

 protected:
  // Server-computed cut gradients for one step, keyed by client, before
  // they are sent back. SGLR rewrites them here.
  virtual void mix_gradients(std::size_t /*epoch*/, std::size_t /*step*/,
                             std::map<std::size_t, nn::Tensor>& /*grads*/) {}

  virtual double server_lr() const { return opt().lr_server; }

  // One epoch of the parallel flow. Clients in state C sit out; clients in
  // state B upload but receive no gradient.
  EpochStats parallel_epoch(std::size_t epoch, std::span<const AsyncState> states) {
    EpochStats stats;
    stats.epoch = epoch;
    stats.clients.resize(client_count());
    const auto round = static_cast<std::uint32_t>(epoch);

    std::vector<std::vector<std::vector<std::size_t>>> plans(client_count());
    std::size_t steps = 0;
    for (std::size_t i = 0; i < client_count(); ++i) {
      stats.clients[i].state = states[i];
      if (!active(i) || states[i] == AsyncState::C) continue;
      plans[i] = schedule(i, epoch);
      steps = std::max(steps, plans[i].size());
    }

    std::vector<double> client_sum(client_count(), 0.0);
    double loss_sum = 0;
    std::vector<std::optional<nn::Tape<float>>> tapes(client_count());
    for (std::size_t s = 0; s < steps; ++s) {
      const auto index = static_cast<std::uint32_t>(s);
      for (std::size_t i = 0; i < client_count(); ++i) {
        tapes[i].reset();
        if (s >= plans[i].size()) continue;
        data::Batch b = batch(plans[i][s]);
        auto fwd = nn::forward(clients_[i].segments[0], std::move(b.features));
        router_.send(Message::smashed(client_id(i), server_id(), round, index,
                                      std::move(fwd.output), std::move(b.labels)));
        if (states[i] == AsyncState::A) tapes[i] = std::move(fwd.tape);
      }

      while (auto m = router_.receive(server_id())) {
        if (m->tag != Tag::SmashedBatch)
          throw Error("protocol_violation", "server expected SmashedBatch, got " + tag_name(m->tag));
        server_.pending.push_back(std::move(*m));
      }
      std::map<std::size_t, nn::Tensor> grads;
      for (auto& m : server_.pending) {
        const std::size_t i = m.from.index;
        auto step = server_step(*server_.segment, m.tensors[0], m.labels, server_lr());
        client_sum[i] += step.loss;
        loss_sum += step.loss;
        stats.clients[i].batches += 1;
        stats.batches += 1;
        if (states[i] == AsyncState::A) grads.emplace(i, std::move(step.grad));
      }
      server_.pending.clear();
      mix_gradients(epoch, s, grads);

      for (auto& [i, g] : grads)
        router_.send(Message::cut_grad(server_id(), client_id(i), round, index, std::move(g)));
      for (std::size_t i = 0; i < client_count(); ++i) {
        if (!tapes[i]) continue;
        Message g = router_.expect(client_id(i), Tag::CutGrad);
        apply_cut_grad(clients_[i].segments[0], *tapes[i], g.tensors[0], opt().lr_client);
      }
    }

    for (std::size_t i = 0; i < client_count(); ++i) {
      auto& cs = stats.clients[i];
      cs.mean_loss = cs.batches ? client_sum[i] / static_cast<double>(cs.batches)
                                : std::numeric_limits<double>::quiet_NaN();
    }
    finish_stats(stats, loss_sum);
    return stats;
  }

  std::vector<AsyncState> all_a() const { return std::vector<AsyncState>(client_count(), AsyncState::A); }
};

class Psl final : public ParallelBase {
 public:
  using ParallelBase::ParallelBase;
  std::string name() const override { return "psl"; }
  EpochStats train_epoch(std::size_t epoch) override { return parallel_epoch(epoch, all_a()); }
};

class SplitFed final : public ParallelBase {
 public:
  SplitFed(const SplitFedConfig& cfg, Setup setup) : ParallelBase(std::move(setup)), cfg_(cfg) {}

  std::string name() const override { return "splitfed"; }

  EpochStats train_epoch(std::size_t epoch) override {
    EpochStats stats = cfg_.version == 1 ? parallel_epoch(epoch, all_a()) : in_order_epoch(epoch);
    if (cfg_.aggregate_every != kNeverAggregate && (epoch + 1) % cfg_.aggregate_every == 0)
      aggregate_fronts(epoch);
    return stats;
  }

 private:
  // v2: each client runs its whole shard against the shared server segment
  // before the next client starts.
  EpochStats in_order_epoch(std::size_t epoch) {
    EpochStats stats;
    stats.epoch = epoch;
    stats.clients.resize(client_count());
    const auto round = static_cast<std::uint32_t>(epoch);
    double loss_sum = 0;
    for (std::size_t i = 0; i < client_count(); ++i) {
      auto& cs = stats.clients[i];
      if (!active(i)) {
        cs.mean_loss = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      auto& front = clients_[i].segments[0];
      double sum = 0;
      const auto plan = schedule(i, epoch);
      for (std::size_t s = 0; s < plan.size(); ++s) {
        const auto index = static_cast<std::uint32_t>(s);
        data::Batch b = batch(plan[s]);
        auto fwd = nn::forward(front, std::move(b.features));
        router_.send(Message::smashed(client_id(i), server_id(), round, index,
                                      std::move(fwd.output), std::move(b.labels)));
        Message z = router_.expect(server_id(), Tag::SmashedBatch);
        auto step = server_step(*server_.segment, z.tensors[0], z.labels, opt().lr_server);
        sum += step.loss;
        router_.send(Message::cut_grad(server_id(), client_id(i), round, index, std::move(step.grad)));
        Message g = router_.expect(client_id(i), Tag::CutGrad);
        apply_cut_grad(front, fwd.tape, g.tensors[0], opt().lr_client);
      }
      cs.batches = plan.size();
      cs.mean_loss = sum / static_cast<double>(plan.size());
      stats.batches += plan.size();
      loss_sum += sum;
    }
    finish_stats(stats, loss_sum);
    return stats;
  }

  SplitFedConfig cfg_;
};

class Sglr final : public ParallelBase {
 public:
  Sglr(const SglrConfig& cfg, Setup setup) : ParallelBase(std::move(setup)), cfg_(cfg) {
    scale_ = cfg_.server_lr_scale.value_or(static_cast<double>(client_count()));
  }

  std::string name() const override { return "sglr"; }
  EpochStats train_epoch(std::size_t epoch) override { return parallel_epoch(epoch, all_a()); }

 protected:
  double server_lr() const override { return scale_ * opt().lr_client; }

  void mix_gradients(std::size_t epoch, std::size_t step,
                     std::map<std::size_t, nn::Tensor>& grads) override {
    std::vector<std::size_t> senders;
    for (const auto& [i, g] : grads) senders.push_back(i);
    auto k = static_cast<std::size_t>(
        std::llround(cfg_.subset_fraction * static_cast<double>(senders.size())));
    if (k == 0) {
      spdlog::warn("sglr: subset of {} senders rounds to zero, averaging over all", senders.size());
      k = senders.size();
    }
    k = std::min(k, senders.size());
    Rng rng(derive_seed(seed(), "sglr-subset", epoch, step));
    rng.shuffle(std::span<std::size_t>(senders));
    senders.resize(k);
    std::sort(senders.begin(), senders.end());

    // A short final batch has a different shape, so average per shape.
    std::map<nn::Shape, std::vector<std::size_t>> groups;
    for (auto i : senders) groups[grads.at(i).shape()].push_back(i);
    for (const auto& [shape, members] : groups) average_gradients(grads, members);
  }

 private:
  SglrConfig cfg_;
  double scale_ = 1;
};

class Async final : public ParallelBase {
 public:
  Async(const AsyncConfig& cfg, Setup setup) : ParallelBase(std::move(setup)), cfg_(cfg) {
    for (auto& c : clients_) c.async_state = cfg_.pin_state.value_or(AsyncState::A);
  }

  std::string name() const override { return "async"; }

  EpochStats train_epoch(std::size_t epoch) override {
    std::vector<AsyncState> states;
    for (const auto& c : clients_) states.push_back(c.async_state);
    EpochStats stats = parallel_epoch(epoch, states);
    for (auto& c : clients_) c.async_state = next_state(c, stats.clients[c.index]);
    return stats;
  }

 private:
  // Compares this epoch's mean loss with the previous measurement. A C epoch
  // measures nothing, so the client probes with B next.
  AsyncState next_state(ClientState& c, const ClientEpochStats& cs) const {
    if (cfg_.pin_state) return *cfg_.pin_state;
    if (cs.state == AsyncState::C || cs.batches == 0) return AsyncState::B;
    const std::optional<double> prev = c.last_loss;
    c.last_loss = cs.mean_loss;
    if (!prev) return AsyncState::A;
    const double delta = std::abs(cs.mean_loss - *prev);
    if (delta >= cfg_.loss_threshold) return AsyncState::A;
    if (delta >= cfg_.loss_threshold / 2) return AsyncState::B;
    return AsyncState::C;
  }

  AsyncConfig cfg_;
};

}  // namespace

std::unique_ptr<Paradigm> make_psl(Setup setup) { return std::make_unique<Psl>(std::move(setup)); }

std::unique_ptr<Paradigm> make_splitfed(const SplitFedConfig& cfg, Setup setup) {
  return std::make_unique<SplitFed>(cfg, std::move(setup));
}

std::unique_ptr<Paradigm> make_sglr(const SglrConfig& cfg, Setup setup) {
  return std::make_unique<Sglr>(cfg, std::move(setup));
}

std::unique_ptr<Paradigm> make_async(const AsyncConfig& cfg, Setup setup) {
  return std::make_unique<Async>(cfg, std::move(setup));
}

}  // namespace splitbench::paradigms::detail
