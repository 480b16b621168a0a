// Vanilla and U-shape: clients train one after another against a single
// server segment, handing their client-side weights to the next client.

#include "internal.hpp"

namespace splitbench::paradigms::detail {

namespace {

class SequentialBase : public ParadigmBase {
 protected:
  using ParadigmBase::ParadigmBase;

  // Next active client after `i`, cyclically; `i` itself if it is the only one.
  std::size_t next_active(std::size_t i) const {
    for (std::size_t k = 1; k <= client_count(); ++k) {
      const std::size_t j = (i + k) % client_count();
      if (active(j)) return j;
    }
    return i;
  }

  std::vector<nn::Tensor> client_weights(std::size_t i) const {
    std::vector<nn::Tensor> out;
    for (const auto& seg : clients_[i].segments)
      for (auto& p : seg.parameters()) out.push_back(std::move(p));
    return out;
  }

  void load_client_weights(std::size_t i, std::span<const nn::Tensor> params) {
    std::size_t at = 0;
    for (auto& seg : clients_[i].segments) {
      const std::size_t n = seg.parameter_tensor_count();
      seg.set_parameters(params.subspan(at, n));
      at += n;
    }
  }

  std::vector<nn::Shape> signature(std::size_t i) const {
    std::vector<nn::Shape> sig;
    for (const auto& p : client_weights(i)) sig.push_back(p.shape());
    return sig;
  }

  // WeightBlob hand-off from `from` to `to`, through the server when
  // `via_server`.
  void relay(std::size_t from, std::size_t to, std::uint32_t round, bool via_server) {
    const auto sig = signature(from);
    if (via_server) {
      router_.send(Message::weights(client_id(from), server_id(), round, client_weights(from)));
      Message up = router_.expect(server_id(), Tag::WeightBlob);
      protocol::check_weight_signature(up, sig);
      router_.send(Message::weights(server_id(), client_id(to), round, std::move(up.tensors)));
    } else {
      router_.send(Message::weights(client_id(from), client_id(to), round, client_weights(from)));
    }
    Message down = router_.expect(client_id(to), Tag::WeightBlob);
    protocol::check_weight_signature(down, sig);
    load_client_weights(to, down.tensors);
  }

  virtual double train_batch(std::size_t client, const data::Batch& b, std::uint32_t round,
                             std::uint32_t index) = 0;
  virtual bool relay_via_server() const = 0;

 public:
  EpochStats train_epoch(std::size_t epoch) override {
    EpochStats stats;
    stats.epoch = epoch;
    stats.clients.resize(client_count());
    const auto round = static_cast<std::uint32_t>(epoch);
    double loss_sum = 0;
    for (std::size_t i = 0; i < client_count(); ++i) {
      if (!active(i)) continue;
      double client_sum = 0;
      const auto plan = schedule(i, epoch);
      for (std::size_t s = 0; s < plan.size(); ++s) {
        const double loss = train_batch(i, batch(plan[s]), round, static_cast<std::uint32_t>(s));
        client_sum += loss;
      }
      stats.clients[i].batches = plan.size();
      stats.clients[i].mean_loss = client_sum / static_cast<double>(plan.size());
      stats.batches += plan.size();
      loss_sum += client_sum;
      last_trained_ = i;
      const std::size_t next = next_active(i);
      if (next != i) relay(i, next, round, relay_via_server());
    }
    for (std::size_t i = 0; i < client_count(); ++i)
      if (!active(i)) stats.clients[i].mean_loss = std::numeric_limits<double>::quiet_NaN();
    finish_stats(stats, loss_sum);
    return stats;
  }

  Evaluation evaluate(const data::Dataset& test) const override {
    const auto& segs = clients_[last_trained_].segments;
    std::vector<Model> chain{segs.at(0)};
    chain.push_back(*server_.segment);
    for (std::size_t s = 1; s < segs.size(); ++s) chain.push_back(segs[s]);
    return paradigms::evaluate(chain, test);
  }

 private:
  std::size_t last_trained_ = 0;
};

class Vanilla final : public SequentialBase {
 public:
  Vanilla(const VanillaConfig& cfg, Setup setup) : SequentialBase(std::move(setup)), cfg_(cfg) {
    auto parts = nn::split(setup_.model, setup_.cut);
    if (parts.segments.size() != 2) throw Error("invalid_cut", "vanilla needs a two-way cut");
    for (auto& c : clients_) c.segments = {parts.front()};
    server_.segment = parts.back();
  }

  std::string name() const override { return "vanilla"; }

 protected:
  bool relay_via_server() const override { return cfg_.relay == Relay::Centralized; }

  double train_batch(std::size_t i, const data::Batch& b, std::uint32_t round,
                     std::uint32_t index) override {
    auto& front = clients_[i].segments[0];
    auto fwd = nn::forward(front, b.features);
    router_.send(Message::smashed(client_id(i), server_id(), round, index, std::move(fwd.output),
                                  b.labels));

    Message z = router_.expect(server_id(), Tag::SmashedBatch);
    auto step = server_step(*server_.segment, z.tensors[0], z.labels, opt().lr_server);
    router_.send(Message::cut_grad(server_id(), client_id(i), round, index, std::move(step.grad)));

    Message g = router_.expect(client_id(i), Tag::CutGrad);
    apply_cut_grad(front, fwd.tape, g.tensors[0], opt().lr_client);
    return step.loss;
  }

 private:
  VanillaConfig cfg_;
};

class UShape final : public SequentialBase {
 public:
  UShape(const UShapeConfig& cfg, Setup setup) : SequentialBase(std::move(setup)) {
    const nn::CutSpec cut =
        cfg.cut1 ? nn::CutSpec::three_way(cfg.cut1, cfg.cut2) : setup_.ushape_cut;
    auto parts = nn::split(setup_.model, cut);
    if (parts.segments.size() != 3) throw Error("invalid_cut", "u-shape needs a three-way cut");
    for (auto& c : clients_) c.segments = {parts.head(), parts.tail()};
    server_.segment = parts.body();
  }

  std::string name() const override { return "ushape"; }

 protected:
  bool relay_via_server() const override { return true; }

  double train_batch(std::size_t i, const data::Batch& b, std::uint32_t round,
                     std::uint32_t index) override {
    auto& head = clients_[i].segments[0];
    auto& tail = clients_[i].segments[1];
    auto& body = *server_.segment;

    auto h = nn::forward(head, b.features);
    router_.send(Message::smashed(client_id(i), server_id(), round, index, std::move(h.output)));

    Message hz = router_.expect(server_id(), Tag::SmashedBatch);
    auto mid = nn::forward(body, std::move(hz.tensors[0]));
    router_.send(Message::smashed(server_id(), client_id(i), round, index, std::move(mid.output)));

    // Labels never leave the client: the tail computes the loss.
    Message bz = router_.expect(client_id(i), Tag::SmashedBatch);
    auto t = nn::forward(tail, std::move(bz.tensors[0]));
    auto loss = nn::cross_entropy(t.output, b.labels);
    auto tg = nn::backward(tail, t.tape, loss.grad, true);
    nn::sgd_step(tail, tg.params, opt().lr_client);
    router_.send(Message::cut_grad(client_id(i), server_id(), round, index, std::move(tg.input)));

    Message gb = router_.expect(server_id(), Tag::CutGrad);
    auto bg = nn::backward(body, mid.tape, gb.tensors[0], true);
    nn::sgd_step(body, bg.params, opt().lr_server);
    router_.send(Message::cut_grad(server_id(), client_id(i), round, index, std::move(bg.input)));

    Message gh = router_.expect(client_id(i), Tag::CutGrad);
    apply_cut_grad(head, h.tape, gh.tensors[0], opt().lr_client);
    return static_cast<double>(loss.loss);
  }
};

}  // namespace

std::unique_ptr<Paradigm> make_vanilla(const VanillaConfig& cfg, Setup setup) {
  return std::make_unique<Vanilla>(cfg, std::move(setup));
}

std::unique_ptr<Paradigm> make_ushape(const UShapeConfig& cfg, Setup setup) {
  return std::make_unique<UShape>(cfg, std::move(setup));
}

}  // namespace splitbench::paradigms::detail
