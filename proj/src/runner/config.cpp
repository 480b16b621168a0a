#include "splitbench/runner/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "splitbench/error.hpp"
#include "splitbench/rng.hpp"

namespace splitbench::runner {

using nlohmann::json;
namespace fs = std::filesystem;
namespace pd = splitbench::paradigms;

namespace {

// Typed access to one JSON object; remembers which keys were read so that
// leftovers can be reported as unknown fields.
class Reader {
 public:
  Reader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "config" : prefix_, "expected an object");
  }

  std::string field(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  std::optional<T> get(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v->is_number_integer()) throw ConfigError(field(key), "expected an integer");
      if (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0)
        throw ConfigError(field(key), "must be >= 0");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v->is_number()) throw ConfigError(field(key), "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
    }
    return v->get<T>();
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (auto v = get<T>(key)) out = *v;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown field");
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal();
}

std::string relay_name(pd::Relay r) { return r == pd::Relay::Centralized ? "centralized" : "p2p"; }

pd::ParadigmConfig parse_paradigm(const json& j) {
  if (j.is_string()) return parse_paradigm(json{{"name", j}});
  Reader r(j, "paradigm");
  const auto name = r.get<std::string>("name");
  if (!name) throw ConfigError("paradigm.name", "missing");
  if (*name == "vanilla") {
    pd::VanillaConfig c;
    if (auto relay = r.get<std::string>("relay")) {
      if (*relay == "centralized") c.relay = pd::Relay::Centralized;
      else if (*relay == "p2p") c.relay = pd::Relay::P2P;
      else throw ConfigError("paradigm.relay", "expected 'centralized' or 'p2p', got '" + *relay + "'");
    }
    r.finish();
    return c;
  }
  if (*name == "ushape") {
    pd::UShapeConfig c;
    if (const json* cuts = r.raw("cuts")) {
      if (!cuts->is_array() || cuts->size() != 2 || !(*cuts)[0].is_number_unsigned() ||
          !(*cuts)[1].is_number_unsigned())
        throw ConfigError("paradigm.cuts", "expected two layer boundaries");
      c.cut1 = (*cuts)[0].get<std::size_t>();
      c.cut2 = (*cuts)[1].get<std::size_t>();
    }
    r.finish();
    return c;
  }
  if (*name == "psl") {
    r.finish();
    return pd::PslConfig{};
  }
  if (*name == "splitfed") {
    pd::SplitFedConfig c;
    r.read("version", c.version);
    if (const json* every = r.raw("aggregate_every")) {
      if (every->is_string() && every->get<std::string>() == "never") c.aggregate_every = pd::kNeverAggregate;
      else if (every->is_number_unsigned()) c.aggregate_every = every->get<std::size_t>();
      else throw ConfigError("paradigm.aggregate_every", "expected a positive integer or \"never\"");
    }
    r.finish();
    return c;
  }
  if (*name == "sglr") {
    pd::SglrConfig c;
    r.read("subset_fraction", c.subset_fraction);
    c.server_lr_scale = r.get<double>("server_lr_scale");
    r.finish();
    return c;
  }
  if (*name == "async") {
    pd::AsyncConfig c;
    r.read("loss_threshold", c.loss_threshold);
    if (auto pin = r.get<std::string>("pin_state")) {
      if (*pin == "A") c.pin_state = pd::AsyncState::A;
      else if (*pin == "B") c.pin_state = pd::AsyncState::B;
      else if (*pin == "C") c.pin_state = pd::AsyncState::C;
      else throw ConfigError("paradigm.pin_state", "expected A, B or C");
    }
    r.finish();
    return c;
  }
  if (*name == "fedavg") {
    pd::FedAvgConfig c;
    r.read("local_epochs", c.local_epochs);
    r.finish();
    return c;
  }
  if (*name == "local") {
    r.finish();
    return pd::LocalOnlyConfig{};
  }
  throw ConfigError("paradigm.name", "unknown paradigm '" + *name + "'");
}

DatasetConfig parse_dataset(const json& j, const fs::path& base) {
  if (j.is_string()) return parse_dataset(json{{"name", j}}, base);
  Reader r(j, "dataset");
  DatasetConfig d;
  const auto name = r.get<std::string>("name");
  if (!name) throw ConfigError("dataset.name", "missing");
  auto path = [&](const std::string& key, fs::path& out) {
    if (auto p = r.get<std::string>(key)) out = resolve(*p, base);
  };
  if (*name == "synth") {
    d.kind = DatasetKind::Synth;
    r.read("n", d.synth.n);
    r.read("dims", d.synth.dims);
    r.read("k", d.synth.k);
    r.read("spread", d.synth.spread);
    r.read("seed", d.synth.seed);
    r.read("test_n", d.synth_test);
  } else if (*name == "mnist") {
    d.kind = DatasetKind::Mnist;
    path("dir", d.dir);
  } else if (*name == "adult") {
    d.kind = DatasetKind::Adult;
    path("train", d.train);
    path("test", d.test);
    path("schema", d.schema);
  } else {
    throw ConfigError("dataset.name", "unknown dataset '" + *name + "'");
  }
  r.finish();
  return d;
}

void require_file(const fs::path& p, const std::string& field) {
  if (p.empty()) throw ConfigError(field, "missing");
  if (!fs::is_regular_file(p)) throw ConfigError(field, "no such file: " + p.string());
}

}  // namespace

std::string dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Synth: return "synth";
    case DatasetKind::Mnist: return "mnist";
    case DatasetKind::Adult: return "adult";
  }
  return "unknown";
}

json alpha_to_json(double alpha) {
  if (std::isinf(alpha)) return "inf";
  return alpha;
}

double alpha_from_json(const json& j, const std::string& field) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    throw ConfigError(field, "expected a number or \"inf\", got '" + s + "'");
  }
  if (!j.is_number()) throw ConfigError(field, "expected a number or \"inf\"");
  return j.get<double>();
}

void ExperimentConfig::validate() const {
  pd::validate(paradigm);
  opt.validate();
  if (n_clients < 1) throw ConfigError("n_clients", "must be >= 1");
  if (epochs < 1) throw ConfigError("epochs", "must be >= 1");
  partition.validate();
  if (partition.n_clients != n_clients)
    throw ConfigError("partition.n_clients", "must equal n_clients");
  if (cut && *cut == 0) throw ConfigError("cut", "must be >= 1");
  if (model && model->arch == nn::Arch::Mlp && model->hidden.empty())
    throw ConfigError("model.hidden", "needs at least one hidden layer");
  switch (dataset.kind) {
    case DatasetKind::Synth:
      if (dataset.synth.n < 1) throw ConfigError("dataset.n", "must be >= 1");
      if (dataset.synth.dims < 1) throw ConfigError("dataset.dims", "must be >= 1");
      if (dataset.synth.k < 2) throw ConfigError("dataset.k", "must be >= 2");
      if (!(dataset.synth.spread >= 0)) throw ConfigError("dataset.spread", "must be >= 0");
      if (dataset.synth_test < 1) throw ConfigError("dataset.test_n", "must be >= 1");
      break;
    case DatasetKind::Mnist:
      if (dataset.dir.empty()) throw ConfigError("dataset.dir", "missing");
      for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                            "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"})
        require_file(dataset.dir / f, "dataset.dir");
      break;
    case DatasetKind::Adult:
      require_file(dataset.train, "dataset.train");
      require_file(dataset.test, "dataset.test");
      require_file(dataset.schema, "dataset.schema");
      break;
  }
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  Reader r(j, "");
  ExperimentConfig c;
  const json* p = r.raw("paradigm");
  if (!p) throw ConfigError("paradigm", "missing");
  c.paradigm = parse_paradigm(*p);
  const json* d = r.raw("dataset");
  if (!d) throw ConfigError("dataset", "missing");
  c.dataset = parse_dataset(*d, base_dir);

  r.read("n_clients", c.n_clients);
  r.read("epochs", c.epochs);
  r.read("lr_client", c.opt.lr_client);
  r.read("lr_server", c.opt.lr_server);
  r.read("batch_size", c.opt.batch_size);
  r.read("seed", c.seed);
  if (auto out = r.get<std::string>("out_path")) c.out_path = resolve(*out, base_dir);

  if (const json* m = r.raw("model")) {
    Reader mr(*m, "model");
    nn::ModelSpec spec;
    const auto arch = mr.get<std::string>("arch");
    if (!arch) throw ConfigError("model.arch", "missing");
    if (*arch == "lenet") spec.arch = nn::Arch::LeNet;
    else if (*arch == "mlp") spec.arch = nn::Arch::Mlp;
    else throw ConfigError("model.arch", "unknown architecture '" + *arch + "'");
    if (const json* h = mr.raw("hidden")) {
      if (!h->is_array()) throw ConfigError("model.hidden", "expected a list of widths");
      spec.hidden.clear();
      for (const auto& w : *h) {
        if (!w.is_number_unsigned() || w.get<std::size_t>() == 0)
          throw ConfigError("model.hidden", "widths must be positive integers");
        spec.hidden.push_back(w.get<std::size_t>());
      }
    }
    mr.finish();
    c.model = spec;
  }

  if (const json* cut = r.raw("cut")) {
    if (cut->is_string()) {
      const auto s = cut->get<std::string>();
      if (s == "small") c.cut = nn::kLenetCutSmall;
      else if (s == "large") c.cut = nn::kLenetCutLarge;
      else throw ConfigError("cut", "expected a layer boundary, \"small\" or \"large\"");
    } else if (cut->is_number_unsigned()) {
      c.cut = cut->get<std::size_t>();
    } else {
      throw ConfigError("cut", "expected a layer boundary, \"small\" or \"large\"");
    }
  }

  if (const json* part = r.raw("partition")) {
    Reader pr(*part, "partition");
    if (const json* a = pr.raw("alpha")) c.partition.alpha = alpha_from_json(*a, "partition.alpha");
    if (auto scheme = pr.get<std::string>("scheme")) c.partition.scheme = data::scheme_from_name(*scheme);
    else c.partition.scheme = data::scheme_for_alpha(c.partition.alpha);
    c.partition.attribute = pr.get<std::string>("attribute");
    pr.read("strict", c.partition.strict);
    pr.finish();
  }
  r.finish();

  c.partition.n_clients = c.n_clients;
  c.partition.seed = derive_seed(c.seed, "partition");
  c.validate();
  return c;
}

ExperimentConfig parse_config_text(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j, base_dir);
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.parent_path());
}

json to_json(const pd::ParadigmConfig& cfg) {
  json j{{"name", pd::paradigm_name(cfg)}};
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, pd::VanillaConfig>) {
          j["relay"] = relay_name(c.relay);
        } else if constexpr (std::is_same_v<T, pd::UShapeConfig>) {
          if (c.cut1) j["cuts"] = {c.cut1, c.cut2};
        } else if constexpr (std::is_same_v<T, pd::SplitFedConfig>) {
          j["version"] = c.version;
          if (c.aggregate_every == pd::kNeverAggregate) j["aggregate_every"] = "never";
          else j["aggregate_every"] = c.aggregate_every;
        } else if constexpr (std::is_same_v<T, pd::SglrConfig>) {
          j["subset_fraction"] = c.subset_fraction;
          if (c.server_lr_scale) j["server_lr_scale"] = *c.server_lr_scale;
        } else if constexpr (std::is_same_v<T, pd::AsyncConfig>) {
          j["loss_threshold"] = c.loss_threshold;
          if (c.pin_state) j["pin_state"] = pd::async_state_name(*c.pin_state);
        } else if constexpr (std::is_same_v<T, pd::FedAvgConfig>) {
          j["local_epochs"] = c.local_epochs;
        }
      },
      cfg);
  return j;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["paradigm"] = to_json(c.paradigm);
  json d{{"name", dataset_kind_name(c.dataset.kind)}};
  switch (c.dataset.kind) {
    case DatasetKind::Synth:
      d["n"] = c.dataset.synth.n;
      d["dims"] = c.dataset.synth.dims;
      d["k"] = c.dataset.synth.k;
      d["spread"] = c.dataset.synth.spread;
      d["seed"] = c.dataset.synth.seed;
      d["test_n"] = c.dataset.synth_test;
      break;
    case DatasetKind::Mnist:
      d["dir"] = c.dataset.dir.string();
      break;
    case DatasetKind::Adult:
      d["train"] = c.dataset.train.string();
      d["test"] = c.dataset.test.string();
      d["schema"] = c.dataset.schema.string();
      break;
  }
  j["dataset"] = d;
  json part{{"scheme", data::scheme_name(c.partition.scheme)},
            {"alpha", alpha_to_json(c.partition.alpha)},
            {"strict", c.partition.strict}};
  if (c.partition.attribute) part["attribute"] = *c.partition.attribute;
  j["partition"] = part;
  j["n_clients"] = c.n_clients;
  j["epochs"] = c.epochs;
  j["lr_client"] = c.opt.lr_client;
  j["lr_server"] = c.opt.lr_server;
  j["batch_size"] = c.opt.batch_size;
  if (c.model) j["model"] = {{"arch", nn::arch_name(c.model->arch)}, {"hidden", c.model->hidden}};
  if (c.cut) j["cut"] = *c.cut;
  j["seed"] = c.seed;
  if (c.out_path) j["out_path"] = c.out_path->string();
  return j;
}

nn::ModelSpec default_model(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Mnist: return {nn::Arch::LeNet, {}};
    case DatasetKind::Adult: return {nn::Arch::Mlp, {64}};
    case DatasetKind::Synth: break;
  }
  return {nn::Arch::Mlp, {16, 16}};
}

std::size_t default_cut(const ExperimentConfig& cfg, const nn::LayerStack<float>& model) {
  if (cfg.cut) return *cfg.cut;
  if (cfg.model.value_or(default_model(cfg.dataset.kind)).arch == nn::Arch::LeNet)
    return nn::kLenetCutSmall;
  return nn::boundary_after_first_relu(model);
}

nn::CutSpec default_ushape_cut(const ExperimentConfig& cfg, const nn::LayerStack<float>& model) {
  if (const auto* u = std::get_if<pd::UShapeConfig>(&cfg.paradigm); u && u->cut1)
    return nn::CutSpec::three_way(u->cut1, u->cut2);
  if (cfg.model.value_or(default_model(cfg.dataset.kind)).arch == nn::Arch::LeNet)
    return nn::CutSpec::three_way(nn::kLenetCutSmall, model.size() - 1);
  std::size_t c1 = nn::boundary_after_first_relu(model);
  const std::size_t c2 = model.size() - 1;
  if (c1 >= c2) c1 = 1;
  return nn::CutSpec::three_way(c1, c2);
}

}  // namespace splitbench::runner
