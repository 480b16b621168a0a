#include "splitbench/runner/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "splitbench/data/csv.hpp"
#include "splitbench/data/idx.hpp"
#include "splitbench/data/synth.hpp"
#include "splitbench/error.hpp"
#include "splitbench/rng.hpp"

namespace splitbench::runner {

using nlohmann::json;
namespace fs = std::filesystem;
namespace pd = splitbench::paradigms;
using protocol::ParticipantId;

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

std::string format_value(SweepAxis axis, double v) {
  if (axis == SweepAxis::Clients) return std::to_string(static_cast<std::size_t>(v));
  if (std::isinf(v)) return "inf";
  json j = v;
  return j.dump();
}

}  // namespace

DataBundle load_data(const DatasetConfig& cfg) {
  DataBundle b;
  switch (cfg.kind) {
    case DatasetKind::Synth: {
      b.train = data::synth_blobs(cfg.synth, 0);
      data::SynthParams tp = cfg.synth;
      tp.n = cfg.synth_test;
      b.test = data::synth_blobs(tp, 1);
      b.test.name = "synth-test";
      break;
    }
    case DatasetKind::Mnist:
      b.train = data::load_mnist_idx(cfg.dir / "train-images-idx3-ubyte",
                                     cfg.dir / "train-labels-idx1-ubyte");
      b.test = data::load_mnist_idx(cfg.dir / "t10k-images-idx3-ubyte",
                                    cfg.dir / "t10k-labels-idx1-ubyte");
      break;
    case DatasetKind::Adult: {
      const auto schema = data::load_csv_schema(cfg.schema);
      b.train = data::load_csv_adult(cfg.train, schema);
      b.test = data::load_csv_adult(cfg.test, schema);
      break;
    }
  }
  if (b.train.sample_shape() != b.test.sample_shape() || b.train.class_count != b.test.class_count)
    throw ShapeError("train and test sets disagree on sample shape or class count");
  return b;
}

std::unique_ptr<Experiment> prepare(const ExperimentConfig& cfg) {
  return prepare(cfg, load_data(cfg.dataset));
}

std::unique_ptr<Experiment> prepare(const ExperimentConfig& cfg, DataBundle data) {
  cfg.validate();
  auto exp = std::make_unique<Experiment>();
  exp->config = cfg;
  exp->data = std::move(data);
  exp->partition = data::partition(exp->data.train, cfg.partition);
  if (exp->partition.has_empty_shard)
    spdlog::warn("partition left at least one of {} clients without samples", cfg.n_clients);

  const auto spec = cfg.model.value_or(default_model(cfg.dataset.kind));
  pd::Setup setup;
  setup.train = &exp->data.train;
  setup.shards = exp->partition.shards;
  setup.model = nn::build_model<float>(spec, exp->data.train.sample_shape(),
                                       exp->data.train.class_count, derive_seed(cfg.seed, "model"));
  setup.cut = nn::CutSpec::two_way(default_cut(cfg, setup.model));
  setup.ushape_cut = default_ushape_cut(cfg, setup.model);
  setup.opt = cfg.opt;
  setup.seed = cfg.seed;
  exp->paradigm = pd::make_paradigm(cfg.paradigm, std::move(setup));
  return exp;
}

RunLog run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  auto exp = prepare(cfg);
  return run_experiment(*exp, options);
}

RunLog run_experiment(Experiment& exp, const RunOptions& options) {
  const auto& cfg = exp.config;
  auto& paradigm = *exp.paradigm;
  const auto start = std::chrono::steady_clock::now();

  RunLog log;
  log.config = to_json(cfg);
  if (options.trace_path) log.trace_path = options.trace_path->string();

  std::vector<ParticipantId> ids{ParticipantId::server()};
  for (std::size_t i = 0; i < paradigm.clients().size(); ++i) ids.push_back(ParticipantId::client(i));
  std::map<std::string, protocol::LedgerReport> before;
  for (auto id : ids) before[id.str()] = {};
  protocol::TrafficCounter total_before;

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const auto epoch_start = std::chrono::steady_clock::now();
    pd::EpochStats stats = paradigm.train_epoch(e);
    pd::Evaluation ev = paradigm.evaluate(exp.data.test);

    MetricRecord r;
    r.epoch = e;
    r.accuracy = ev.accuracy;
    r.auc = ev.auc;
    r.test_loss = ev.mean_loss;
    r.train_loss = stats.mean_loss;
    r.train_batches = stats.batches;
    const auto& ledger = paradigm.router().ledger();
    for (auto id : ids) {
      const auto now = protocol::ledger_report(ledger, id);
      const auto& prev = before[id.str()];
      r.participants[id.str()] = {now.sent_bytes - prev.sent_bytes,
                                  now.received_bytes - prev.received_bytes,
                                  now.sent_messages - prev.sent_messages,
                                  now.received_messages - prev.received_messages};
      before[id.str()] = now;
    }
    const auto total = ledger.total();
    r.epoch_bytes = total.bytes - total_before.bytes;
    r.epoch_messages = total.messages - total_before.messages;
    r.cumulative_bytes = total.bytes;
    total_before = total;
    if (std::holds_alternative<pd::AsyncConfig>(cfg.paradigm))
      for (const auto& c : stats.clients) r.client_states.push_back(pd::async_state_name(c.state));
    r.wall_ms = elapsed_ms(epoch_start);

    spdlog::info("{} epoch {}: loss {:.4f} acc {:.4f} bytes {}", paradigm.name(), e, r.train_loss,
                 r.accuracy, r.epoch_bytes);
    log.records.push_back(r);
    if (options.on_epoch) options.on_epoch(log.records.back());
  }

  RunSummary s;
  const auto& last = log.records.back();
  s.final_accuracy = last.accuracy;
  s.final_auc = last.auc;
  for (const auto& r : log.records) s.best_accuracy = std::max(s.best_accuracy, r.accuracy);
  const auto& ledger = paradigm.router().ledger();
  s.total_bytes = ledger.total().bytes;
  s.total_messages = ledger.total().messages;
  for (const auto& [key, c] : ledger.entries()) {
    const auto tag = protocol::tag_name(std::get<2>(key));
    s.bytes_by_tag[tag] += c.bytes;
    s.messages_by_tag[tag] += c.messages;
  }
  s.wall_ms = elapsed_ms(start);
  log.summary = s;

  if (options.trace_path) paradigm.router().write_trace_jsonl(*options.trace_path);
  if (cfg.out_path) write_jsonl(log, *cfg.out_path);
  return log;
}

std::string sweep_axis_name(SweepAxis axis) { return axis == SweepAxis::Alpha ? "alpha" : "n_clients"; }

ExperimentConfig apply_axis(ExperimentConfig cfg, SweepAxis axis, double value) {
  if (axis == SweepAxis::Alpha) {
    cfg.partition.alpha = value;
    if (cfg.partition.scheme != data::Scheme::DirichletAttribute)
      cfg.partition.scheme = data::scheme_for_alpha(value);
  } else {
    if (!(value >= 1) || value != std::floor(value))
      throw ConfigError("n_clients", "sweep value " + format_value(axis, value) + " is not a positive integer");
    cfg.n_clients = static_cast<std::size_t>(value);
    cfg.partition.n_clients = cfg.n_clients;
  }
  return cfg;
}

std::vector<double> SweepResult::mean_accuracy() const {
  std::vector<double> out;
  for (double v : values) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& c : cells)
      if (c.value == v && c.log && c.log->summary) {
        sum += c.log->summary->final_accuracy;
        ++n;
      }
    out.push_back(n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

SweepResult sweep(const ExperimentConfig& cfg, SweepAxis axis, std::span<const double> values,
                  std::size_t seeds, const std::optional<fs::path>& out_dir) {
  if (values.empty()) throw ConfigError("sweep", "no axis values");
  if (seeds < 1) throw ConfigError("seeds", "must be >= 1");
  SweepResult result;
  result.axis = axis;
  result.values.assign(values.begin(), values.end());
  for (std::size_t s = 0; s < seeds; ++s) result.seeds.push_back(cfg.seed + s);

  std::optional<DataBundle> data;
  for (double v : values) {
    for (auto seed : result.seeds) {
      SweepCell cell;
      cell.value = v;
      cell.seed = seed;
      try {
        ExperimentConfig c = apply_axis(cfg, axis, v);
        c.seed = seed;
        c.partition.seed = derive_seed(seed, "partition");
        c.out_path.reset();
        if (out_dir)
          c.out_path = *out_dir / ("cell-" + sweep_axis_name(axis) + "-" + format_value(axis, v) +
                                   "-seed" + std::to_string(seed) + ".jsonl");
        c.validate();
        if (!data) data = load_data(c.dataset);
        auto exp = prepare(c, *data);
        cell.log = run_experiment(*exp);
      } catch (const Error& e) {
        spdlog::error("sweep cell {}={} seed {} failed: {}", sweep_axis_name(axis),
                      format_value(axis, v), seed, e.what());
        cell.error_code = e.code();
        cell.error = e.what();
      } catch (const std::exception& e) {
        spdlog::error("sweep cell {}={} seed {} failed: {}", sweep_axis_name(axis),
                      format_value(axis, v), seed, e.what());
        cell.error_code = "internal";
        cell.error = e.what();
      }
      result.cells.push_back(std::move(cell));
    }
  }

  if (out_dir) {
    fs::create_directories(*out_dir);
    std::ofstream out(*out_dir / "summary.json");
    out << sweep_summary(result).dump(2) << '\n';
    if (!out) throw Error("io_error", "cannot write sweep summary in " + out_dir->string());
  }
  return result;
}

json sweep_summary(const SweepResult& r) {
  auto axis_value = [&](double v) {
    return r.axis == SweepAxis::Alpha ? alpha_to_json(v) : json(static_cast<std::size_t>(v));
  };
  json values = json::array();
  for (double v : r.values) values.push_back(axis_value(v));
  json cells = json::array();
  for (const auto& c : r.cells) {
    json j{{"value", axis_value(c.value)}, {"seed", c.seed}};
    if (c.log && c.log->summary) {
      j["final_accuracy"] = c.log->summary->final_accuracy;
      if (c.log->summary->final_auc) j["final_auc"] = *c.log->summary->final_auc;
      j["total_bytes"] = c.log->summary->total_bytes;
      j["epochs"] = c.log->records.size();
    } else {
      j["error"] = {{"code", c.error_code.value_or("")}, {"message", c.error.value_or("")}};
    }
    cells.push_back(j);
  }
  json means = json::array();
  for (double m : r.mean_accuracy()) means.push_back(std::isfinite(m) ? json(m) : json(nullptr));
  return {{"axis", sweep_axis_name(r.axis)},
          {"values", values},
          {"seeds", r.seeds},
          {"cells", cells},
          {"mean_accuracy", means}};
}

void init_logging() {
  const char* env = std::getenv("SPLITBENCH_LOG");
  const std::string level = env ? env : "warn";
  if (!spdlog::get("splitbench")) spdlog::set_default_logger(spdlog::stderr_color_mt("splitbench"));
  spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace splitbench::runner
