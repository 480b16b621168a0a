#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "splitbench/error.hpp"
#include "splitbench/protocol/router.hpp"
#include "splitbench/runner/config.hpp"
#include "splitbench/runner/log.hpp"
#include "splitbench/runner/run.hpp"

using namespace splitbench;
using namespace splitbench::runner;
using nlohmann::json;
namespace fs = std::filesystem;
namespace pd = splitbench::paradigms;

namespace {

const fs::path kFixtures = SPLITBENCH_FIXTURE_DIR;

std::string config_field(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::string error_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("splitbench-runner-" + name);
}

ExperimentConfig small_synth(const std::string& paradigm, std::size_t clients = 3) {
  return parse_config_text(R"({"paradigm": ")" + paradigm + R"(",
    "dataset": {"name": "synth", "n": 300, "dims": 6, "k": 3, "spread": 0.7, "seed": 2, "test_n": 90},
    "n_clients": )" + std::to_string(clients) + R"(, "epochs": 3, "batch_size": 32, "seed": 5})");
}

void strip_wall(RunLog& log) {
  for (auto& r : log.records) r.wall_ms = 0;
  if (log.summary) log.summary->wall_ms = 0;
}

}  // namespace

TEST_CASE("minimal config takes the defaults") {
  const auto c = parse_config_text(R"({"paradigm": "psl", "dataset": "synth", "n_clients": 3})");
  CHECK(std::holds_alternative<pd::PslConfig>(c.paradigm));
  CHECK(c.n_clients == 3);
  CHECK(c.epochs == 1);
  CHECK(c.opt.lr_client == 0.01);
  CHECK(c.opt.lr_server == 0.01);
  CHECK(c.opt.batch_size == 64);
  CHECK(c.partition.scheme == data::Scheme::IID);
  CHECK(c.partition.n_clients == 3);
  CHECK(c.dataset.kind == DatasetKind::Synth);
  CHECK(!c.model);
  CHECK(default_model(DatasetKind::Mnist).arch == nn::Arch::LeNet);
  CHECK(default_model(DatasetKind::Synth) == nn::ModelSpec{nn::Arch::Mlp, {16, 16}});
}

TEST_CASE("paradigm options") {
  auto c = parse_config_text(R"({"paradigm": {"name": "splitfed", "version": 2, "aggregate_every": "never"},
                                 "dataset": "synth"})");
  CHECK(std::get<pd::SplitFedConfig>(c.paradigm) == pd::SplitFedConfig{2, pd::kNeverAggregate});
  c = parse_config_text(R"({"paradigm": {"name": "async", "loss_threshold": 0.2, "pin_state": "B"},
                            "dataset": "synth"})");
  CHECK(std::get<pd::AsyncConfig>(c.paradigm) == pd::AsyncConfig{0.2, pd::AsyncState::B});
  c = parse_config_text(R"({"paradigm": {"name": "vanilla", "relay": "p2p"}, "dataset": "synth"})");
  CHECK(std::get<pd::VanillaConfig>(c.paradigm).relay == pd::Relay::P2P);
  c = parse_config_text(R"({"paradigm": {"name": "ushape", "cuts": [2, 4]}, "dataset": "synth"})");
  CHECK(std::get<pd::UShapeConfig>(c.paradigm) == pd::UShapeConfig{2, 4});
  c = parse_config_text(R"({"paradigm": {"name": "sglr", "subset_fraction": 0.5, "server_lr_scale": 2},
                            "dataset": "synth"})");
  CHECK(std::get<pd::SglrConfig>(c.paradigm) == pd::SglrConfig{0.5, 2.0});
  c = parse_config_text(R"({"paradigm": {"name": "fedavg", "local_epochs": 3}, "dataset": "synth"})");
  CHECK(std::get<pd::FedAvgConfig>(c.paradigm).local_epochs == 3);
}

TEST_CASE("config errors name the field") {
  CHECK(config_field(R"({"paradigm": "psl", "dataset": "synth", "partition": {"alpha": -1}})") ==
        "partition.alpha");
  CHECK(config_field(R"({"paradigm": "psl", "dataset": "synth", "learning_rate": 0.1})") == "learning_rate");
  CHECK(config_field(R"({"paradigm": {"name": "psl", "relay": "p2p"}, "dataset": "synth"})") ==
        "paradigm.relay");
  CHECK(config_field(R"({"paradigm": "gossip", "dataset": "synth"})") == "paradigm.name");
  CHECK(config_field(R"({"paradigm": "psl", "dataset": "synth", "epochs": 0})") == "epochs");
  CHECK(config_field(R"({"paradigm": "psl", "dataset": "synth", "batch_size": 0})") == "batch_size");
  CHECK(config_field(R"({"paradigm": "psl", "dataset": "synth", "n_clients": "3"})") == "n_clients");
  CHECK(config_field(R"({"paradigm": {"name": "async", "pin_state": "D"}, "dataset": "synth"})") ==
        "paradigm.pin_state");
  CHECK(config_field(R"({"paradigm": "psl", "dataset": {"name": "mnist", "dir": "/nonexistent"}})") ==
        "dataset.dir");
  CHECK(config_field(R"({"paradigm": "psl", "dataset": "synth", "cut": "medium"})") == "cut");
  CHECK(config_field(R"({"paradigm": "psl", "dataset": "synth", "model": {"arch": "resnet"}})") ==
        "model.arch");
  CHECK(config_field(R"({"paradigm": "psl"})") == "dataset");
  CHECK(config_field(R"({"paradigm": "psl", "dataset": "synth",)") == "config");
}

TEST_CASE("config round trip and relative paths") {
  const auto c = load_config(kFixtures / "adult-tiny.json");
  CHECK(c.dataset.kind == DatasetKind::Adult);
  CHECK(fs::equivalent(c.dataset.train, kFixtures / "adult-tiny.train.csv"));
  CHECK(fs::equivalent(c.dataset.schema, fs::path(SPLITBENCH_SOURCE_DIR) / "data" / "adult.schema.json"));
  CHECK(parse_config(to_json(c)) == c);

  const auto s = parse_config_text(R"({"paradigm": {"name": "sglr", "subset_fraction": 0.5},
    "dataset": {"name": "synth", "n": 50}, "partition": {"alpha": "inf"}, "n_clients": 2,
    "model": {"arch": "mlp", "hidden": [8]}, "cut": 2, "seed": 9})");
  CHECK(parse_config(to_json(s)) == s);
  CHECK(to_json(s)["partition"]["alpha"] == "inf");
  CHECK(alpha_from_json(alpha_to_json(0.25), "a") == 0.25);
}

TEST_CASE("jsonl log round trip") {
  RunLog log;
  log.config = {{"paradigm", "psl"}};
  MetricRecord r;
  r.epoch = 0;
  r.accuracy = 0.5;
  r.auc = 0.625;
  r.test_loss = 1.5;
  r.train_loss = std::numeric_limits<double>::quiet_NaN();
  r.participants["client:0"] = {10, 20, 1, 2};
  r.epoch_bytes = 30;
  r.cumulative_bytes = 30;
  r.client_states = {"A", "C"};
  r.wall_ms = 1.25;
  log.records = {r, r};
  log.records[1].epoch = 1;
  log.summary = RunSummary{0.5, 0.625, 0.5, 30, 3, {{"CutGrad", 30}}, {{"CutGrad", 3}}, 2.5};
  log.trace_path = "trace.jsonl";

  std::stringstream ss;
  write_jsonl(log, ss);
  const auto text = ss.str();
  CHECK(text.find("null") != std::string::npos);
  std::istringstream in(text);
  CHECK(read_jsonl(in) == log);

  RunLog header_only;
  header_only.config = json::object();
  std::stringstream hs;
  write_jsonl(header_only, hs);
  std::istringstream hin(hs.str());
  const auto back = read_jsonl(hin);
  CHECK(back.records.empty());
  CHECK(!back.summary);
}

TEST_CASE("hand-written log fixture") {
  const auto log = read_jsonl(kFixtures / "runlog-two-epochs.jsonl");
  REQUIRE(log.records.size() == 2);
  CHECK(log.config["n_clients"] == 1);
  CHECK(!log.trace_path);
  CHECK(std::isnan(log.records[0].train_loss));
  CHECK(!log.records[0].auc);
  CHECK(log.records[0].participants.at("server") == ParticipantTraffic{60, 100, 1, 2});
  CHECK(*log.records[1].auc == 0.8);
  CHECK(log.records[1].client_states == std::vector<std::string>{"C"});
  REQUIRE(log.summary);
  CHECK(log.summary->total_bytes == 160);
  CHECK(log.summary->bytes_by_tag.at("SmashedBatch") == 100);
}

TEST_CASE("malformed logs name the line") {
  const std::string header =
      R"({"type":"header","schema":"splitbench.runlog","version":1,"config":{},"trace":null})";
  auto read = [](const std::string& text) {
    std::istringstream in(text);
    return read_jsonl(in);
  };
  CHECK(error_message([&] { read(header + "\n{\"type\":\"epoch\"}\n"); }).find("line 2") != std::string::npos);
  CHECK(error_message([&] { read(header + "\nnot json\n"); }).find("line 2") != std::string::npos);
  CHECK(error_message([&] { read("{\"type\":\"epoch\"}\n"); }).find("line 1") != std::string::npos);
  CHECK(error_message([&] { read(""); }).find("header") != std::string::npos);
  const std::string bad_version =
      R"({"type":"header","schema":"splitbench.runlog","version":7,"config":{},"trace":null})";
  CHECK(error_message([&] { read(bad_version); }).find("version") != std::string::npos);
}

TEST_CASE("run_experiment") {
  auto cfg = small_synth("psl");
  const auto out = temp_path("psl.jsonl");
  fs::remove(out);
  cfg.out_path = out;
  std::size_t callbacks = 0;
  RunOptions opts;
  opts.on_epoch = [&](const MetricRecord&) { ++callbacks; };
  opts.trace_path = temp_path("psl-trace.jsonl");
  auto log = run_experiment(cfg, opts);

  CHECK(callbacks == 3);
  REQUIRE(log.records.size() == 3);
  REQUIRE(log.summary);
  std::uint64_t prev = 0;
  for (const auto& r : log.records) {
    CHECK(r.cumulative_bytes >= prev);
    CHECK(r.cumulative_bytes - prev == r.epoch_bytes);
    prev = r.cumulative_bytes;
    std::uint64_t sent = 0, received = 0;
    for (const auto& [who, t] : r.participants) {
      sent += t.sent_bytes;
      received += t.received_bytes;
    }
    CHECK(sent == r.epoch_bytes);
    CHECK(received == r.epoch_bytes);
    CHECK(r.client_states.empty());
  }
  CHECK(log.summary->total_bytes == prev);
  CHECK(log.summary->bytes_by_tag.at("SmashedBatch") + log.summary->bytes_by_tag.at("CutGrad") == prev);
  CHECK(log.summary->best_accuracy >= log.summary->final_accuracy);

  auto from_disk = read_jsonl(out);
  CHECK(from_disk == log);
  CHECK(from_disk.config == to_json(cfg));
  std::ifstream trace(*opts.trace_path);
  std::size_t lines = 0;
  for (std::string l; std::getline(trace, l);) ++lines;
  CHECK(lines == log.summary->total_messages);

  SUBCASE("deterministic apart from wall time") {
    auto again = run_experiment(cfg);
    strip_wall(log);
    strip_wall(again);
    CHECK(again.records == log.records);
    CHECK(again.summary == log.summary);
  }
}

TEST_CASE("per-epoch participant traffic adds up to the ledger report") {
  auto exp = prepare(small_synth("splitfed"));
  const auto log = run_experiment(*exp);
  const auto& ledger = exp->paradigm->router().ledger();
  for (const auto& id : ledger.participants()) {
    const auto rep = protocol::ledger_report(ledger, id);
    std::uint64_t sent = 0, received = 0;
    for (const auto& r : log.records) {
      sent += r.participants.at(id.str()).sent_bytes;
      received += r.participants.at(id.str()).received_bytes;
    }
    CHECK(sent == rep.sent_bytes);
    CHECK(received == rep.received_bytes);
  }
}

TEST_CASE("async logs client states and local-only logs no traffic") {
  const auto a = run_experiment(small_synth("async"));
  for (const auto& r : a.records) CHECK(r.client_states.size() == 3);
  const auto l = run_experiment(small_synth("local"));
  CHECK(l.summary->total_bytes == 0);
  for (const auto& r : l.records) CHECK(r.epoch_bytes == 0);
}

TEST_CASE("binary task reports auc") {
  const auto log = run_experiment(load_config(kFixtures / "adult-tiny.json"));
  for (const auto& r : log.records) {
    REQUIRE(r.auc);
    CHECK(*r.auc >= 0.0);
    CHECK(*r.auc <= 1.0);
  }
  CHECK(log.summary->final_auc);
}

TEST_CASE("sweep") {
  const auto dir = temp_path("sweep");
  fs::remove_all(dir);
  SUBCASE("singleton sweep equals a single run") {
    const auto cfg = small_synth("psl");
    const std::vector<double> alpha{INFINITY};
    const auto result = sweep(cfg, SweepAxis::Alpha, alpha, 1, dir);
    REQUIRE(result.cells.size() == 1);
    REQUIRE(result.cells[0].log);
    auto a = *result.cells[0].log;
    auto b = run_experiment(cfg);
    strip_wall(a);
    strip_wall(b);
    CHECK(a.records == b.records);
    CHECK(a.summary == b.summary);
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "cell-alpha-inf-seed5.jsonl"));
  }
  SUBCASE("failing cells are recorded and the rest still run") {
    const auto cfg = small_synth("psl");
    const std::vector<double> clients{2, 0, 3};
    const auto result = sweep(cfg, SweepAxis::Clients, clients, 2);
    REQUIRE(result.cells.size() == 6);
    CHECK(result.cells[2].error_code == "invalid_config");
    CHECK(result.cells[3].error_code == "invalid_config");
    CHECK(result.cells[0].log);
    CHECK(result.cells[5].log);
    CHECK(result.cells[1].seed == 6);
    const auto means = result.mean_accuracy();
    CHECK(std::isnan(means[1]));
    CHECK(!std::isnan(means[2]));
    const auto summary = sweep_summary(result);
    CHECK(summary["axis"] == "n_clients");
    CHECK(summary["mean_accuracy"][1].is_null());
  }
  SUBCASE("local-only accuracy does not grow as shards shrink") {
    // Ten overlapping classes in 32 dims, so small shards underfit.
    const auto cfg = parse_config_text(R"({"paradigm": "local",
      "dataset": {"name": "synth", "n": 1500, "dims": 32, "k": 10, "spread": 2.0, "seed": 4, "test_n": 500},
      "epochs": 5, "lr_client": 0.05, "batch_size": 32, "seed": 0})");
    const std::vector<double> clients{3, 5, 10};
    const auto means = sweep(cfg, SweepAxis::Clients, clients, 3).mean_accuracy();
    MESSAGE("local-only mean accuracy at 3/5/10 clients: " << means[0] << " " << means[1] << " " << means[2]);
    CHECK(means[0] >= means[1]);
    CHECK(means[1] >= means[2]);
  }
}
