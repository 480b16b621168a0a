#include "splitbench/runner/log.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "splitbench/error.hpp"

namespace splitbench::runner {

using nlohmann::json;

namespace {

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return v.get<double>();
}

}  // namespace

bool operator==(const MetricRecord& a, const MetricRecord& b) {
  return a.epoch == b.epoch && same(a.accuracy, b.accuracy) && a.auc.has_value() == b.auc.has_value() &&
         (!a.auc || same(*a.auc, *b.auc)) && same(a.test_loss, b.test_loss) &&
         same(a.train_loss, b.train_loss) && a.train_batches == b.train_batches &&
         a.participants == b.participants && a.epoch_bytes == b.epoch_bytes &&
         a.epoch_messages == b.epoch_messages && a.cumulative_bytes == b.cumulative_bytes &&
         a.client_states == b.client_states && same(a.wall_ms, b.wall_ms);
}

json to_json(const MetricRecord& r) {
  json parts = json::object();
  for (const auto& [name, t] : r.participants)
    parts[name] = {{"sent_bytes", t.sent_bytes},
                   {"received_bytes", t.received_bytes},
                   {"sent_messages", t.sent_messages},
                   {"received_messages", t.received_messages}};
  json j{{"type", "epoch"},
         {"epoch", r.epoch},
         {"accuracy", number_or_null(r.accuracy)},
         {"auc", r.auc ? number_or_null(*r.auc) : json(nullptr)},
         {"test_loss", number_or_null(r.test_loss)},
         {"train_loss", number_or_null(r.train_loss)},
         {"train_batches", r.train_batches},
         {"participants", parts},
         {"epoch_bytes", r.epoch_bytes},
         {"epoch_messages", r.epoch_messages},
         {"cumulative_bytes", r.cumulative_bytes},
         {"wall_ms", r.wall_ms}};
  if (!r.client_states.empty()) j["client_states"] = r.client_states;
  return j;
}

MetricRecord record_from_json(const json& j) {
  MetricRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.accuracy = number_or_nan(j, "accuracy");
  if (!j.at("auc").is_null()) r.auc = j.at("auc").get<double>();
  r.test_loss = number_or_nan(j, "test_loss");
  r.train_loss = number_or_nan(j, "train_loss");
  r.train_batches = j.at("train_batches").get<std::size_t>();
  for (const auto& [name, t] : j.at("participants").items())
    r.participants[name] = {t.at("sent_bytes").get<std::uint64_t>(),
                            t.at("received_bytes").get<std::uint64_t>(),
                            t.at("sent_messages").get<std::uint64_t>(),
                            t.at("received_messages").get<std::uint64_t>()};
  r.epoch_bytes = j.at("epoch_bytes").get<std::uint64_t>();
  r.epoch_messages = j.at("epoch_messages").get<std::uint64_t>();
  r.cumulative_bytes = j.at("cumulative_bytes").get<std::uint64_t>();
  if (j.contains("client_states")) r.client_states = j.at("client_states").get<std::vector<std::string>>();
  r.wall_ms = j.at("wall_ms").get<double>();
  return r;
}

json to_json(const RunSummary& s) {
  return {{"type", "summary"},
          {"final_accuracy", number_or_null(s.final_accuracy)},
          {"final_auc", s.final_auc ? number_or_null(*s.final_auc) : json(nullptr)},
          {"best_accuracy", number_or_null(s.best_accuracy)},
          {"total_bytes", s.total_bytes},
          {"total_messages", s.total_messages},
          {"bytes_by_tag", s.bytes_by_tag},
          {"messages_by_tag", s.messages_by_tag},
          {"wall_ms", s.wall_ms}};
}

RunSummary summary_from_json(const json& j) {
  RunSummary s;
  s.final_accuracy = number_or_nan(j, "final_accuracy");
  if (!j.at("final_auc").is_null()) s.final_auc = j.at("final_auc").get<double>();
  s.best_accuracy = number_or_nan(j, "best_accuracy");
  s.total_bytes = j.at("total_bytes").get<std::uint64_t>();
  s.total_messages = j.at("total_messages").get<std::uint64_t>();
  s.bytes_by_tag = j.at("bytes_by_tag").get<std::map<std::string, std::uint64_t>>();
  s.messages_by_tag = j.at("messages_by_tag").get<std::map<std::string, std::uint64_t>>();
  s.wall_ms = j.at("wall_ms").get<double>();
  return s;
}

void write_jsonl(const RunLog& log, std::ostream& out) {
  json header{{"type", "header"},
              {"schema", kLogSchema},
              {"version", kLogSchemaVersion},
              {"config", log.config},
              {"trace", log.trace_path ? json(*log.trace_path) : json(nullptr)}};
  out << header.dump() << '\n';
  for (const auto& r : log.records) out << to_json(r).dump() << '\n';
  if (log.summary) out << to_json(*log.summary).dump() << '\n';
}

void write_jsonl(const RunLog& log, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  write_jsonl(log, out);
  if (!out) throw Error("io_error", "write failed: " + path.string());
}

RunLog read_jsonl(std::istream& in) {
  RunLog log;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  auto fail = [&](const std::string& msg) {
    return Error("malformed_log", "line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("invalid JSON: ") + e.what());
    }
    try {
      const auto type = j.at("type").get<std::string>();
      if (!header) {
        if (type != "header") throw fail("expected a header line first");
        if (j.at("schema").get<std::string>() != kLogSchema) throw fail("unknown schema");
        if (j.at("version").get<int>() != kLogSchemaVersion)
          throw fail("unsupported schema version " + j.at("version").dump());
        log.config = j.at("config");
        if (!j.at("trace").is_null()) log.trace_path = j.at("trace").get<std::string>();
        header = true;
      } else if (log.summary) {
        throw fail("content after the summary line");
      } else if (type == "epoch") {
        log.records.push_back(record_from_json(j));
      } else if (type == "summary") {
        log.summary = summary_from_json(j);
      } else {
        throw fail("unexpected line type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw fail(e.what());
    }
  }
  if (!header) throw Error("malformed_log", "missing header line");
  return log;
}

RunLog read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  return read_jsonl(in);
}

}  // namespace splitbench::runner
