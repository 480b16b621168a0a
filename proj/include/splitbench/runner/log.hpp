#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace splitbench::runner {

inline constexpr const char* kLogSchema = "splitbench.runlog";
inline constexpr int kLogSchemaVersion = 1;

struct ParticipantTraffic {
  std::uint64_t sent_bytes = 0;
  std::uint64_t received_bytes = 0;
  std::uint64_t sent_messages = 0;
  std::uint64_t received_messages = 0;

  friend bool operator==(const ParticipantTraffic&, const ParticipantTraffic&) = default;
};

// One row per epoch. Traffic fields are the epoch's own traffic; `cumulative_bytes`
// is the ledger total after the epoch. Loss fields are NaN when undefined
// (e.g. an epoch in which no client exchanged anything) and are written as null.
struct MetricRecord {
  std::size_t epoch = 0;
  double accuracy = 0;
  std::optional<double> auc;  // binary tasks only
  double test_loss = 0;
  double train_loss = 0;
  std::size_t train_batches = 0;
  std::map<std::string, ParticipantTraffic> participants;  // keyed "client:0", "server", ...
  std::uint64_t epoch_bytes = 0;
  std::uint64_t epoch_messages = 0;
  std::uint64_t cumulative_bytes = 0;
  std::vector<std::string> client_states;  // AsyncSL only
  double wall_ms = 0;

  friend bool operator==(const MetricRecord& a, const MetricRecord& b);
};

struct RunSummary {
  double final_accuracy = 0;
  std::optional<double> final_auc;
  double best_accuracy = 0;
  std::uint64_t total_bytes = 0;
  std::uint64_t total_messages = 0;
  std::map<std::string, std::uint64_t> bytes_by_tag;
  std::map<std::string, std::uint64_t> messages_by_tag;
  double wall_ms = 0;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

struct RunLog {
  nlohmann::json config;  // echo of the experiment config
  std::vector<MetricRecord> records;
  std::optional<RunSummary> summary;
  std::optional<std::string> trace_path;

  friend bool operator==(const RunLog&, const RunLog&) = default;
};

nlohmann::json to_json(const MetricRecord& r);
MetricRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunSummary& s);
RunSummary summary_from_json(const nlohmann::json& j);

// Line 1 is a header {"type":"header","schema":...,"version":...,"config":...};
// then one {"type":"epoch",...} line per record and, if present, one
// {"type":"summary",...} line.
void write_jsonl(const RunLog& log, const std::filesystem::path& path);
void write_jsonl(const RunLog& log, std::ostream& out);
// Errors name the offending line number.
RunLog read_jsonl(const std::filesystem::path& path);
RunLog read_jsonl(std::istream& in);

}  // namespace splitbench::runner
