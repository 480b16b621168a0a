#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "splitbench/protocol/message.hpp"

namespace splitbench::protocol {

struct TrafficCounter {
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;

  TrafficCounter& operator+=(const TrafficCounter& o) {
    messages += o.messages;
    bytes += o.bytes;
    return *this;
  }
  friend bool operator==(const TrafficCounter&, const TrafficCounter&) = default;
};

// Message count and payload bytes per (sender, receiver, tag).
class TrafficLedger {
 public:
  using Key = std::tuple<ParticipantId, ParticipantId, Tag>;

  void record(ParticipantId from, ParticipantId to, Tag tag, std::uint64_t bytes);

  const std::map<Key, TrafficCounter>& entries() const noexcept { return entries_; }
  TrafficCounter total() const;
  TrafficCounter between(ParticipantId from, ParticipantId to) const;
  TrafficCounter between(ParticipantId from, ParticipantId to, Tag tag) const;
  std::set<ParticipantId> participants() const;

 private:
  std::map<Key, TrafficCounter> entries_;
};

struct LedgerReport {
  std::uint64_t sent_bytes = 0;
  std::uint64_t received_bytes = 0;
  std::uint64_t sent_messages = 0;
  std::uint64_t received_messages = 0;
  std::map<Tag, TrafficCounter> sent_by_tag;
  std::map<Tag, TrafficCounter> received_by_tag;
};

LedgerReport ledger_report(const TrafficLedger& ledger, ParticipantId participant);

struct TraceEntry {
  std::uint64_t seq = 0;
  std::uint32_t round = 0;
  std::uint32_t batch = 0;
  ParticipantId from;
  ParticipantId to;
  Tag tag = Tag::Control;
  std::uint64_t bytes = 0;
  std::vector<nn::Shape> shapes;
  bool carries_labels = false;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct Receipt {
  std::uint64_t seq = 0;
  std::uint64_t bytes = 0;
};

// Lossless, latency-free transport. Delivery is immediate into the
// receiver's FIFO inbox in issuing order, and every send is charged to the
// ledger at its serialized size.
class Router {
 public:
  void register_participant(ParticipantId id);
  bool is_registered(ParticipantId id) const { return inboxes_.count(id) != 0; }

  Receipt send(Message msg);

  std::optional<Message> receive(ParticipantId id);
  // Next message for `id`, which must exist and carry `tag`.
  Message expect(ParticipantId id, Tag tag);
  std::size_t pending(ParticipantId id) const;

  const TrafficLedger& ledger() const noexcept { return ledger_; }
  const std::vector<TraceEntry>& trace() const noexcept { return trace_; }

  // One JSON object per send: seq, round, batch, from, to, tag, bytes.
  void write_trace_jsonl(const std::filesystem::path& path) const;

 private:
  std::map<ParticipantId, std::deque<Message>> inboxes_;
  TrafficLedger ledger_;
  std::vector<TraceEntry> trace_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace splitbench::protocol
