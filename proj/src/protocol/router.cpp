#include "splitbench/protocol/router.hpp"

#include <fstream>

#include <json.hpp>

namespace splitbench::protocol {

void TrafficLedger::record(ParticipantId from, ParticipantId to, Tag tag, std::uint64_t bytes) {
  auto& c = entries_[{from, to, tag}];
  c.messages += 1;
  c.bytes += bytes;
}

TrafficCounter TrafficLedger::total() const {
  TrafficCounter t;
  for (const auto& [key, c] : entries_) t += c;
  return t;
}

TrafficCounter TrafficLedger::between(ParticipantId from, ParticipantId to) const {
  TrafficCounter t;
  for (const auto& [key, c] : entries_)
    if (std::get<0>(key) == from && std::get<1>(key) == to) t += c;
  return t;
}

TrafficCounter TrafficLedger::between(ParticipantId from, ParticipantId to, Tag tag) const {
  const auto it = entries_.find({from, to, tag});
  return it == entries_.end() ? TrafficCounter{} : it->second;
}

std::set<ParticipantId> TrafficLedger::participants() const {
  std::set<ParticipantId> out;
  for (const auto& [key, c] : entries_) {
    out.insert(std::get<0>(key));
    out.insert(std::get<1>(key));
  }
  return out;
}

LedgerReport ledger_report(const TrafficLedger& ledger, ParticipantId participant) {
  LedgerReport r;
  for (const auto& [key, c] : ledger.entries()) {
    const auto& [from, to, tag] = key;
    if (from == participant) {
      r.sent_bytes += c.bytes;
      r.sent_messages += c.messages;
      r.sent_by_tag[tag] += c;
    }
    if (to == participant) {
      r.received_bytes += c.bytes;
      r.received_messages += c.messages;
      r.received_by_tag[tag] += c;
    }
  }
  return r;
}

void Router::register_participant(ParticipantId id) { inboxes_.try_emplace(id); }

Receipt Router::send(Message msg) {
  if (!is_registered(msg.from))
    throw Error("unregistered_participant", "sender " + msg.from.str() + " is not registered");
  if (!is_registered(msg.to))
    throw Error("unregistered_participant", "receiver " + msg.to.str() + " is not registered");
  msg.validate();
  const std::uint64_t bytes = serialized_size(msg);
  ledger_.record(msg.from, msg.to, msg.tag, bytes);
  TraceEntry e{next_seq_, msg.round, msg.batch, msg.from, msg.to, msg.tag, bytes, {},
               !msg.labels.empty()};
  for (const auto& t : msg.tensors) e.shapes.push_back(t.shape());
  trace_.push_back(std::move(e));
  inboxes_[msg.to].push_back(std::move(msg));
  return {next_seq_++, bytes};
}

std::optional<Message> Router::receive(ParticipantId id) {
  auto it = inboxes_.find(id);
  if (it == inboxes_.end())
    throw Error("unregistered_participant", id.str() + " is not registered");
  if (it->second.empty()) return std::nullopt;
  Message m = std::move(it->second.front());
  it->second.pop_front();
  return m;
}

Message Router::expect(ParticipantId id, Tag tag) {
  auto m = receive(id);
  if (!m) throw Error("protocol_violation", id.str() + " expected " + tag_name(tag) + ", inbox empty");
  if (m->tag != tag)
    throw Error("protocol_violation", id.str() + " expected " + tag_name(tag) + ", got " +
                                          tag_name(m->tag) + " from " + m->from.str());
  return std::move(*m);
}

std::size_t Router::pending(ParticipantId id) const {
  const auto it = inboxes_.find(id);
  return it == inboxes_.end() ? 0 : it->second.size();
}

void Router::write_trace_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write trace to " + path.string());
  for (const auto& e : trace_) {
    nlohmann::json j{{"seq", e.seq},         {"round", e.round},       {"batch", e.batch},
                     {"from", e.from.str()}, {"to", e.to.str()},       {"tag", tag_name(e.tag)},
                     {"bytes", e.bytes},     {"labels", e.carries_labels}};
    out << j.dump() << '\n';
  }
}

}  // namespace splitbench::protocol
