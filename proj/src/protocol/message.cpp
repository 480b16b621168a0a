#include "splitbench/protocol/message.hpp"

namespace splitbench::protocol {

std::string ParticipantId::str() const {
  switch (role) {
    case Role::Client: return "client:" + std::to_string(index);
    case Role::Server: return "server";
    case Role::ThirdParty: return "third_party";
  }
  return "unknown";
}

ParticipantId parse_participant(const std::string& s) {
  if (s == "server") return ParticipantId::server();
  if (s == "third_party") return ParticipantId::third_party();
  if (s.rfind("client:", 0) == 0) {
    try {
      return ParticipantId::client(std::stoul(s.substr(7)));
    } catch (const std::exception&) {
    }
  }
  throw Error("bad_participant", "cannot parse participant '" + s + "'");
}

std::string tag_name(Tag tag) {
  switch (tag) {
    case Tag::SmashedBatch: return "SmashedBatch";
    case Tag::CutGrad: return "CutGrad";
    case Tag::WeightBlob: return "WeightBlob";
    case Tag::LossReport: return "LossReport";
    case Tag::Control: return "Control";
  }
  return "unknown";
}

Tag tag_from_name(const std::string& s) {
  for (Tag t : {Tag::SmashedBatch, Tag::CutGrad, Tag::WeightBlob, Tag::LossReport, Tag::Control})
    if (tag_name(t) == s) return t;
  throw Error("bad_tag", "unknown message tag '" + s + "'");
}

Message Message::smashed(ParticipantId from, ParticipantId to, std::uint32_t round,
                         std::uint32_t batch, nn::Tensor z, std::vector<std::int32_t> labels) {
  Message m{Tag::SmashedBatch, from, to, round, batch, {}, 0, 0, std::move(labels)};
  m.tensors.push_back(std::move(z));
  return m;
}

Message Message::cut_grad(ParticipantId from, ParticipantId to, std::uint32_t round,
                          std::uint32_t batch, nn::Tensor g) {
  Message m{Tag::CutGrad, from, to, round, batch, {}, 0, 0, {}};
  m.tensors.push_back(std::move(g));
  return m;
}

Message Message::weights(ParticipantId from, ParticipantId to, std::uint32_t round,
                         std::vector<nn::Tensor> params) {
  return {Tag::WeightBlob, from, to, round, 0, std::move(params), 0, 0, {}};
}

Message Message::loss_report(ParticipantId from, ParticipantId to, std::uint32_t round,
                             double loss) {
  return {Tag::LossReport, from, to, round, 0, {}, loss, 0, {}};
}

Message Message::control(ParticipantId from, ParticipantId to, std::uint32_t round,
                         std::uint32_t opcode) {
  return {Tag::Control, from, to, round, 0, {}, 0, opcode, {}};
}

void Message::validate() const {
  const auto bad = [&](const std::string& why) {
    return Error("malformed_message", tag_name(tag) + " from " + from.str() + ": " + why);
  };
  switch (tag) {
    case Tag::SmashedBatch:
    case Tag::CutGrad:
      if (tensors.size() != 1) throw bad("expects exactly one tensor");
      if (!labels.empty() && labels.size() != tensors[0].dim(0))
        throw bad("label count does not match the batch dimension");
      break;
    case Tag::WeightBlob:
      if (tensors.empty()) throw bad("carries no parameters");
      break;
    case Tag::LossReport:
    case Tag::Control:
      if (!tensors.empty()) throw bad("carries tensors");
      break;
  }
  if (tag != Tag::SmashedBatch && !labels.empty()) throw bad("only SmashedBatch may carry labels");
}

std::size_t tensor_message_size(const nn::Shape& shape) {
  return kHeaderBytes + 4 + 4 * shape.size() + 4 * nn::shape_numel(shape);
}

std::size_t serialized_size(const Message& msg) {
  std::size_t bytes = kHeaderBytes;
  for (const auto& t : msg.tensors) bytes += 4 + 4 * t.rank() + 4 * t.numel();
  if (msg.tag == Tag::LossReport) bytes += 8;
  return bytes;
}

void check_weight_signature(const Message& msg, std::span<const nn::Shape> signature) {
  if (msg.tag != Tag::WeightBlob)
    throw Error("malformed_message", "expected WeightBlob, got " + tag_name(msg.tag));
  bool ok = msg.tensors.size() == signature.size();
  for (std::size_t i = 0; ok && i < signature.size(); ++i) ok = msg.tensors[i].shape() == signature[i];
  if (!ok)
    throw Error("signature_mismatch",
                "WeightBlob from " + msg.from.str() + " does not match the model signature");
}

}  // namespace splitbench::protocol
