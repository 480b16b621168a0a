#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "splitbench/nn/tensor.hpp"

namespace splitbench::protocol {

enum class Role : std::uint8_t { Client, Server, ThirdParty };

struct ParticipantId {
  Role role = Role::Server;
  std::uint32_t index = 0;  // meaningful for clients only

  static ParticipantId client(std::size_t i) { return {Role::Client, static_cast<std::uint32_t>(i)}; }
  static ParticipantId server() { return {Role::Server, 0}; }
  static ParticipantId third_party() { return {Role::ThirdParty, 0}; }

  bool is_client() const noexcept { return role == Role::Client; }
  std::string str() const;  // "client:3", "server", "third_party"

  friend auto operator<=>(const ParticipantId&, const ParticipantId&) = default;
};

ParticipantId parse_participant(const std::string& s);

enum class Tag : std::uint8_t { SmashedBatch, CutGrad, WeightBlob, LossReport, Control };

std::string tag_name(Tag tag);
Tag tag_from_name(const std::string& s);

// A protocol payload. SmashedBatch and CutGrad carry exactly one tensor,
// WeightBlob carries a parameter list, LossReport a scalar, Control an
// opcode. `labels` is metadata a SmashedBatch carries when the receiving
// side computes the loss.
struct Message {
  Tag tag = Tag::Control;
  ParticipantId from;
  ParticipantId to;
  std::uint32_t round = 0;
  std::uint32_t batch = 0;
  std::vector<nn::Tensor> tensors;
  double scalar = 0;
  std::uint32_t opcode = 0;
  std::vector<std::int32_t> labels;

  static Message smashed(ParticipantId from, ParticipantId to, std::uint32_t round,
                         std::uint32_t batch, nn::Tensor z,
                         std::vector<std::int32_t> labels = {});
  static Message cut_grad(ParticipantId from, ParticipantId to, std::uint32_t round,
                          std::uint32_t batch, nn::Tensor g);
  static Message weights(ParticipantId from, ParticipantId to, std::uint32_t round,
                         std::vector<nn::Tensor> params);
  static Message loss_report(ParticipantId from, ParticipantId to, std::uint32_t round,
                             double loss);
  static Message control(ParticipantId from, ParticipantId to, std::uint32_t round,
                         std::uint32_t opcode);

  // Throws ProtocolError-coded Error when the payload does not fit the tag.
  void validate() const;
};

inline constexpr std::size_t kHeaderBytes = 16;

// 16-byte header, plus per tensor (4 + 4 * rank) shape bytes and
// 4 * element_count data bytes; LossReport adds 8 bytes. Label metadata is
// not part of the encoding.
std::size_t serialized_size(const Message& msg);

// Size of a single-tensor message (SmashedBatch / CutGrad) of this shape.
std::size_t tensor_message_size(const nn::Shape& shape);

// WeightBlob shapes against an expected parameter signature.
void check_weight_signature(const Message& msg, std::span<const nn::Shape> signature);

}  // namespace splitbench::protocol
