#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace splitbench {

// Base error for everything the library throws. `code` is a stable,
// machine-readable identifier surfaced by the CLI in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message,
                      std::optional<std::size_t> layer = std::nullopt)
      : Error("shape_mismatch",
              layer ? "layer " + std::to_string(*layer) + ": " + message
                    : message),
        layer_(layer) {}

  std::optional<std::size_t> layer_index() const noexcept { return layer_; }

 private:
  std::optional<std::size_t> layer_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error("invalid_config", field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace splitbench
