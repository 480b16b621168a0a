#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "splitbench/data/partition.hpp"
#include "splitbench/data/synth.hpp"
#include "splitbench/nn/models.hpp"
#include "splitbench/nn/optim.hpp"
#include "splitbench/paradigms/paradigm.hpp"

namespace splitbench::runner {

enum class DatasetKind { Synth, Mnist, Adult };

std::string dataset_kind_name(DatasetKind kind);

struct DatasetConfig {
  DatasetKind kind = DatasetKind::Synth;

  // synth: training set from `synth`, test set of `synth_test` samples drawn
  // from the same clusters.
  data::SynthParams synth;
  std::size_t synth_test = 250;

  // mnist: directory holding {train,t10k}-{images-idx3,labels-idx1}-ubyte.
  std::filesystem::path dir;

  // adult: comma-separated train/test files and a column schema.
  std::filesystem::path train, test, schema;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct ExperimentConfig {
  paradigms::ParadigmConfig paradigm = paradigms::PslConfig{};
  DatasetConfig dataset;
  data::PartitionSpec partition;  // n_clients and seed are filled from the fields below
  std::size_t n_clients = 1;
  std::size_t epochs = 1;
  nn::OptimizerConfig opt;
  std::optional<nn::ModelSpec> model;   // dataset default when unset
  std::optional<std::size_t> cut;       // two-way cut; model default when unset
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out_path;

  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Parses and validates a config. Relative paths resolve against `base_dir`.
// Unknown fields, wrong types, and bad enum values raise ConfigError naming
// the field.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::filesystem::path& base_dir = {});
// Reads `path`; relative paths inside resolve against its directory.
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical JSON form; parse_config(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& cfg);
nlohmann::json to_json(const paradigms::ParadigmConfig& cfg);

// Defaults used when the config leaves model/cut unset.
nn::ModelSpec default_model(DatasetKind kind);
std::size_t default_cut(const ExperimentConfig& cfg, const nn::LayerStack<float>& model);
nn::CutSpec default_ushape_cut(const ExperimentConfig& cfg, const nn::LayerStack<float>& model);

// alpha as JSON: a number, or the string "inf".
nlohmann::json alpha_to_json(double alpha);
double alpha_from_json(const nlohmann::json& j, const std::string& field);

}  // namespace splitbench::runner
