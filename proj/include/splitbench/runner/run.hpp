#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitbench/data/dataset.hpp"
#include "splitbench/paradigms/paradigm.hpp"
#include "splitbench/runner/config.hpp"
#include "splitbench/runner/log.hpp"

namespace splitbench::runner {

struct DataBundle {
  data::Dataset train;
  data::Dataset test;
};

DataBundle load_data(const DatasetConfig& cfg);

// Everything run_experiment needs before the first epoch. The paradigm
// points into `data`, so the struct is heap-allocated and not movable.
struct Experiment {
  ExperimentConfig config;
  DataBundle data;
  data::Partition partition;
  std::unique_ptr<paradigms::Paradigm> paradigm;

  Experiment() = default;
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;
};

// Seeds derived from the config seed: "model" for initial weights,
// "partition" for the shard draw; batch order uses the seed directly.
std::unique_ptr<Experiment> prepare(const ExperimentConfig& cfg);
// Same, reusing already loaded data.
std::unique_ptr<Experiment> prepare(const ExperimentConfig& cfg, DataBundle data);

struct RunOptions {
  std::optional<std::filesystem::path> trace_path;
  // Called after each epoch's record is complete.
  std::function<void(const MetricRecord&)> on_epoch;
};

// Trains for cfg.epochs, evaluating on the test set after every epoch.
// Writes the JSONL log to cfg.out_path when set.
RunLog run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});
RunLog run_experiment(Experiment& exp, const RunOptions& options = {});

enum class SweepAxis { Alpha, Clients };

std::string sweep_axis_name(SweepAxis axis);

struct SweepCell {
  double value = 0;  // alpha or client count
  std::uint64_t seed = 0;
  std::optional<RunLog> log;
  std::optional<std::string> error_code;
  std::optional<std::string> error;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::Alpha;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepCell> cells;  // value-major, then seed

  // Mean final accuracy per axis value over the cells that succeeded.
  std::vector<double> mean_accuracy() const;
};

// The cross product of axis values and seeds (cfg.seed, cfg.seed + 1, ...).
// A failing cell is recorded and the sweep continues. With `out_dir`, each
// cell's log and a combined summary.json are written there.
SweepResult sweep(const ExperimentConfig& cfg, SweepAxis axis, std::span<const double> values,
                  std::size_t seeds, const std::optional<std::filesystem::path>& out_dir = {});

nlohmann::json sweep_summary(const SweepResult& result);

// The config with the axis value applied.
ExperimentConfig apply_axis(ExperimentConfig cfg, SweepAxis axis, double value);

// Sets the log level from SPLITBENCH_LOG (trace, debug, info, warn, error,
// off); the default is warn.
void init_logging();

}  // namespace splitbench::runner
