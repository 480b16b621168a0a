// Thin bindings over the runner. JSON crosses the boundary as text; the
// Python package decodes it.

#include <pybind11/gil_safe_call_once.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include <json.hpp>

#include "splitbench/data/partition.hpp"
#include "splitbench/error.hpp"
#include "splitbench/nn/gradcheck.hpp"
#include "splitbench/protocol/message.hpp"
#include "splitbench/runner/run.hpp"

namespace py = pybind11;
namespace sb = splitbench;
using nlohmann::json;

namespace {

json log_to_json(const sb::runner::RunLog& log) {
  json records = json::array();
  for (const auto& r : log.records) records.push_back(sb::runner::to_json(r));
  json j{{"config", log.config}, {"records", records}, {"summary", nullptr}, {"trace_path", nullptr}};
  if (log.summary) j["summary"] = sb::runner::to_json(*log.summary);
  if (log.trace_path) j["trace_path"] = *log.trace_path;
  return j;
}

sb::runner::ExperimentConfig config_from(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw sb::ConfigError("config", e.what());
  }
  return sb::runner::parse_config(j, base_dir);
}

std::string parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  return sb::runner::to_json(config_from(text, base_dir)).dump();
}

std::string run_experiment(const std::string& text, const std::filesystem::path& base_dir,
                           std::optional<std::filesystem::path> trace_path) {
  const auto cfg = config_from(text, base_dir);
  sb::runner::RunOptions options;
  options.trace_path = std::move(trace_path);
  sb::runner::RunLog log;
  {
    py::gil_scoped_release release;
    log = sb::runner::run_experiment(cfg, options);
  }
  return log_to_json(log).dump();
}

std::string read_jsonl(const std::filesystem::path& path) { return log_to_json(sb::runner::read_jsonl(path)).dump(); }

std::string gradcheck(std::size_t seeds, double eps) {
  std::vector<std::uint64_t> s(seeds);
  for (std::size_t i = 0; i < seeds; ++i) s[i] = i;
  json out = json::array();
  for (const auto& r : sb::nn::run_gradient_suite(s, eps))
    out.push_back({{"case", r.name},
                   {"seed", r.seed},
                   {"parameters", r.parameters},
                   {"param_error", r.param_error},
                   {"input_error", r.input_error}});
  return out.dump();
}

std::string partition_stats(const std::string& text, const std::filesystem::path& base_dir) {
  const auto cfg = config_from(text, base_dir);
  const auto data = sb::runner::load_data(cfg.dataset);
  const auto part = sb::data::partition(data.train, cfg.partition);
  const auto stats = sb::data::partition_stats(part.shards, data.train);
  return json{{"scheme", sb::data::scheme_name(cfg.partition.scheme)},
              {"alpha", sb::runner::alpha_to_json(cfg.partition.alpha)},
              {"n_clients", cfg.n_clients},
              {"sizes", stats.sizes},
              {"class_histograms", stats.class_histograms},
              {"global_distribution", stats.global_distribution},
              {"imbalance", stats.imbalance},
              {"has_empty_shard", part.has_empty_shard}}
      .dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  sb::runner::init_logging();

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result([&]() { return py::object(py::exception<sb::Error>(m, "Error")); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const sb::Error& e) {
      py::object type = error_type.get_stored();
      py::object exc = type(e.what());
      exc.attr("code") = e.code();
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  m.attr("LOG_SCHEMA") = sb::runner::kLogSchema;
  m.attr("LOG_SCHEMA_VERSION") = sb::runner::kLogSchemaVersion;

  m.def("parse_config", &parse_config, py::arg("config"), py::arg("base_dir") = std::filesystem::path{});
  m.def("run_experiment", &run_experiment, py::arg("config"), py::arg("base_dir") = std::filesystem::path{},
        py::arg("trace_path") = std::nullopt);
  m.def("read_jsonl", &read_jsonl, py::arg("path"));
  m.def("gradcheck", &gradcheck, py::arg("seeds") = 10, py::arg("eps") = 1e-4);
  m.def("partition_stats", &partition_stats, py::arg("config"), py::arg("base_dir") = std::filesystem::path{});
  m.def("tensor_message_size", [](const std::vector<std::size_t>& shape) {
    return sb::protocol::tensor_message_size(shape);
  }, py::arg("shape"));
}
