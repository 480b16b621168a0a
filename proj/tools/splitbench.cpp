// splitbench command-line interface.
//
//   splitbench run --config exp.json [--trace trace.jsonl]
//   splitbench sweep --config exp.json --alpha 0,0.1,inf --seeds 3 [--out dir]
//   splitbench sweep --config exp.json --clients 3,5,10 --seeds 1
//   splitbench gradcheck [--seeds 10]
//   splitbench partition-stats --config exp.json
//
// Results go to stdout as JSON. Failures print {"error":{"code","message"}}
// on stderr and exit nonzero.

#include <cmath>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>
#include <json.hpp>

#include "splitbench/data/partition.hpp"
#include "splitbench/error.hpp"
#include "splitbench/nn/gradcheck.hpp"
#include "splitbench/runner/run.hpp"

namespace sb = splitbench;
using nlohmann::json;

namespace {

int fail(const std::string& code, const std::string& message, int status = 1) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
  return status;
}

std::vector<double> parse_axis(const std::vector<std::string>& items, const std::string& field) {
  std::vector<double> out;
  for (const auto& s : items) {
    if (s == "inf" || s == "infinity") {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw sb::ConfigError(field, "cannot parse '" + s + "'");
    out.push_back(v);
  }
  return out;
}

int cmd_run(const std::string& config, const std::string& trace, const std::string& out) {
  auto cfg = sb::runner::load_config(config);
  if (!out.empty()) cfg.out_path = out;
  sb::runner::RunOptions opts;
  if (!trace.empty()) opts.trace_path = trace;
  const auto log = sb::runner::run_experiment(cfg, opts);
  json j = sb::runner::to_json(*log.summary);
  j["epochs"] = log.records.size();
  if (cfg.out_path) j["log"] = cfg.out_path->string();
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_sweep(const std::string& config, const std::vector<std::string>& alpha,
              const std::vector<std::string>& clients, std::size_t seeds, const std::string& out) {
  if (alpha.empty() == clients.empty())
    return fail("usage", "give exactly one of --alpha or --clients", 2);
  const auto cfg = sb::runner::load_config(config);
  const auto axis = alpha.empty() ? sb::runner::SweepAxis::Clients : sb::runner::SweepAxis::Alpha;
  const auto values = alpha.empty() ? parse_axis(clients, "clients") : parse_axis(alpha, "alpha");
  std::optional<std::filesystem::path> dir;
  if (!out.empty()) dir = out;
  const auto result = sb::runner::sweep(cfg, axis, values, seeds, dir);
  std::cout << sb::runner::sweep_summary(result).dump() << '\n';
  for (const auto& c : result.cells)
    if (c.error) return 1;
  return 0;
}

int cmd_gradcheck(std::size_t seeds, double eps, double tolerance) {
  std::vector<std::uint64_t> s(seeds);
  std::iota(s.begin(), s.end(), 0);
  double worst = 0;
  for (const auto& r : sb::nn::run_gradient_suite(s, eps)) {
    std::cout << json{{"case", r.name},
                      {"seed", r.seed},
                      {"parameters", r.parameters},
                      {"param_error", r.param_error},
                      {"input_error", r.input_error}}
                     .dump()
              << '\n';
    worst = std::max({worst, r.param_error, r.input_error});
  }
  if (!(worst < tolerance))
    return fail("gradcheck_failed", "max relative error " + std::to_string(worst) + " >= " +
                                        std::to_string(tolerance));
  return 0;
}

int cmd_partition_stats(const std::string& config) {
  const auto cfg = sb::runner::load_config(config);
  const auto data = sb::runner::load_data(cfg.dataset);
  const auto part = sb::data::partition(data.train, cfg.partition);
  const auto stats = sb::data::partition_stats(part.shards, data.train);
  std::cout << json{{"scheme", sb::data::scheme_name(cfg.partition.scheme)},
                    {"alpha", sb::runner::alpha_to_json(cfg.partition.alpha)},
                    {"n_clients", cfg.n_clients},
                    {"sizes", stats.sizes},
                    {"class_histograms", stats.class_histograms},
                    {"global_distribution", stats.global_distribution},
                    {"imbalance", stats.imbalance},
                    {"has_empty_shard", part.has_empty_shard}}
                   .dump()
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  sb::runner::init_logging();
  CLI::App app{"Split learning simulator and benchmark"};
  app.require_subcommand(1);

  std::string config, trace, out;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--trace", trace, "Write the message trace (JSONL)");
  run->add_option("--out", out, "Write the run log (JSONL); overrides out_path");

  std::vector<std::string> alpha, clients;
  std::size_t seeds = 1;
  auto* sw = app.add_subcommand("sweep", "Sweep alpha or client count across seeds");
  sw->add_option("--config", config, "Base experiment config (JSON)")->required();
  sw->add_option("--alpha", alpha, "Alpha values, e.g. 0,0.1,inf")->delimiter(',');
  sw->add_option("--clients", clients, "Client counts, e.g. 3,5,10")->delimiter(',');
  sw->add_option("--seeds", seeds, "Seeds per value (config seed, +1, ...)")->check(CLI::PositiveNumber);
  sw->add_option("--out", out, "Directory for cell logs and summary.json");

  std::size_t gc_seeds = 10;
  double eps = 1e-4, tol = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
  gc->add_option("--seeds", gc_seeds, "Seeds per case")->check(CLI::PositiveNumber);
  gc->add_option("--eps", eps, "Finite-difference step");
  gc->add_option("--tolerance", tol, "Maximum relative error");

  auto* ps = app.add_subcommand("partition-stats", "Describe the shards a config produces");
  ps->add_option("--config", config, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*run) return cmd_run(config, trace, out);
    if (*sw) return cmd_sweep(config, alpha, clients, seeds, out);
    if (*gc) return cmd_gradcheck(gc_seeds, eps, tol);
    if (*ps) return cmd_partition_stats(config);
  } catch (const sb::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
