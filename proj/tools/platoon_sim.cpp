// Command-line front end: run one scenario, sweep an experiment plan, replay a
// platoon trajectory from an event log, or lint a scenario file.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "pcoord/experiment.hpp"
#include "pcoord/scenario_io.hpp"

namespace fs = std::filesystem;
using namespace pcoord;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + p.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

ScenarioDocument load(const std::string& path) {
  if (path.empty()) return {default_scenario(), default_sweep()};
  return parse_document(read_text(path));
}

ControllerKind controller_arg(const std::string& name) {
  const auto c = controller_from_name(name);
  if (!c) throw ConfigError("unknown controller '" + name + "'");
  return *c;
}

void print_summary(const CellKey& key, const MetricsRecord& m) {
  std::printf("%-13s k=%d seed=%llu  travel=%.3f s  delay=%.3f s  fuel=%.2f  throughput=%d  in_flight=%d\n",
              controller_name(key.controller), key.max_size, static_cast<unsigned long long>(key.seed),
              m.average_travel_time, m.average_delay, m.total_fuel, m.throughput, m.in_flight);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Platoon coordination at a signal-free intersection"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "Print the default scenario file and exit");

  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::string controller;
  std::optional<double> horizon;
  std::string out_dir;

  auto* run_cmd = app.add_subcommand("run", "Simulate one scenario");
  run_cmd->add_option("-s,--scenario", scenario_path, "Scenario file (defaults when omitted)");
  run_cmd->add_option("--seed", seed, "Override the scenario seed");
  run_cmd->add_option("-c,--controller", controller, "OC_Platoon, FCFS_Platoon, FCFS_Ind, OC_Ind or LQF_MWM");
  run_cmd->add_option("--horizon", horizon, "Simulated seconds");
  run_cmd->add_option("-o,--out", out_dir, "Directory for vehicles.csv, summary.json and events.log");
  bool write_log = false;
  run_cmd->add_flag("--log", write_log, "Also write the event log");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run every controller x size x seed cell of the plan");
  sweep_cmd->add_option("-s,--scenario", scenario_path, "Scenario file with an [experiment] section");
  sweep_cmd->add_option("-o,--out", out_dir, "Output directory (overrides experiment.output_dir)");
  unsigned threads = 0;
  sweep_cmd->add_option("-j,--threads", threads, "Worker threads (0: all cores)");
  bool sweep_logs = false;
  sweep_cmd->add_flag("--logs", sweep_logs, "Write an event log per cell");
  sweep_cmd->add_option("--horizon", horizon, "Simulated seconds");

  auto* replay_cmd = app.add_subcommand("replay", "Trajectory plot data of one platoon from an event log");
  std::string log_path;
  int platoon = -1;
  std::string replay_out;
  replay_cmd->add_option("log", log_path, "Event log written by run --log")->required();
  replay_cmd->add_option("-p,--platoon", platoon, "Platoon id")->required();
  replay_cmd->add_option("-o,--out", replay_out, "CSV file (stdout when omitted)");

  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file");
  validate_cmd->add_option("scenario", scenario_path, "Scenario file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_defaults) {
      std::cout << "# Default scenario. Every key is optional.\n\n" << serialize(ScenarioDocument{default_scenario(), default_sweep()});
      return 0;
    }
    if (*validate_cmd) {
      const ScenarioDocument doc = load(scenario_path);
      std::printf("%s: ok (%s, horizon %g s, seed %llu)\n", scenario_path.c_str(),
                  controller_name(doc.spec.controller), doc.spec.horizon,
                  static_cast<unsigned long long>(doc.spec.seed));
      return 0;
    }
    if (*run_cmd) {
      ScenarioSpec spec = load(scenario_path).spec;
      if (seed) spec.seed = *seed;
      if (!controller.empty()) spec.controller = controller_arg(controller);
      if (horizon) spec.horizon = *horizon;
      EngineOptions opts;
      opts.log = write_log;
      const RunResult r = run(spec, opts);
      const CellKey key{spec.controller, spec.demand.max_platoon_size, spec.seed};
      print_summary(key, r.metrics);
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "vehicles.csv", std::ios::binary) << vehicles_csv(r.metrics);
        std::ofstream(fs::path(out_dir) / "summary.json", std::ios::binary)
            << summary_json(key, spec, r.metrics).dump(2) << '\n';
        if (write_log) std::ofstream(fs::path(out_dir) / "events.log", std::ios::binary) << r.log;
      }
      return 0;
    }
    if (*sweep_cmd) {
      const ScenarioDocument doc = load(scenario_path);
      ExperimentPlan plan;
      plan.base = doc.spec;
      if (horizon) plan.base.horizon = *horizon;
      plan.controllers = doc.sweep.controllers;
      plan.max_sizes = doc.sweep.max_sizes;
      plan.seeds = doc.sweep.seeds;
      plan.output_dir = out_dir.empty() ? doc.sweep.output_dir : out_dir;
      plan.threads = threads;
      plan.write_logs = sweep_logs;
      const auto results = run_experiment(plan);
      for (const CellAggregate& a : aggregate(results))
        std::printf("%-13s k=%d runs=%d  travel=%.3f s  fuel=%.2f\n", controller_name(a.controller), a.max_size,
                    a.runs, a.travel_time, a.total_fuel);
      std::printf("results in %s\n", plan.output_dir.string().c_str());
      return 0;
    }
    if (*replay_cmd) {
      const std::string csv = emit_trajectory_plotdata(read_text(log_path), platoon);
      if (replay_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream(replay_out, std::ios::binary) << csv;
      }
      return 0;
    }
    std::cout << app.help();
    return 0;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error at line %d (%s): %s\n", e.line(), e.key().c_str(), e.what());
    return 1;
  } catch (const SimulationFault& e) {
    std::fprintf(stderr, "simulation fault: %s\n", e.what());
    return 2;
  } catch (const LookupError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
