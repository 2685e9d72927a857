#pragma once

// Sweeps over controllers, platoon-size caps and seeds. Every cell is an
// independent simulation writing its own files; cells sharing a seed see the
// same arrivals, so controllers and size caps are compared on paired demand.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pcoord/simulation.hpp"

namespace pcoord {

struct ExperimentPlan {
  ScenarioSpec base;
  std::vector<ControllerKind> controllers;
  std::vector<int> max_sizes;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  unsigned threads = 0;  // 0: one per hardware thread
  bool write_logs = false;

  void validate() const {
    if (controllers.empty() || max_sizes.empty() || seeds.empty())
      throw ConfigError("experiment plan has no cells");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
      throw ConfigError("experiment seeds must be distinct");
    for (int k : max_sizes)
      if (k < 1) throw ConfigError("max platoon sizes must be >= 1");
    base.validate();
  }
};

struct CellKey {
  ControllerKind controller = ControllerKind::OC_Platoon;
  int max_size = 5;
  std::uint64_t seed = 1;

  std::string name() const {
    return std::string(controller_name(controller)) + "_k" + std::to_string(max_size) + "_s" + std::to_string(seed);
  }
};

struct CellResult {
  CellKey key;
  MetricsRecord metrics;
};

inline ScenarioSpec cell_spec(const ScenarioSpec& base, const CellKey& key) {
  ScenarioSpec s = base;
  s.controller = key.controller;
  s.demand.max_platoon_size = key.max_size;
  s.seed = key.seed;
  return s;
}

inline constexpr const char* kVehiclesCsvHeader =
    "platoon,member,route,size,spawn,entry,merge,exit,travel_time,free_flow,delay,fuel";

inline std::string vehicles_csv(const MetricsRecord& m) {
  std::string out = std::string(kVehiclesCsvHeader) + "\n";
  char buf[320];
  for (const VehicleRecord& v : m.vehicles) {
    // Rounding noise on an unimpeded crossing would print as -0.000000.
    const double delay = std::abs(v.delay) < 5e-7 ? 0.0 : v.delay;
    std::snprintf(buf, sizeof buf, "%d,%d,%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", v.platoon, v.member,
                  v.route.c_str(), v.size, v.spawn, v.entry, v.merge, v.exit, v.travel, v.free_flow, delay, v.fuel);
    out += buf;
  }
  return out;
}

namespace detail {

inline nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

}  // namespace detail

inline nlohmann::json summary_json(const CellKey& key, const ScenarioSpec& spec, const MetricsRecord& m) {
  nlohmann::json j;
  j["cell"] = {{"name", key.name()},
               {"controller", controller_name(key.controller)},
               {"max_platoon_size", key.max_size},
               {"seed", key.seed}};
  j["scenario"] = {{"horizon", spec.horizon},
                   {"dt", spec.dt},
                   {"rate_per_hour", spec.demand.rate_per_hour},
                   {"headway", spec.demand.headway},
                   {"schedule_zone_length", spec.geometry.schedule_zone_length},
                   {"merging_zone_side", spec.geometry.merging_zone_side}};
  j["metrics"] = {{"average_travel_time", m.average_travel_time},
                  {"average_delay", m.average_delay},
                  {"total_fuel", m.total_fuel},
                  {"average_fuel", m.average_fuel},
                  {"throughput", m.throughput},
                  {"spawned", m.spawned},
                  {"in_flight", m.in_flight},
                  {"platoons", m.platoons},
                  {"max_lateness", detail::finite_or_null(m.max_lateness)},
                  {"monitor_violations", m.monitor_violations},
                  {"lane_order_violations", m.lane_order_violations},
                  {"stops", m.stops}};
  return j;
}

/// Mean of the per-run averages over the seeds of one (controller, size) pair.
struct CellAggregate {
  ControllerKind controller = ControllerKind::OC_Platoon;
  int max_size = 0;
  int runs = 0;
  double travel_time = 0.0;
  double delay = 0.0;
  double total_fuel = 0.0;
  double fuel_per_vehicle = 0.0;
  double throughput = 0.0;
};

inline std::vector<CellAggregate> aggregate(const std::vector<CellResult>& results) {
  std::map<std::pair<int, int>, CellAggregate> acc;
  for (const CellResult& r : results) {
    CellAggregate& a = acc[{static_cast<int>(r.key.controller), r.key.max_size}];
    a.controller = r.key.controller;
    a.max_size = r.key.max_size;
    ++a.runs;
    a.travel_time += r.metrics.average_travel_time;
    a.delay += r.metrics.average_delay;
    a.total_fuel += r.metrics.total_fuel;
    a.fuel_per_vehicle += r.metrics.average_fuel;
    a.throughput += r.metrics.throughput;
  }
  std::vector<CellAggregate> out;
  for (auto& [k, a] : acc) {
    a.travel_time /= a.runs;
    a.delay /= a.runs;
    a.total_fuel /= a.runs;
    a.fuel_per_vehicle /= a.runs;
    a.throughput /= a.runs;
    out.push_back(a);
  }
  return out;
}

/// Relative change in percent; negative values are improvements.
inline double percent_change(double x, double baseline) {
  if (baseline == 0.0) throw DomainError("percent change against a zero baseline");
  return (x - baseline) / baseline * 100.0;
}

namespace detail {

inline constexpr const char* kAggregateHeader =
    "controller,max_platoon_size,runs,avg_travel_time,avg_delay,total_fuel,fuel_per_vehicle,throughput";

inline std::string aggregate_row(const CellAggregate& a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%d,%d,%.6f,%.6f,%.6f,%.6f,%.3f\n", controller_name(a.controller), a.max_size,
                a.runs, a.travel_time, a.delay, a.total_fuel, a.fuel_per_vehicle, a.throughput);
  return buf;
}

inline const CellAggregate* find_aggregate(const std::vector<CellAggregate>& all, ControllerKind c, int k) {
  for (const auto& a : all)
    if (a.controller == c && a.max_size == k) return &a;
  return nullptr;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << text;
  if (!f) throw ConfigError("failed writing " + p.string());
}

}  // namespace detail

/// Writes the comparison tables built from all finished cells.
inline void write_tables(const std::filesystem::path& dir, const std::vector<CellResult>& results) {
  const auto agg = aggregate(results);
  std::string by_controller = std::string(detail::kAggregateHeader) + "\n";
  std::string by_size = by_controller;
  auto sorted = agg;
  for (const auto& a : sorted) by_controller += detail::aggregate_row(a);
  std::stable_sort(sorted.begin(), sorted.end(), [](const CellAggregate& x, const CellAggregate& y) {
    return x.max_size < y.max_size;
  });
  for (const auto& a : sorted) by_size += detail::aggregate_row(a);
  detail::write_file(dir / "summary_by_controller.csv", by_controller);
  detail::write_file(dir / "summary_by_size.csv", by_size);

  std::string vs_ind = "controller,max_platoon_size,travel_time_change_pct,fuel_change_pct\n";
  std::string vs_size1 = vs_ind;
  char buf[192];
  for (const auto& a : agg) {
    if (const auto* base = detail::find_aggregate(agg, ControllerKind::FCFS_Ind, a.max_size);
        base && base->travel_time > 0.0 && base->total_fuel > 0.0) {
      std::snprintf(buf, sizeof buf, "%s,%d,%.4f,%.4f\n", controller_name(a.controller), a.max_size,
                    percent_change(a.travel_time, base->travel_time), percent_change(a.total_fuel, base->total_fuel));
      vs_ind += buf;
    }
    if (const auto* base = detail::find_aggregate(agg, a.controller, 1);
        base && base->travel_time > 0.0 && base->total_fuel > 0.0) {
      std::snprintf(buf, sizeof buf, "%s,%d,%.4f,%.4f\n", controller_name(a.controller), a.max_size,
                    percent_change(a.travel_time, base->travel_time), percent_change(a.total_fuel, base->total_fuel));
      vs_size1 += buf;
    }
  }
  detail::write_file(dir / "change_vs_fcfs_ind.csv", vs_ind);
  detail::write_file(dir / "change_vs_size1.csv", vs_size1);
}

/// Runs every cell of the plan, writes per-cell and summary files, and returns
/// the results in cell order (controller, size, seed). A fault in any cell is
/// rethrown with the cell name after all workers stop.
inline std::vector<CellResult> run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  std::vector<CellKey> cells;
  for (ControllerKind c : plan.controllers)
    for (int k : plan.max_sizes)
      for (std::uint64_t s : plan.seeds) cells.push_back({c, k, s});

  const bool to_disk = !plan.output_dir.empty();
  if (to_disk) std::filesystem::create_directories(plan.output_dir / "cells");

  std::vector<CellResult> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        const ScenarioSpec spec = cell_spec(plan.base, cells[i]);
        EngineOptions opts;
        opts.log = plan.write_logs;
        RunResult r = run(spec, opts);
        results[i] = {cells[i], std::move(r.metrics)};
        if (to_disk) {
          const auto dir = plan.output_dir / "cells" / cells[i].name();
          std::filesystem::create_directories(dir);
          detail::write_file(dir / "vehicles.csv", vehicles_csv(results[i].metrics));
          detail::write_file(dir / "summary.json", summary_json(cells[i], spec, results[i].metrics).dump(2) + "\n");
          if (plan.write_logs) detail::write_file(dir / "events.log", r.log);
        }
      } catch (const std::exception& e) {
        try {
          throw SimulationFault("cell " + cells[i].name() + ": " + e.what());
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    }
  };
  unsigned n = plan.threads ? plan.threads : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, cells.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (to_disk) write_tables(plan.output_dir, results);
  return results;
}

// --- replay ---

/// The leader trajectory of one platoon, rebuilt from an event log: the last
/// logged plan up to merging-zone entry, then the crossing at the route limit.
inline Trajectory replay_trajectory(std::string_view log, int platoon_id, double* dt_out = nullptr) {
  std::istringstream in{std::string(log)};
  std::string line;
  double dt = 0.1;
  double last_time = 0.0;
  double vmax = 0.0, distance = 0.0;
  bool entered = false, merged = false;
  Trajectory plan;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    double t = 0.0;
    std::string kind;
    int id = -1;
    if (!(ls >> t >> kind >> id)) continue;
    last_time = std::max(last_time, t);
    if (kind == "RUN") {
      std::string controller;
      unsigned long long seed = 0;
      ls >> controller >> seed >> dt;
      continue;
    }
    if (id != platoon_id) continue;
    if (kind == "ENTER") {
      std::string route;
      int size = 0;
      double spawn = 0.0, v0 = 0.0;
      ls >> route >> size >> spawn >> v0 >> vmax >> distance;
      entered = true;
    } else if (kind == "PLAN") {
      std::string kname;
      std::size_t nseg = 0;
      ls >> kname >> nseg;
      Trajectory tr;
      for (std::size_t k = 0; k < nseg; ++k) {
        Segment s;
        ls >> s.t_begin >> s.t_end >> s.jerk >> s.accel >> s.v0 >> s.p0;
        s.law = s.jerk == 0.0 ? SegmentLaw::ConstantAccel : SegmentLaw::CubicPosition;
        tr.segments.push_back(s);
      }
      if (!ls || tr.segments.empty()) throw ConfigError("malformed PLAN record: " + line);
      tr.t_start = tr.segments.front().t_begin;
      tr.t_end = tr.segments.back().t_end;
      for (TrajectoryKind k : {TrajectoryKind::TimeOptimal, TrajectoryKind::EnergyOptimal, TrajectoryKind::StopWait})
        if (kname == kind_name(k)) tr.kind = k;
      plan = std::move(tr);
    } else if (kind == "MERGE") {
      merged = true;
    }
  }
  if (!entered || plan.segments.empty()) throw LookupError("platoon " + std::to_string(platoon_id) + " not in log");
  if (dt_out) *dt_out = dt;
  if (merged && vmax > 0.0) {
    Segment cross;
    cross.t_begin = plan.t_end;
    cross.t_end = plan.t_end + distance / vmax;
    cross.v0 = vmax;
    cross.p0 = evaluate(plan, plan.t_end).p;
    plan.segments.push_back(cross);
    plan.t_end = cross.t_end;
  } else {
    // Still upstream of the merging zone when the run ended.
    plan.t_end = std::clamp(last_time, plan.t_start, plan.t_end);
  }
  return plan;
}

/// CSV of (t, p, v, u) at the logging step, from schedule-zone entry to
/// merging-zone exit.
inline std::string emit_trajectory_plotdata(std::string_view log, int platoon_id) {
  double dt = 0.1;
  const Trajectory tr = replay_trajectory(log, platoon_id, &dt);
  return to_csv(sample(tr, dt));
}

}  // namespace pcoord
