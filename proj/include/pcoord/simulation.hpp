#pragma once

// Event-driven intersection simulation. Platoons spawn upstream, enter the
// schedule zone as soon as their lane has room, follow closed-form leader
// trajectories to their merging-zone entry time and cross at the route speed
// limit. Followers replay the leader trajectory shifted by the headway.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcoord/baselines.hpp"
#include "pcoord/fuel.hpp"
#include "pcoord/rng.hpp"
#include "pcoord/scheduler.hpp"
#include "pcoord/trajectory.hpp"

namespace pcoord {

enum class ControllerKind { OC_Platoon, FCFS_Platoon, FCFS_Ind, OC_Ind, LQF_MWM };

inline constexpr std::array<ControllerKind, 5> kControllers{ControllerKind::OC_Platoon, ControllerKind::FCFS_Platoon,
                                                            ControllerKind::FCFS_Ind, ControllerKind::OC_Ind,
                                                            ControllerKind::LQF_MWM};

inline const char* controller_name(ControllerKind c) {
  switch (c) {
    case ControllerKind::OC_Platoon: return "OC_Platoon";
    case ControllerKind::FCFS_Platoon: return "FCFS_Platoon";
    case ControllerKind::FCFS_Ind: return "FCFS_Ind";
    case ControllerKind::OC_Ind: return "OC_Ind";
    case ControllerKind::LQF_MWM: return "LQF_MWM";
  }
  return "?";
}

inline std::optional<ControllerKind> controller_from_name(std::string_view s) {
  for (ControllerKind c : kControllers)
    if (s == controller_name(c)) return c;
  return std::nullopt;
}

inline bool individual_vehicles(ControllerKind c) {
  return c == ControllerKind::FCFS_Ind || c == ControllerKind::OC_Ind;
}

struct DemandSpec {
  std::array<double, 4> rate_per_hour{};           // platoons per hour, indexed by approach
  std::vector<double> size_weights{0.2, 0.2, 0.2, 0.2, 0.2};  // platoon sizes 1..n
  int max_platoon_size = 5;                        // larger drawn platoons are split
  std::array<double, 3> movement_mix{0.6, 0.2, 0.2};  // straight, left, right
  double headway = 1.2;
  double entry_speed_min = 0.5;  // fraction of the route limit
  double entry_speed_max = 1.0;

  friend bool operator==(const DemandSpec&, const DemandSpec&) = default;
};

struct ScenarioSpec {
  IntersectionGeometry geometry;
  ControlBounds bounds;
  MovementConflictTable conflicts = MovementConflictTable::standard_four_leg();
  DemandSpec demand;
  double horizon = 900.0;
  std::uint64_t seed = 1;
  ControllerKind controller = ControllerKind::OC_Platoon;
  double lqf_interval = 5.0;
  bool fcfs_serial = false;
  SchedulerConfig::Chaining oc_chaining = SchedulerConfig::Chaining::Group;
  double crawl_floor = kDefaultCrawlFloor;
  double dt = 0.1;
  FuelModel fuel;

  void validate() const {
    geometry.validate();
    bounds.validate();
    if (!(horizon >= 0.0)) throw ConfigError("horizon must be >= 0");
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (!(lqf_interval > 0.0)) throw ConfigError("lqf_interval must be > 0");
    if (crawl_floor < 0.0) throw ConfigError("crawl_floor must be >= 0");
    if (!(demand.headway > 0.0)) throw ConfigError("headway must be > 0");
    for (double r : demand.rate_per_hour)
      if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("arrival rates must be >= 0");
    auto check_weights = [](const auto& w, const char* what) {
      double sum = 0.0;
      for (double x : w) {
        if (!(x >= 0.0)) throw ConfigError(std::string(what) + " must be >= 0");
        sum += x;
      }
      if (!(std::abs(sum - 1.0) <= 1e-6)) throw ConfigError(std::string(what) + " must sum to 1");
    };
    if (demand.size_weights.empty()) throw ConfigError("size_weights must list at least one size");
    check_weights(demand.size_weights, "size_weights");
    check_weights(demand.movement_mix, "movement_mix");
    if (demand.max_platoon_size < 1) throw ConfigError("max_platoon_size must be >= 1");
    if (!(0.0 <= demand.entry_speed_min && demand.entry_speed_min <= demand.entry_speed_max &&
          demand.entry_speed_max <= 1.0))
      throw ConfigError("entry speed fractions must satisfy 0 <= min <= max <= 1");
    for (Decision d : kDecisions)
      if (demand.movement_mix[static_cast<int>(d)] > 0.0 && geometry.lanes_for(d).empty())
        throw ConfigError(std::string("movement_mix assigns traffic to a movement without a lane: ") +
                          decision_code(d));
    for (int a = 0; a < MovementConflictTable::kMovements; ++a)
      for (int b = 0; b < MovementConflictTable::kMovements; ++b) conflicts.lookup(a, b);  // throws on a gap
    const double slowest_stop = geometry.straight_vmax * geometry.straight_vmax * (1.0 / (2.0 * bounds.u_max) +
                                                                                   1.0 / (-2.0 * bounds.u_min));
    if (slowest_stop > geometry.schedule_zone_length)
      throw AssumptionViolation("schedule zone too short to stop and reaccelerate to the speed limit");
  }
};

/// A platoon appearing upstream of the schedule zone.
struct Arrival {
  double time = 0.0;
  Approach approach = Approach::North;
  int lane = 1;
  Decision decision = Decision::Straight;
  int size = 1;
  double speed = 0.0;
  int source = 0;  // index of the drawn platoon this one was split from
};

/// Splits platoons larger than `max_size` into consecutive chunks; later
/// chunks appear t_h per preceding vehicle after the first.
inline std::vector<Arrival> split_arrivals(const std::vector<Arrival>& arrivals, int max_size, double headway) {
  std::vector<Arrival> out;
  for (const Arrival& a : arrivals) {
    for (int done = 0; done < a.size; done += max_size) {
      Arrival c = a;
      c.size = std::min(max_size, a.size - done);
      c.time = a.time + done * headway;
      out.push_back(c);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Arrival& x, const Arrival& y) { return x.time < y.time; });
  return out;
}

namespace detail {

template <class Weights>
int draw_categorical(std::mt19937_64& g, const Weights& w) {
  double total = 0.0;
  for (double x : w) total += x;
  double r = uniform01(g) * total;
  int last = 0;
  for (int i = 0; i < static_cast<int>(w.size()); ++i) {
    if (w[i] <= 0.0) continue;
    last = i;
    if (r < w[i]) return i;
    r -= w[i];
  }
  return last;
}

}  // namespace detail

/// Poisson platoon arrivals per approach over [0, horizon), one named random
/// stream per approach. Sizes, movements, lanes and entry speeds are drawn
/// per platoon, then platoons above the size cap are split.
inline std::vector<Arrival> spawn_arrivals(const ScenarioSpec& spec) {
  std::vector<Arrival> all;
  int source = 0;
  for (Approach a : kApproaches) {
    const double rate = spec.demand.rate_per_hour[static_cast<int>(a)] / 3600.0;
    if (rate <= 0.0) continue;
    auto g = named_stream(spec.seed, std::string("arrivals/") + approach_code(a));
    double t = 0.0;
    while (true) {
      t += exponential(g, rate);
      if (t >= spec.horizon) break;
      Arrival arr;
      arr.time = t;
      arr.approach = a;
      arr.size = detail::draw_categorical(g, spec.demand.size_weights) + 1;
      arr.decision = static_cast<Decision>(detail::draw_categorical(g, spec.demand.movement_mix));
      const auto lanes = spec.geometry.lanes_for(arr.decision);
      const double lane_draw = uniform01(g);
      arr.lane = lanes.at(std::min(lanes.size() - 1, static_cast<std::size_t>(lane_draw * lanes.size())));
      Route r = Route::in_lane(a, arr.lane, arr.decision, spec.geometry.lanes_per_approach);
      arr.speed = route_vmax(r, spec.geometry) * uniform(g, spec.demand.entry_speed_min, spec.demand.entry_speed_max);
      arr.source = source++;
      all.push_back(arr);
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Arrival& x, const Arrival& y) { return x.time < y.time; });
  return split_arrivals(all, spec.demand.max_platoon_size, spec.demand.headway);
}

struct VehicleRecord {
  int platoon = 0;
  int member = 0;  // 0 = leader
  std::string route;
  int size = 1;
  double spawn = 0.0;
  double entry = 0.0;  // schedule-zone entry
  double merge = 0.0;  // merging-zone entry
  double exit = 0.0;
  double travel = 0.0;
  double free_flow = 0.0;
  double delay = 0.0;
  double fuel = 0.0;
};

struct MetricsRecord {
  std::vector<VehicleRecord> vehicles;  // exited vehicles
  double average_travel_time = 0.0;
  double average_delay = 0.0;
  double total_fuel = 0.0;  // every spawned vehicle up to min(exit, horizon)
  double average_fuel = 0.0;  // per exited vehicle
  int throughput = 0;
  int spawned = 0;
  int in_flight = 0;
  int platoons = 0;
  double max_lateness = -std::numeric_limits<double>::infinity();  // stays -inf until a platoon exits
  int monitor_violations = 0;
  int lane_order_violations = 0;
  int stops = 0;  // platoons whose plan comes to a standstill
};

/// Line-oriented event log; disabled logs cost nothing.
class EventLog {
 public:
  explicit EventLog(bool enabled = false) : enabled_(enabled) {}
  bool enabled() const { return enabled_; }
  const std::string& text() const { return text_; }

  template <class... Args>
  void line(double t, const char* kind, int id, const char* fmt, Args... args) {
    if (!enabled_) return;
    char head[64];
    std::snprintf(head, sizeof head, "%.6f %s %d", t, kind, id);
    text_ += head;
    if (fmt && *fmt) {
      char body[512];
      if constexpr (sizeof...(Args) == 0) {
        std::snprintf(body, sizeof body, "%s", fmt);
      } else {
        std::snprintf(body, sizeof body, fmt, args...);
      }
      text_ += ' ';
      text_ += body;
    }
    text_ += '\n';
  }

  void raw(const std::string& s) {
    if (enabled_) text_ += s;
  }

 private:
  bool enabled_;
  std::string text_;
};

/// Merging-zone occupancy of one platoon: the leader enters at `enter`, the
/// tail leaves at `leave`, and conflicting traffic may follow at `leave + t_c`.
struct Occupancy {
  int id = 0;
  Route route;
  double enter = 0.0;
  double leave = 0.0;
};

/// Checks a new occupancy against earlier ones. Returns a description of the
/// first violation or an empty string.
inline std::string check_occupancy(const Occupancy& next, std::span<const Occupancy> earlier,
                                   const IntersectionGeometry& geom, const MovementConflictTable& table,
                                   double tol = 1e-6) {
  for (const Occupancy& o : earlier) {
    if (!conflicts(o.route, next.route, table)) continue;
    const bool apart = next.enter >= o.leave + geom.clearance_time - tol || o.enter >= next.leave + geom.clearance_time - tol;
    if (!apart) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "platoon %d (%s, %.6f-%.6f) overlaps platoon %d (%s, %.6f-%.6f)", next.id,
                    next.route.name().c_str(), next.enter, next.leave, o.id, o.route.name().c_str(), o.enter, o.leave);
      return buf;
    }
  }
  return {};
}

struct EngineOptions {
  bool log = false;
  bool reschedule_each_step = false;  // recompute the schedule at every step too
  bool lane_order_check = true;
  bool throw_on_violation = true;
};

class Simulation {
 public:
  enum class Phase { Upstream, InSchedule, InMerging, Exited };

  struct State {
    int id = 0;
    Arrival arrival;
    Route route;
    int size = 1;
    double t0 = 0.0;
    double v0 = 0.0;
    double vmax = 0.0;
    double crossing = 0.0;   // t_c*
    double distance = 0.0;   // d*
    double deadline = 0.0;   // absolute
    Phase phase = Phase::Upstream;
    Trajectory plan;
    std::optional<double> tm;  // unset while waiting for right of way (LQF)
    double te = 0.0;           // zone free again
    double tail_exit = 0.0;
    bool admitted = false;
    bool stopped = false;
    bool locked = false;  // refreshed at arrival and merge events only
  };

  Simulation(ScenarioSpec spec, EngineOptions options = {}) : spec_(std::move(spec)), opts_(options), log_(options.log) {
    spec_.validate();
    cfg_.geometry = spec_.geometry;
    cfg_.bounds = spec_.bounds;
    cfg_.conflicts = spec_.conflicts;
    cfg_.crawl_floor = spec_.crawl_floor;
    cfg_.chaining = spec_.oc_chaining;
    lane_groups_ = standard_lane_groups(spec_.geometry);
    log_.line(0.0, "RUN", 0, "%s %llu %.17g %.17g", controller_name(spec_.controller),
              static_cast<unsigned long long>(spec_.seed), spec_.dt, spec_.horizon);
    std::vector<Arrival> arrivals = spawn_arrivals(spec_);
    if (individual_vehicles(spec_.controller)) arrivals = split_arrivals(arrivals, 1, spec_.demand.headway);
    admit(arrivals);
  }

  const ScenarioSpec& spec() const { return spec_; }
  double now() const { return now_; }
  const std::vector<State>& states() const { return states_; }
  const std::string& log() const { return log_.text(); }
  const std::vector<Occupancy>& occupancies() const { return occupancy_; }

  /// Processes every event up to t and moves the clock there.
  void advance_to(double t) {
    t = std::min(t, spec_.horizon);
    while (true) {
      const auto ev = next_event();
      if (!ev || ev->time > t) break;
      now_ = ev->time;
      handle(*ev);
    }
    now_ = std::max(now_, t);
    if (opts_.reschedule_each_step && spec_.controller != ControllerKind::LQF_MWM) reschedule(false);
  }

  void step(double dt) {
    if (!(dt > 0.0)) throw DomainError("step size must be > 0");
    advance_to(now_ + dt);
  }

  /// Leader state of a platoon at the current time (schedule or merging zone).
  VehicleState leader_state(int id) const { return position_at(states_.at(index_.at(id)), now_); }

  MetricsRecord run() {
    double t = 0.0;
    if (opts_.reschedule_each_step) {
      while (t < spec_.horizon) {
        t = std::min(spec_.horizon, t + spec_.dt);
        advance_to(t);
      }
    } else {
      advance_to(spec_.horizon);
    }
    return finalize();
  }

  /// Metrics at the current time.
  MetricsRecord finalize() const {
    MetricsRecord m;
    const double h = now_;
    const double t_h = spec_.demand.headway;
    double travel_sum = 0.0, delay_sum = 0.0, exited_fuel = 0.0;
    for (const State& s : states_) {
      if (s.arrival.time > h) continue;
      ++m.platoons;
      if (s.stopped) ++m.stops;
      if (s.phase == Phase::InMerging || s.phase == Phase::Exited)
        m.max_lateness = std::max(m.max_lateness, s.te - s.deadline);
      const double free_flow = best_arrival(s.v0, spec_.geometry.schedule_zone_length, s.vmax, spec_.bounds.u_max).duration +
                               s.distance / s.vmax;
      for (int i = 0; i < s.size; ++i) {
        const double shift = i * t_h;
        const double spawn = s.arrival.time + shift;
        if (spawn > h) continue;
        ++m.spawned;
        const bool exited = s.phase != Phase::Upstream && s.phase != Phase::InSchedule && s.tm &&
                            *s.tm + shift + s.distance / s.vmax <= h;
        const double fuel = vehicle_fuel(s, shift, h);
        m.total_fuel += fuel;
        if (!exited) {
          ++m.in_flight;
          continue;
        }
        VehicleRecord v;
        v.platoon = s.id;
        v.member = i;
        v.route = s.route.name();
        v.size = s.size;
        v.spawn = spawn;
        v.entry = s.t0 + shift;
        v.merge = *s.tm + shift;
        v.exit = v.merge + s.distance / s.vmax;
        v.travel = v.exit - v.spawn;
        v.free_flow = free_flow;
        v.delay = v.travel - free_flow;
        v.fuel = fuel;
        travel_sum += v.travel;
        delay_sum += v.delay;
        exited_fuel += fuel;
        m.vehicles.push_back(std::move(v));
      }
    }
    m.throughput = static_cast<int>(m.vehicles.size());
    if (m.throughput > 0) {
      m.average_travel_time = travel_sum / m.throughput;
      m.average_delay = delay_sum / m.throughput;
      m.average_fuel = exited_fuel / m.throughput;
    }
    m.monitor_violations = violations_;
    if (opts_.lane_order_check) m.lane_order_violations = lane_order_violations(h);
    // Conservation is checked against the event counters kept while running.
    if (m.spawned != m.throughput + m.in_flight) throw SimulationFault("vehicle conservation violated");
    if (m.throughput != count_exited_vehicles(h)) throw SimulationFault("exit bookkeeping disagrees with the events");
    return m;
  }

 private:
  enum class EventKind { Exit = 0, MergeEntry = 1, ZoneEntry = 2, LqfTick = 3 };
  struct Event {
    double time;
    EventKind kind;
    int id;
  };

  void admit(std::vector<Arrival> arrivals) {
    // Lane admission: a platoon enters once the previous one in its lane has
    // fully entered.
    std::map<std::pair<int, int>, double> lane_free;
    std::vector<State> pending;
    for (const Arrival& a : arrivals) {
      State s;
      s.arrival = a;
      s.route = Route::in_lane(a.approach, a.lane, a.decision, spec_.geometry.lanes_per_approach);
      s.size = a.size;
      const auto key = std::make_pair(static_cast<int>(a.approach), a.lane);
      auto it = lane_free.find(key);
      s.t0 = it == lane_free.end() ? a.time : std::max(a.time, it->second);
      lane_free[key] = s.t0 + a.size * spec_.demand.headway;
      s.v0 = a.speed;
      s.vmax = route_vmax(s.route, spec_.geometry);
      s.distance = merging_distance(s.route, spec_.geometry);
      s.crossing = crossing_time(s.route, s.size, spec_.demand.headway, spec_.geometry);
      s.deadline = s.t0 + spec_.geometry.schedule_zone_length / std::max(s.v0, spec_.crawl_floor) + s.crossing;
      pending.push_back(std::move(s));
    }
    std::stable_sort(pending.begin(), pending.end(), [](const State& x, const State& y) {
      if (x.t0 != y.t0) return x.t0 < y.t0;
      if (x.arrival.approach != y.arrival.approach) return x.arrival.approach < y.arrival.approach;
      return x.arrival.lane < y.arrival.lane;
    });
    for (std::size_t i = 0; i < pending.size(); ++i) {
      pending[i].id = static_cast<int>(i) + 1;
      index_[pending[i].id] = i;
    }
    states_ = std::move(pending);
  }

  std::optional<Event> next_event() const {
    std::optional<Event> best;
    auto offer = [&](double t, EventKind k, int id) {
      if (!best || t < best->time || (t == best->time && (k < best->kind || (k == best->kind && id < best->id))))
        best = Event{t, k, id};
    };
    if (next_entry_ < states_.size()) offer(states_[next_entry_].t0, EventKind::ZoneEntry, states_[next_entry_].id);
    for (std::size_t i : active_) {
      const State& s = states_[i];
      if (s.phase == Phase::InSchedule && s.tm) offer(*s.tm, EventKind::MergeEntry, s.id);
      if (s.phase == Phase::InMerging) offer(s.tail_exit, EventKind::Exit, s.id);
    }
    if (spec_.controller == ControllerKind::LQF_MWM) offer(next_tick_, EventKind::LqfTick, 0);
    return best;
  }

  void handle(const Event& ev) {
    switch (ev.kind) {
      case EventKind::ZoneEntry: on_zone_entry(); break;
      case EventKind::MergeEntry: on_merge_entry(states_[index_.at(ev.id)]); break;
      case EventKind::Exit: on_exit(states_[index_.at(ev.id)]); break;
      case EventKind::LqfTick: on_tick(); break;
    }
  }

  void on_zone_entry() {
    State& s = states_[next_entry_];
    active_.push_back(next_entry_);
    ++next_entry_;
    s.phase = Phase::InSchedule;
    log_.line(now_, "ENTER", s.id, "%s %d %.17g %.17g %.17g %.17g %.17g %.17g", s.route.name().c_str(), s.size,
              s.arrival.time, s.v0, s.vmax, s.distance, spec_.demand.headway, s.deadline);
    if (spec_.controller == ControllerKind::LQF_MWM) {
      hold(s);
      admit_green();
    } else {
      reschedule();
    }
  }

  void on_merge_entry(State& s) {
    const VehicleState at = evaluate(s.plan, *s.tm);
    if (std::abs(at.p - spec_.geometry.schedule_zone_length) > 1e-6)
      fault("leader reached the merging zone away from the stop line", s);
    s.phase = Phase::InMerging;
    s.tail_exit = *s.tm + platoon_tail_clearance_time(s.size, spec_.demand.headway) + s.distance / s.vmax;
    s.te = *s.tm + s.crossing;
    Occupancy occ{s.id, s.route, *s.tm, s.tail_exit};
    prune_occupancy();
    const std::string problem = check_occupancy(occ, occupancy_, spec_.geometry, spec_.conflicts);
    if (!problem.empty()) {
      ++violations_;
      if (opts_.throw_on_violation) fault("occupancy violation: " + problem, s);
    }
    occupancy_.push_back(occ);
    log_.line(now_, "MERGE", s.id, "%.17g %.17g", s.tail_exit, s.te);
    if (spec_.controller != ControllerKind::LQF_MWM) reschedule();
  }

  void on_exit(State& s) {
    s.phase = Phase::Exited;
    exited_platoons_.push_back(s.id);
    active_.erase(std::find(active_.begin(), active_.end(), index_.at(s.id)));
    log_.line(now_, "EXIT", s.id, "");
  }

  // --- optimal and first-come-first-serve controllers ---

  static constexpr double kSameTime = 1e-9;

  bool locked(const State& s, const VehicleState& at) const {
    // Too close to the merging zone to brake to a stop and reaccelerate: a
    // further delay could not be absorbed, so the entry time is kept.
    if (!s.tm) return false;
    const double remaining = spec_.geometry.schedule_zone_length - at.p;
    const double need = at.v * at.v / (-2.0 * spec_.bounds.u_min) + s.vmax * s.vmax / (2.0 * spec_.bounds.u_max);
    return at.v > 0.0 && remaining < need - 1e-9;
  }

  // Lock status is an input of the schedule like the platoon set, so it only
  // changes at events; a recomputation between events then reproduces the
  // current schedule exactly.
  void reschedule(bool refresh_locks = true) {
    std::vector<Job> jobs;
    std::vector<Commitment> committed;
    std::vector<std::size_t> job_state;
    for (std::size_t i : active_) {
      const State& s = states_[i];
      if (s.phase == Phase::InMerging) {
        committed.push_back({s.route, s.te});
        continue;
      }
      const VehicleState at = position_at(s, now_);
      if (refresh_locks) states_[i].locked = locked(s, at);
      if (spec_.controller != ControllerKind::FCFS_Platoon && spec_.controller != ControllerKind::FCFS_Ind &&
          s.locked) {
        committed.push_back({s.route, *s.tm + s.crossing});
        continue;
      }
      Job j;
      j.id = s.id;
      j.route = s.route;
      j.size = s.size;
      j.headway = spec_.demand.headway;
      j.entry_time = s.t0;
      j.initial_speed = s.v0;
      j.position = at.p;
      j.speed = at.v;
      jobs.push_back(j);
      job_state.push_back(i);
    }
    for (const Occupancy& o : occupancy_) {
      const double free = o.leave + spec_.geometry.clearance_time;
      if (free > now_ && states_[index_.at(o.id)].phase == Phase::Exited) committed.push_back({o.route, free});
    }
    if (jobs.empty()) return;

    std::map<int, double> tm;
    if (spec_.controller == ControllerKind::FCFS_Platoon || spec_.controller == ControllerKind::FCFS_Ind) {
      const Schedule sch = fcfs_schedule(jobs, now_, cfg_, committed, spec_.fcfs_serial);
      tm = sch.entry_times;
    } else {
      for (Job& j : jobs) {
        j.release = -std::numeric_limits<double>::infinity();
        for (const Commitment& c : committed)
          if (conflicts(c.route, j.route, spec_.conflicts)) j.release = std::max(j.release, c.exit);
      }
      const ScheduleResult r = schedule_jobs(jobs, now_, cfg_);
      tm = r.schedule.entry_times;
    }
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      State& s = states_[job_state[k]];
      const double t = tm.at(s.id);
      if (s.tm && std::abs(*s.tm - t) <= kSameTime) continue;
      assign(s, t);
    }
  }

  void assign(State& s, double tm) {
    const VehicleState at = s.plan.segments.empty() ? VehicleState{0.0, s.v0, 0.0} : position_at(s, now_);
    const ControlBounds b = spec_.bounds.with_vmax(s.vmax);
    Trajectory next;
    try {
      next = plan_arrival(now_, at, spec_.geometry.schedule_zone_length, tm, b);
    } catch (const Error& e) {
      fault(std::string("no trajectory for the assigned entry time: ") + e.what(), s);
    }
    const FeasibilityReport rep = feasibility_check(next, b, 1e-6);
    if (!rep.feasible) fault("planned trajectory leaves the control or speed bounds", s);
    s.plan = s.plan.segments.empty() ? next : splice(s.plan, now_, next);
    s.tm = tm;
    s.stopped = s.stopped || stops(next);
    log_.line(now_, "SCHEDULE", s.id, "%.17g %.17g %.17g %.17g", s.t0, s.deadline, tm, tm + s.crossing);
    log_plan(s);
  }

  static bool stops(const Trajectory& tr) {
    for (const Segment& seg : tr.segments)
      if (seg.law == SegmentLaw::ConstantAccel && seg.accel == 0.0 && seg.v0 == 0.0 && seg.duration() > 0.0)
        return true;
    return false;
  }

  void log_plan(const State& s) {
    if (!log_.enabled()) return;
    std::string line;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.6f PLAN %d %s %zu", now_, s.id, kind_name(s.plan.kind), s.plan.segments.size());
    line += buf;
    for (const Segment& seg : s.plan.segments) {
      std::snprintf(buf, sizeof buf, " %.17g %.17g %.17g %.17g %.17g %.17g", seg.t_begin, seg.t_end, seg.jerk,
                    seg.accel, seg.v0, seg.p0);
      line += buf;
    }
    line += '\n';
    log_.raw(line);
  }

  // --- longest queue first ---

  void hold(State& s) {
    const VehicleState at = s.plan.segments.empty() ? VehicleState{0.0, s.v0, 0.0} : position_at(s, now_);
    const ControlBounds b = spec_.bounds.with_vmax(s.vmax);
    Trajectory wait = stop_wait_fallback(now_, now_ + kHoldHorizon, at.v, spec_.geometry.schedule_zone_length,
                                         s.vmax, b, at.p);
    s.plan = s.plan.segments.empty() ? wait : splice(s.plan, now_, wait);
    s.stopped = true;
    log_plan(s);
  }

  static constexpr double kHoldHorizon = 1e6;

  void on_tick() {
    std::map<std::pair<Approach, int>, double> queues;
    for (std::size_t i : active_) {
      const State& s = states_[i];
      if (s.phase == Phase::InSchedule && !s.admitted) queues[{s.route.approach, s.route.lane_index}] += s.size;
    }
    assign_weights(lane_groups_, queues);
    green_ = lqf_select(lane_groups_);
    green_end_ = now_ + spec_.lqf_interval;
    next_tick_ = green_end_;
    log_.line(now_, "TICK", green_, "%.17g", lane_groups_[green_].weight);
    admit_green();
  }

  void admit_green() {
    if (green_ < 0) return;
    std::vector<Commitment> committed;
    for (std::size_t i : active_) {
      const State& s = states_[i];
      if (s.admitted) committed.push_back({s.route, *s.tm + s.crossing});
    }
    for (const Occupancy& o : occupancy_) {
      const double free = o.leave + spec_.geometry.clearance_time;
      if (free > now_ && states_[index_.at(o.id)].phase == Phase::Exited) committed.push_back({o.route, free});
    }
    for (const auto& [approach, lane] : lane_groups_[green_].lanes) {
      for (std::size_t i : active_) {
        State& s = states_[i];
        if (s.route.approach != approach || s.route.lane_index != lane || s.admitted) continue;
        // active_ is in entry order, so this is the first waiting platoon of the lane.
        const VehicleState at = position_at(s, now_);
        const double remaining = std::max(0.0, spec_.geometry.schedule_zone_length - at.p);
        const double approach =
            best_arrival(std::clamp(at.v, 0.0, s.vmax), remaining, s.vmax, spec_.bounds.u_max).duration;
        double tm = now_ + approach;
        for (const Commitment& c : committed)
          if (conflicts(c.route, s.route, spec_.conflicts)) tm = std::max(tm, c.exit);
        // Discharge: the platoon must be able to start its final approach
        // before the green interval ends.
        if (!(tm - approach < green_end_)) break;
        s.admitted = true;
        assign(s, tm);
        committed.push_back({s.route, tm + s.crossing});
      }
    }
  }

  // --- bookkeeping ---

  VehicleState position_at(const State& s, double t) const {
    if (s.phase == Phase::Upstream || s.plan.segments.empty()) return {0.0, s.v0, 0.0};
    if (s.tm && t >= *s.tm) return {spec_.geometry.schedule_zone_length + s.vmax * (t - *s.tm), s.vmax, 0.0};
    return evaluate(s.plan, std::min(t, s.plan.t_end));
  }

  void prune_occupancy() {
    const double keep = now_ - 2.0 * spec_.geometry.clearance_time;
    std::erase_if(occupancy_, [&](const Occupancy& o) { return o.leave < keep; });
  }

  double vehicle_fuel(const State& s, double shift, double h) const {
    // Leader-time horizon for this member.
    const double cap = h - shift;
    double fuel = spec_.fuel.c0 * std::max(0.0, std::min(s.t0, cap) - s.arrival.time);
    if (s.phase == Phase::Upstream || s.plan.segments.empty() || cap <= s.t0) return fuel;
    const double zone_end = s.tm ? std::min(*s.tm, cap) : cap;
    fuel += integrate_plan(s.plan, s.t0, std::min(zone_end, s.plan.t_end));
    if (s.tm && cap > *s.tm) {
      const double cross = std::min(cap, *s.tm + s.distance / s.vmax) - *s.tm;
      fuel += spec_.fuel.rate(s.vmax, 0.0) * cross;
    }
    return fuel;
  }

  double integrate_plan(const Trajectory& plan, double from, double to) const {
    if (to <= from) return 0.0;
    double total = 0.0;
    double t = from;
    VehicleState prev = evaluate(plan, t);
    double r_prev = spec_.fuel.rate(prev.v, prev.u);
    while (t < to) {
      const double t_next = std::min(to, t + spec_.dt);
      const VehicleState cur = evaluate(plan, t_next);
      const double r = spec_.fuel.rate(cur.v, cur.u);
      total += 0.5 * (r_prev + r) * (t_next - t);
      r_prev = r;
      t = t_next;
    }
    return total;
  }

  int count_exited_vehicles(double h) const {
    int n = 0;
    for (int id : exited_platoons_) n += states_[index_.at(id)].size;
    // Platoons still crossing may have released their first vehicles.
    for (std::size_t i : active_) {
      const State& s = states_[i];
      if (s.phase != Phase::InMerging) continue;
      for (int k = 0; k < s.size; ++k)
        if (*s.tm + k * spec_.demand.headway + s.distance / s.vmax <= h) ++n;
    }
    return n;
  }

  // Consecutive platoons of a lane must not swap order inside the schedule
  // zone: the follower's leader stays behind the predecessor's last vehicle.
  int lane_order_violations(double h) const {
    std::map<std::pair<int, int>, const State*> last;
    int count = 0;
    const double t_h = spec_.demand.headway;
    for (const State& s : states_) {
      if (s.phase == Phase::Upstream || s.plan.segments.empty()) continue;
      const auto key = std::make_pair(static_cast<int>(s.route.approach), s.route.lane_index);
      const State* prev = last[key];
      last[key] = &s;
      if (!prev) continue;
      const double tail = (prev->size - 1) * t_h;
      const double end = std::min(h, s.tm ? *s.tm : h);
      for (double t = s.t0; t <= end; t += spec_.dt) {
        const double tail_time = t - tail;
        const double tail_p = tail_time <= prev->t0 ? 0.0 : position_at(*prev, tail_time).p;
        if (position_at(s, t).p > tail_p + 1e-6) {
          ++count;
          break;
        }
      }
    }
    return count;
  }

  [[noreturn]] void fault(const std::string& what, const State& s) const {
    char buf[512];
    std::snprintf(buf, sizeof buf, "t=%.6f seed=%llu controller=%s platoon=%d route=%s t0=%.6f v0=%.6f tm=%s: ", now_,
                  static_cast<unsigned long long>(spec_.seed), controller_name(spec_.controller), s.id,
                  s.route.name().c_str(), s.t0, s.v0, s.tm ? std::to_string(*s.tm).c_str() : "none");
    std::string dump = buf + what + "\nactive:";
    for (std::size_t i : active_) {
      const State& o = states_[i];
      std::snprintf(buf, sizeof buf, "\n  %d %s phase=%d tm=%s", o.id, o.route.name().c_str(),
                    static_cast<int>(o.phase), o.tm ? std::to_string(*o.tm).c_str() : "none");
      dump += buf;
    }
    throw SimulationFault(dump);
  }

  ScenarioSpec spec_;
  EngineOptions opts_;
  EventLog log_;
  SchedulerConfig cfg_;
  std::vector<State> states_;
  std::map<int, std::size_t> index_;
  std::size_t next_entry_ = 0;
  std::vector<std::size_t> active_;  // in entry order
  std::vector<int> exited_platoons_;
  std::vector<Occupancy> occupancy_;
  std::vector<LaneGroup> lane_groups_;
  int green_ = -1;
  double green_end_ = 0.0;
  double next_tick_ = 0.0;
  int violations_ = 0;
  double now_ = 0.0;
};

/// One complete run of a scenario.
struct RunResult {
  MetricsRecord metrics;
  std::string log;
};

inline RunResult run(const ScenarioSpec& spec, EngineOptions options = {}) {
  Simulation sim(spec, options);
  RunResult r;
  r.metrics = sim.run();
  r.log = sim.log();
  return r;
}

}  // namespace pcoord
