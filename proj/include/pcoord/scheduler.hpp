#pragma once

// Upper-level coordination: passing times and deadlines per platoon, groups of
// mutually compatible platoons, earliest-due-date sequencing of the groups and
// merging-zone entry times.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pcoord/cliques.hpp"
#include "pcoord/geometry.hpp"
#include "pcoord/platoon.hpp"

namespace pcoord {

inline constexpr double kDefaultCrawlFloor = 0.5;

struct PlatoonTiming {
  double arrival_time_min = 0.0;  // t_a*: schedule-zone traversal at best speed
  double crossing_time = 0.0;     // t_c*
  double passing_time = 0.0;      // t_p = t_a* + t_c*
  double deadline = 0.0;          // t_d = t_a' + t_c*
  double cruise_arrival = 0.0;    // t_a': traversal at the entry speed
  double accel_duration = 0.0;    // t_s
  double accel_distance = 0.0;    // d_s
};

/// Time from the leader entering the merging zone until the zone is free
/// again: leader traversal, tail clearance and the clearance buffer.
inline double crossing_time(const Route& route, int size, double headway, const IntersectionGeometry& geom) {
  return merging_distance(route, geom) / route_vmax(route, geom) + platoon_tail_clearance_time(size, headway) +
         geom.clearance_time;
}

inline PlatoonTiming compute_passing_time(const Platoon& platoon, const IntersectionGeometry& geom,
                                          const ControlBounds& bounds) {
  const double vmax = route_vmax(platoon.route, geom);
  const BestArrival best = best_arrival(platoon.initial_speed, geom.schedule_zone_length, vmax, bounds.u_max);
  PlatoonTiming t;
  t.arrival_time_min = best.duration;
  t.accel_duration = best.accel_duration;
  t.accel_distance = best.accel_distance;
  t.crossing_time = crossing_time(platoon.route, platoon.size, platoon.headway, geom);
  t.passing_time = t.arrival_time_min + t.crossing_time;
  return t;
}

/// Adds the cruise arrival and deadline. Entry speeds below the crawl floor
/// are raised to it so that stopped platoons keep a finite (late) deadline.
inline PlatoonTiming compute_deadline(const Platoon& platoon, PlatoonTiming timing, const IntersectionGeometry& geom,
                                      double crawl_floor = kDefaultCrawlFloor) {
  const double v = std::max(platoon.initial_speed, crawl_floor);
  if (!(v > 0.0)) throw InfeasibleState("deadline undefined for a stopped platoon");
  timing.cruise_arrival = geom.schedule_zone_length / v;
  timing.deadline = timing.cruise_arrival + timing.crossing_time;
  return timing;
}

inline double lateness(double completion, double deadline) { return completion - deadline; }

/// A set of mutually compatible platoons granted the merging zone together.
struct Group {
  std::vector<int> members;   // ascending platoon ids
  double deadline = 0.0;      // t_g_d, max over members
  double passing = 0.0;       // t_g_p
  double crossing = 0.0;      // t_g_c
  double earliest_entry = 0.0;  // min member t0, EDD tie-break
  int min_id = 0;
};

/// What the grouping and sequencing steps need to know about one platoon.
/// `timing.deadline` may be relative or absolute; it is only compared.
struct ScheduleEntry {
  int id = 0;
  double entry_time = 0.0;
  PlatoonTiming timing;
};

using EntryIndex = std::map<int, ScheduleEntry>;

inline EntryIndex index_entries(std::span<const ScheduleEntry> entries) {
  EntryIndex idx;
  for (const auto& e : entries) idx.emplace(e.id, e);
  return idx;
}

inline Group aggregate_group(std::vector<int> members, const EntryIndex& index) {
  std::sort(members.begin(), members.end());
  Group g;
  g.members = std::move(members);
  g.deadline = -std::numeric_limits<double>::infinity();
  g.passing = -std::numeric_limits<double>::infinity();
  g.crossing = -std::numeric_limits<double>::infinity();
  g.earliest_entry = std::numeric_limits<double>::infinity();
  g.min_id = g.members.empty() ? 0 : g.members.front();
  for (int id : g.members) {
    const ScheduleEntry& e = index.at(id);
    g.deadline = std::max(g.deadline, e.timing.deadline);
    g.passing = std::max(g.passing, e.timing.passing_time);
    g.crossing = std::max(g.crossing, e.timing.crossing_time);
    g.earliest_entry = std::min(g.earliest_entry, e.entry_time);
  }
  return g;
}

namespace detail {

struct GroupChoice {
  std::vector<int> ids;  // ascending
  double deadline = 0.0;
};

// Larger groups first, then the earlier group deadline, then smaller ids.
inline bool better_choice(const GroupChoice& a, const GroupChoice& b) {
  if (a.ids.size() != b.ids.size()) return a.ids.size() > b.ids.size();
  if (a.deadline != b.deadline) return a.deadline < b.deadline;
  return a.ids < b.ids;
}

}  // namespace detail

/// Partitions the platoons into groups. Maximal cliques of the compatibility
/// graph may overlap, so they are committed greedily (largest surviving
/// clique first, then earliest group deadline, then smallest ids) and
/// committed platoons are removed from the cliques still pending.
inline std::vector<Group> build_groups(std::span<const ScheduleEntry> entries, const CompatibilityGraph& graph,
                                       int vertex_cap = CompatibilityGraph::kMaxVertices) {
  if (entries.empty()) return {};
  const EntryIndex index = index_entries(entries);
  if (static_cast<std::size_t>(graph.size()) != index.size())
    throw ConfigError("compatibility graph must cover exactly the scheduled platoons");
  for (int v = 0; v < graph.size(); ++v)
    if (!index.contains(graph.id(v))) throw ConfigError("graph vertex without a schedule entry");

  const auto cliques = enumerate_maximal_cliques(graph, vertex_cap);
  std::vector<std::uint64_t> masks;
  masks.reserve(cliques.size());
  for (const auto& c : cliques) {
    std::uint64_t m = 0;
    for (int v : c) m |= CompatibilityGraph::bit(v);
    masks.push_back(m);
  }

  std::uint64_t alive = graph.size() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << graph.size()) - 1;
  std::vector<Group> groups;
  while (alive) {
    detail::GroupChoice best;
    std::uint64_t best_mask = 0;
    for (std::uint64_t m : masks) {
      std::uint64_t surviving = m & alive;
      if (!surviving) continue;
      detail::GroupChoice choice;
      choice.deadline = -std::numeric_limits<double>::infinity();
      for (std::uint64_t s = surviving; s; s &= s - 1) {
        const int v = std::countr_zero(s);
        choice.ids.push_back(graph.id(v));
        choice.deadline = std::max(choice.deadline, index.at(graph.id(v)).timing.deadline);
      }
      std::sort(choice.ids.begin(), choice.ids.end());
      if (best_mask == 0 || detail::better_choice(choice, best)) {
        best = std::move(choice);
        best_mask = surviving;
      }
    }
    alive &= ~best_mask;
    groups.push_back(aggregate_group(std::move(best.ids), index));
  }
  return groups;
}

/// Same partition as build_groups when platoons fall into classes such that
/// members of one class pairwise conflict and compatibility between members
/// of different classes depends only on their classes (a lane in practice).
/// Works on the class graph, so the platoon count is not limited to 64.
inline std::vector<Group> build_groups_by_class(std::span<const ScheduleEntry> entries, std::span<const int> class_of,
                                                const CompatibilityGraph& class_graph) {
  if (entries.size() != class_of.size()) throw ConfigError("class assignment must cover every entry");
  const EntryIndex index = index_entries(entries);
  const int n_classes = class_graph.size();
  std::vector<std::vector<const ScheduleEntry*>> members(n_classes);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (class_of[i] < 0 || class_of[i] >= n_classes) throw ConfigError("class index out of range");
    members[class_of[i]].push_back(&entries[i]);
  }

  std::vector<Group> groups;
  std::size_t remaining = entries.size();
  while (remaining > 0) {
    std::vector<int> nonempty;
    for (int c = 0; c < n_classes; ++c)
      if (!members[c].empty()) nonempty.push_back(c);
    CompatibilityGraph sub(nonempty);
    for (std::size_t a = 0; a < nonempty.size(); ++a)
      for (std::size_t b = a + 1; b < nonempty.size(); ++b)
        if (class_graph.adjacent(nonempty[a], nonempty[b])) sub.connect(static_cast<int>(a), static_cast<int>(b));

    detail::GroupChoice best;
    std::vector<std::pair<int, int>> best_picks;  // (class, id)
    bool have_best = false;
    for (const auto& clique : enumerate_maximal_cliques(sub)) {
      detail::GroupChoice choice;
      choice.deadline = -std::numeric_limits<double>::infinity();
      for (int v : clique) {
        double lowest = std::numeric_limits<double>::infinity();
        for (const ScheduleEntry* e : members[nonempty[v]]) lowest = std::min(lowest, e->timing.deadline);
        choice.deadline = std::max(choice.deadline, lowest);
      }
      // Within the deadline budget, the smallest id per class gives the
      // lexicographically smallest member list.
      std::vector<std::pair<int, int>> picks;
      for (int v : clique) {
        int pick = std::numeric_limits<int>::max();
        for (const ScheduleEntry* e : members[nonempty[v]])
          if (e->timing.deadline <= choice.deadline) pick = std::min(pick, e->id);
        picks.emplace_back(nonempty[v], pick);
        choice.ids.push_back(pick);
      }
      std::sort(choice.ids.begin(), choice.ids.end());
      if (!have_best || detail::better_choice(choice, best)) {
        best = std::move(choice);
        best_picks = std::move(picks);
        have_best = true;
      }
    }
    for (const auto& [cls, id] : best_picks) {
      auto& list = members[cls];
      list.erase(std::find_if(list.begin(), list.end(), [id = id](const ScheduleEntry* e) { return e->id == id; }));
    }
    remaining -= best_picks.size();
    groups.push_back(aggregate_group(std::move(best.ids), index));
  }
  return groups;
}

/// Earliest due date: non-decreasing group deadline; ties go to the group
/// whose earliest member entered first, then to the lower platoon id.
inline std::vector<Group> edd_sequence(std::vector<Group> groups) {
  std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
    if (a.deadline != b.deadline) return a.deadline < b.deadline;
    if (a.earliest_entry != b.earliest_entry) return a.earliest_entry < b.earliest_entry;
    return a.min_id < b.min_id;
  });
  return groups;
}

/// EDD list scheduling under lane precedence: walks the EDD order, takes the
/// first group with at least one member whose lane predecessor is already
/// sequenced, and splits off members that would overtake. Identical to
/// edd_sequence when no precedence binds.
inline std::vector<Group> sequence_with_precedence(std::vector<Group> groups, const std::map<int, int>& predecessor,
                                                   const EntryIndex& index) {
  std::vector<Group> pending = edd_sequence(std::move(groups));
  std::vector<Group> out;
  std::map<int, bool> placed;
  auto ready = [&](int id) {
    const auto it = predecessor.find(id);
    return it == predecessor.end() || placed.contains(it->second) || !index.contains(it->second);
  };
  auto edd_less = [](const Group& a, const Group& b) {
    if (a.deadline != b.deadline) return a.deadline < b.deadline;
    if (a.earliest_entry != b.earliest_entry) return a.earliest_entry < b.earliest_entry;
    return a.min_id < b.min_id;
  };
  while (!pending.empty()) {
    std::size_t pick = pending.size();
    std::vector<int> eligible, blocked;
    for (std::size_t i = 0; i < pending.size() && pick == pending.size(); ++i) {
      eligible.clear();
      blocked.clear();
      for (int id : pending[i].members) (ready(id) ? eligible : blocked).push_back(id);
      if (!eligible.empty()) pick = i;
    }
    if (pick == pending.size()) throw InfeasibleSchedule("lane precedence is cyclic");
    Group g = std::move(pending[pick]);
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pick));
    for (int id : eligible) placed[id] = true;
    if (blocked.empty()) {
      out.push_back(std::move(g));
      continue;
    }
    out.push_back(aggregate_group(eligible, index));
    Group rest = aggregate_group(blocked, index);
    pending.insert(std::upper_bound(pending.begin(), pending.end(), rest, edd_less), std::move(rest));
  }
  return out;
}

/// Ordered groups with the merging-zone entry and exit time of every member.
struct Schedule {
  std::vector<Group> ordered_groups;
  std::map<int, double> entry_times;  // tm
  std::map<int, double> exit_times;   // tm + t_c*, the zone is free again
  std::map<int, int> group_of;
  std::vector<double> group_exit;
  double completion_time = 0.0;  // t_G^f
};

/// Per-platoon inputs of the entry-time assignment, all absolute times.
struct EntryRequest {
  double earliest = 0.0;  // now + t_a*
  double crossing = 0.0;  // t_c*
  double release = -std::numeric_limits<double>::infinity();  // zone busy until
};

/// Chains the groups: every member enters no earlier than the previous
/// group's exit, its own best-speed arrival, or its release, and the group
/// exits when its last member clears. With a common release this is the
/// classic rule: the first group exits at now + t_g_p (or t_G^f + t_g_c when
/// the zone is still busy) and every later group enters at its
/// predecessor's exit and leaves t_g_c after.
inline Schedule assign_entry_times(const std::vector<Group>& sequence, const std::map<int, EntryRequest>& requests) {
  Schedule s;
  s.ordered_groups = sequence;
  double start = -std::numeric_limits<double>::infinity();
  double exit = start;
  for (std::size_t k = 0; k < sequence.size(); ++k) {
    exit = start;
    for (int id : sequence[k].members) {
      const EntryRequest& r = requests.at(id);
      const double tm = std::max({start, r.earliest, r.release});
      s.entry_times[id] = tm;
      s.exit_times[id] = tm + r.crossing;
      s.group_of[id] = static_cast<int>(k);
      exit = std::max(exit, tm + r.crossing);
    }
    s.group_exit.push_back(exit);
    start = exit;
  }
  s.completion_time = sequence.empty() ? 0.0 : exit;
  return s;
}

inline Schedule assign_entry_times(const std::vector<Group>& sequence, double now,
                                   const std::map<int, PlatoonTiming>& timings, double prior_completion) {
  std::map<int, EntryRequest> requests;
  for (const Group& g : sequence)
    for (int id : g.members) {
      const PlatoonTiming& t = timings.at(id);
      requests[id] = {now + t.arrival_time_min, t.crossing_time, prior_completion};
    }
  return assign_entry_times(sequence, requests);
}

/// Entry times for a fixed sequence where each platoon only waits for the
/// earlier-sequenced platoons whose routes conflict with its own. Compatible
/// platoons of consecutive groups may then share the merging zone.
inline Schedule assign_entry_times_by_conflict(const std::vector<Group>& sequence,
                                               const std::map<int, EntryRequest>& requests,
                                               const std::map<int, Route>& routes,
                                               const MovementConflictTable& table) {
  Schedule s;
  s.ordered_groups = sequence;
  std::vector<std::pair<const Route*, double>> granted;
  double last = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < sequence.size(); ++k) {
    double exit = -std::numeric_limits<double>::infinity();
    const std::size_t before = granted.size();
    for (int id : sequence[k].members) {
      const EntryRequest& r = requests.at(id);
      const Route& route = routes.at(id);
      double tm = std::max(r.earliest, r.release);
      for (std::size_t g = 0; g < before; ++g)
        if (conflicts(*granted[g].first, route, table)) tm = std::max(tm, granted[g].second);
      s.entry_times[id] = tm;
      s.exit_times[id] = tm + r.crossing;
      s.group_of[id] = static_cast<int>(k);
      exit = std::max(exit, tm + r.crossing);
      granted.emplace_back(&route, tm + r.crossing);
    }
    s.group_exit.push_back(exit);
    last = std::max(last, exit);
  }
  s.completion_time = sequence.empty() ? 0.0 : last;
  return s;
}

/// Scheduler settings shared by every recomputation.
struct SchedulerConfig {
  IntersectionGeometry geometry;
  ControlBounds bounds;
  MovementConflictTable conflicts = MovementConflictTable::standard_four_leg();
  double crawl_floor = kDefaultCrawlFloor;
  bool lane_precedence = true;
  /// Group: every group waits for the whole previous group to clear.
  /// Conflict: a platoon waits only for earlier-sequenced platoons it
  /// conflicts with; the sequence itself is unchanged.
  enum class Chaining { Group, Conflict } chaining = Chaining::Group;
};

/// A platoon still in the schedule zone, as seen by one recomputation.
struct Job {
  int id = 0;
  Route route;
  int size = 1;
  double headway = 1.2;
  double entry_time = 0.0;     // t0
  double initial_speed = 0.0;  // v0, fixes the deadline
  double position = 0.0;       // current leader position
  double speed = 0.0;          // current leader speed
  double release = -std::numeric_limits<double>::infinity();
};

struct ScheduleResult {
  Schedule schedule;
  std::map<int, PlatoonTiming> timings;     // deadline is absolute here
  std::map<int, double> effective_deadline;  // after lane-precedence tightening
};

/// Full recomputation over the platoons still in the schedule zone.
/// Best-speed arrivals come from each leader's current state; deadlines are
/// absolute (t0 + t_a' + t_c*). Platoons sharing a lane keep their order:
/// deadlines are tightened backwards along each lane (d_k <= d_{k+1} - c_{k+1})
/// before grouping and the sequence never lets a follower overtake.
inline ScheduleResult schedule_jobs(std::span<const Job> jobs, double now, const SchedulerConfig& cfg) {
  ScheduleResult result;
  if (jobs.empty()) return result;
  const auto& geom = cfg.geometry;

  std::vector<ScheduleEntry> entries;
  entries.reserve(jobs.size());
  std::map<int, EntryRequest> requests;
  for (const Job& j : jobs) {
    const double vmax = route_vmax(j.route, geom);
    const double remaining = std::max(0.0, geom.schedule_zone_length - j.position);
    const BestArrival best = best_arrival(std::min(j.speed, vmax), remaining, vmax, cfg.bounds.u_max);
    PlatoonTiming t;
    t.arrival_time_min = best.duration;
    t.accel_duration = best.accel_duration;
    t.accel_distance = best.accel_distance;
    t.crossing_time = crossing_time(j.route, j.size, j.headway, geom);
    t.passing_time = t.arrival_time_min + t.crossing_time;
    const double v_dead = std::max(j.initial_speed, cfg.crawl_floor);
    if (!(v_dead > 0.0)) throw InfeasibleState("deadline undefined for a stopped platoon");
    t.cruise_arrival = geom.schedule_zone_length / v_dead;
    t.deadline = j.entry_time + t.cruise_arrival + t.crossing_time;
    result.timings[j.id] = t;
    entries.push_back({j.id, j.entry_time, t});
    requests[j.id] = {now + t.arrival_time_min, t.crossing_time, j.release};
  }

  // Lane chains in entry order.
  std::map<std::pair<int, int>, std::vector<std::size_t>> lanes;
  for (std::size_t i = 0; i < jobs.size(); ++i)
    lanes[{static_cast<int>(jobs[i].route.approach), jobs[i].route.lane_index}].push_back(i);
  std::map<int, int> predecessor;
  for (auto& [key, chain] : lanes) {
    std::sort(chain.begin(), chain.end(), [&](std::size_t a, std::size_t b) {
      if (jobs[a].entry_time != jobs[b].entry_time) return jobs[a].entry_time < jobs[b].entry_time;
      return jobs[a].id < jobs[b].id;
    });
    if (!cfg.lane_precedence) continue;
    for (std::size_t k = chain.size(); k-- > 1;) {
      ScheduleEntry& prev = entries[chain[k - 1]];
      const ScheduleEntry& next = entries[chain[k]];
      prev.timing.deadline = std::min(prev.timing.deadline, next.timing.deadline - next.timing.crossing_time);
      predecessor[next.id] = prev.id;
    }
  }
  for (const auto& e : entries) result.effective_deadline[e.id] = e.timing.deadline;

  // Classes: (approach, lane, movement). Members of one class share a lane.
  std::map<std::tuple<int, int, int>, int> class_ids;
  std::vector<Route> class_routes;
  std::vector<int> class_of;
  for (const Job& j : jobs) {
    const auto key = std::make_tuple(static_cast<int>(j.route.approach), j.route.lane_index,
                                     static_cast<int>(j.route.decision));
    auto [it, inserted] = class_ids.emplace(key, static_cast<int>(class_routes.size()));
    if (inserted) class_routes.push_back(j.route);
    class_of.push_back(it->second);
  }
  std::vector<int> class_vertex_ids(class_routes.size());
  for (std::size_t c = 0; c < class_routes.size(); ++c) class_vertex_ids[c] = static_cast<int>(c);
  CompatibilityGraph class_graph(class_vertex_ids);
  for (std::size_t a = 0; a < class_routes.size(); ++a)
    for (std::size_t b = a + 1; b < class_routes.size(); ++b)
      if (!conflicts(class_routes[a], class_routes[b], cfg.conflicts))
        class_graph.connect(static_cast<int>(a), static_cast<int>(b));

  std::vector<Group> groups = build_groups_by_class(entries, class_of, class_graph);
  const EntryIndex index = index_entries(entries);
  std::vector<Group> sequence = cfg.lane_precedence ? sequence_with_precedence(std::move(groups), predecessor, index)
                                                    : edd_sequence(std::move(groups));
  if (cfg.chaining == SchedulerConfig::Chaining::Group) {
    result.schedule = assign_entry_times(sequence, requests);
  } else {
    std::map<int, Route> routes;
    for (const Job& j : jobs) routes[j.id] = j.route;
    result.schedule = assign_entry_times_by_conflict(sequence, requests, routes, cfg.conflicts);
  }
  return result;
}

/// Recomputes the schedule when a platoon enters the schedule zone. Platoons
/// already in the merging zone are represented by their committed exit.
inline ScheduleResult reschedule_on_arrival(std::span<const Platoon> active, const Platoon& new_platoon,
                                            double committed_exit, double now, const SchedulerConfig& cfg) {
  std::vector<Job> jobs;
  auto to_job = [&](const Platoon& p) {
    if (p.phase != PlatoonPhase::InScheduleZone) throw DomainError("only schedule-zone platoons are rescheduled");
    Job j;
    j.id = p.id;
    j.route = p.route;
    j.size = p.size;
    j.headway = p.headway;
    j.entry_time = p.entry_time;
    j.initial_speed = p.initial_speed;
    j.position = p.leader_state.p;
    j.speed = p.leader_state.v;
    j.release = committed_exit;
    return j;
  };
  for (const Platoon& p : active) jobs.push_back(to_job(p));
  jobs.push_back(to_job(new_platoon));
  return schedule_jobs(jobs, now, cfg);
}

/// One line per platoon: id, t0, t_d, tm, exit, group index.
inline std::string format_schedule(const ScheduleResult& r, const std::map<int, double>& entry_times) {
  std::string out;
  char buf[160];
  for (std::size_t k = 0; k < r.schedule.ordered_groups.size(); ++k) {
    for (int id : r.schedule.ordered_groups[k].members) {
      std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f %zu\n", id, entry_times.at(id),
                    r.timings.at(id).deadline, r.schedule.entry_times.at(id), r.schedule.exit_times.at(id), k);
      out += buf;
    }
  }
  return out;
}

}  // namespace pcoord
