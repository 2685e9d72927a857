#pragma once

// Reference controllers: first-come-first-serve entry times, splitting
// platoons into individual vehicles, and the max-weight lane-group choice of
// a longest-queue-first phase controller.

#include <algorithm>
#include <limits>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "pcoord/scheduler.hpp"

namespace pcoord {

/// Merging-zone occupancy already granted: the route and the time the zone
/// is free again for conflicting traffic.
struct Commitment {
  Route route;
  double exit = 0.0;
};

/// Entry times in arrival order. Each platoon enters at its own earliest
/// arrival unless an earlier-arrived conflicting platoon (or a committed
/// one) is still in the zone. With `serial` every earlier platoon blocks.
inline Schedule fcfs_schedule(std::span<const Job> jobs, double now, const SchedulerConfig& cfg,
                              std::span<const Commitment> committed = {}, bool serial = false) {
  std::vector<const Job*> order;
  for (const Job& j : jobs) order.push_back(&j);
  std::stable_sort(order.begin(), order.end(), [](const Job* a, const Job* b) {
    if (a->entry_time != b->entry_time) return a->entry_time < b->entry_time;
    return a->id < b->id;
  });

  std::vector<Commitment> granted(committed.begin(), committed.end());
  std::vector<int> granted_ids(granted.size(), -1);
  Schedule s;
  double last = -std::numeric_limits<double>::infinity();
  for (const Job* j : order) {
    const double vmax = route_vmax(j->route, cfg.geometry);
    const double remaining = std::max(0.0, cfg.geometry.schedule_zone_length - j->position);
    const double ta = best_arrival(std::min(j->speed, vmax), remaining, vmax, cfg.bounds.u_max).duration;
    double tm = std::max(now + ta, j->release);
    for (const Commitment& c : granted)
      if (serial || conflicts(c.route, j->route, cfg.conflicts)) tm = std::max(tm, c.exit);
    const double exit = tm + crossing_time(j->route, j->size, j->headway, cfg.geometry);
    granted.push_back({j->route, exit});
    s.entry_times[j->id] = tm;
    s.exit_times[j->id] = exit;
    s.group_of[j->id] = static_cast<int>(s.ordered_groups.size());
    Group g;
    g.members = {j->id};
    g.min_id = j->id;
    g.earliest_entry = j->entry_time;
    s.ordered_groups.push_back(g);
    s.group_exit.push_back(exit);
    last = std::max(last, exit);
  }
  s.completion_time = order.empty() ? 0.0 : last;
  return s;
}

/// Each n-vehicle platoon becomes n single vehicles on the same route,
/// entering t_h apart. New ids are handed out from `next_id` upward.
inline std::vector<Platoon> individualize(std::span<const Platoon> platoons, int next_id) {
  std::vector<Platoon> out;
  for (const Platoon& p : platoons) {
    for (int i = 0; i < p.size; ++i) {
      Platoon v = p;
      v.size = 1;
      v.entry_time = p.entry_time + i * p.headway;
      v.id = p.size == 1 ? p.id : next_id++;
      out.push_back(v);
    }
  }
  return out;
}

/// Lanes that may be given right of way together.
struct LaneGroup {
  std::vector<std::pair<Approach, int>> lanes;
  double weight = 0.0;

  bool contains(Approach a, int lane) const {
    return std::find(lanes.begin(), lanes.end(), std::make_pair(a, lane)) != lanes.end();
  }
};

/// The four phases of a four-leg intersection: through and right lanes of
/// opposing approaches, then their left lanes, for each axis.
inline std::vector<LaneGroup> standard_lane_groups(const IntersectionGeometry& geom) {
  std::vector<LaneGroup> groups(4);
  auto add = [&](int group, Approach a) {
    for (int lane = 1; lane <= geom.lanes_per_approach; ++lane) {
      const bool left = geom.lane_decisions.at(lane - 1) == Decision::Left;
      groups[group + (left ? 1 : 0)].lanes.emplace_back(a, lane);
    }
  };
  add(0, Approach::North);
  add(0, Approach::South);
  add(2, Approach::East);
  add(2, Approach::West);
  return groups;
}

/// True when every pair of lanes in the group may share the merging zone.
inline bool lane_group_compatible(const LaneGroup& g, const IntersectionGeometry& geom,
                                  const MovementConflictTable& table) {
  for (std::size_t i = 0; i < g.lanes.size(); ++i)
    for (std::size_t j = i + 1; j < g.lanes.size(); ++j) {
      const auto [a1, l1] = g.lanes[i];
      const auto [a2, l2] = g.lanes[j];
      const int w = geom.lanes_per_approach;
      const Route r1 = Route::in_lane(a1, l1, geom.lane_decisions.at(l1 - 1), w);
      const Route r2 = Route::in_lane(a2, l2, geom.lane_decisions.at(l2 - 1), w);
      if (conflicts(r1, r2, table)) return false;
    }
  return true;
}

/// Sums per-lane queue lengths into the group weights.
inline void assign_weights(std::vector<LaneGroup>& groups, const std::map<std::pair<Approach, int>, double>& queues) {
  for (LaneGroup& g : groups) {
    g.weight = 0.0;
    for (const auto& lane : g.lanes)
      if (auto it = queues.find(lane); it != queues.end()) g.weight += it->second;
  }
}

/// Index of the heaviest group; ties go to the lowest index.
inline int lqf_select(std::span<const double> weights) {
  if (weights.empty()) throw ConfigError("no lane groups to choose from");
  int best = 0;
  for (int i = 1; i < static_cast<int>(weights.size()); ++i)
    if (weights[i] > weights[best]) best = i;
  return best;
}

inline int lqf_select(std::span<const LaneGroup> groups) {
  std::vector<double> w;
  for (const auto& g : groups) w.push_back(g.weight);
  return lqf_select(w);
}

}  // namespace pcoord
