#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "pcoord/scheduler.hpp"

using namespace pcoord;

namespace {

Platoon make_platoon(int id, Approach a, int lane, double v0, int size = 1, double t0 = 0.0) {
  const IntersectionGeometry g;
  Platoon p;
  p.id = id;
  p.size = size;
  p.route = Route::in_lane(a, lane, g.lane_decisions[lane - 1], g.lanes_per_approach);
  p.initial_speed = v0;
  p.leader_state.v = v0;
  p.entry_time = t0;
  return p;
}

ScheduleEntry entry(int id, double deadline, double passing = 10.0, double crossing = 4.0, double t0 = 0.0) {
  ScheduleEntry e;
  e.id = id;
  e.entry_time = t0;
  e.timing.deadline = deadline;
  e.timing.passing_time = passing;
  e.timing.crossing_time = crossing;
  e.timing.arrival_time_min = passing - crossing;
  return e;
}

}  // namespace

TEST(PlatoonModel, SpaceHeadway) {
  EXPECT_DOUBLE_EQ(space_headway(10, 1.2), 12.0);
  EXPECT_DOUBLE_EQ(space_headway(0, 1.2), 0.0);
  EXPECT_DOUBLE_EQ(space_headway(18, 1.0), 18.0);
}

TEST(PlatoonModel, TailClearance) {
  EXPECT_DOUBLE_EQ(platoon_tail_clearance_time(1, 1.2), 0.0);
  EXPECT_NEAR(platoon_tail_clearance_time(4, 1.2), 3.6, 1e-12);
  EXPECT_DOUBLE_EQ(platoon_tail_clearance_time(5, 1.0), 4.0);
  EXPECT_THROW(platoon_tail_clearance_time(0, 1.2), ConfigError);
}

TEST(PlatoonModel, PhasesOnlyMoveForward) {
  Platoon p = make_platoon(1, Approach::North, 2, 10);
  p.advance_to(PlatoonPhase::InMergingZone);
  p.advance_to(PlatoonPhase::Exited);
  EXPECT_THROW(p.advance_to(PlatoonPhase::InScheduleZone), DomainError);
}

TEST(PlatoonModel, ValidateCatchesInconsistentTimes) {
  Platoon p = make_platoon(1, Approach::North, 2, 10, 1, 5.0);
  p.assigned_entry = 4.0;
  EXPECT_THROW(p.validate(), InfeasibleSchedule);
  p.assigned_entry = 20.0;
  p.exit_time = 19.0;
  EXPECT_THROW(p.validate(), InfeasibleSchedule);
  p.exit_time = 24.0;
  EXPECT_NO_THROW(p.validate());
}

TEST(PlatoonModel, ExactIntegrationMatchesClosedForm) {
  VehicleState s{0.0, 10.0, 0.0};
  for (int k = 0; k < 30; ++k) s = integrate(s, 2.0, 0.1);
  EXPECT_NEAR(s.v, 16.0, 1e-12);
  EXPECT_NEAR(s.p, 10.0 * 3.0 + 0.5 * 2.0 * 9.0, 1e-10);
}

TEST(PassingTime, CruiseAtSpeedLimit) {
  const IntersectionGeometry g;
  const PlatoonTiming t = compute_passing_time(make_platoon(1, Approach::North, 2, 18), g, ControlBounds{});
  EXPECT_NEAR(t.arrival_time_min, 200.0 / 18.0, 1e-12);
  EXPECT_NEAR(t.crossing_time, 50.0 / 18.0 + 1.0, 1e-12);
  EXPECT_NEAR(t.passing_time, 14.888888888889, 1e-9);
  EXPECT_EQ(t.accel_duration, 0.0);
}

TEST(PassingTime, AccelerateThenCruise) {
  const IntersectionGeometry g;
  const PlatoonTiming t = compute_passing_time(make_platoon(1, Approach::North, 2, 10), g, ControlBounds{});
  EXPECT_NEAR(t.accel_duration, 8.0 / 3.0, 1e-12);
  EXPECT_NEAR(t.accel_distance, 224.0 / 6.0, 1e-12);
  EXPECT_NEAR(t.arrival_time_min, 8.0 / 3.0 + (200.0 - 224.0 / 6.0) / 18.0, 1e-12);
  EXPECT_NEAR(t.arrival_time_min, 11.704, 5e-4);
}

TEST(PassingTime, CrossingGrowsWithPlatoonSize) {
  const IntersectionGeometry g;
  const PlatoonTiming t = compute_passing_time(make_platoon(1, Approach::East, 2, 18, 4), g, ControlBounds{});
  EXPECT_NEAR(t.crossing_time, 50.0 / 18.0 + 3.6 + 1.0, 1e-12);
}

TEST(PassingTime, RejectsSpeedAboveLimitAndShortZone) {
  IntersectionGeometry g;
  EXPECT_THROW(compute_passing_time(make_platoon(1, Approach::North, 1, 12), g, ControlBounds{}), InfeasibleState);
  g.schedule_zone_length = 20.0;
  EXPECT_THROW(compute_passing_time(make_platoon(1, Approach::North, 2, 0), g, ControlBounds{}), AssumptionViolation);
}

TEST(Deadline, HandValues) {
  const IntersectionGeometry g;
  const Platoon p = make_platoon(1, Approach::North, 2, 10);
  const PlatoonTiming t = compute_deadline(p, compute_passing_time(p, g, ControlBounds{}), g);
  EXPECT_NEAR(t.cruise_arrival, 20.0, 1e-12);
  EXPECT_NEAR(t.deadline, 23.777777777778, 1e-9);

  PlatoonTiming four;
  four.crossing_time = 4.0;
  EXPECT_NEAR(compute_deadline(make_platoon(2, Approach::North, 2, 5), four, g).deadline, 44.0, 1e-12);
}

TEST(Deadline, ZeroSlackAtTheSpeedLimit) {
  const IntersectionGeometry g;
  const Platoon p = make_platoon(1, Approach::South, 2, 18);
  const PlatoonTiming t = compute_deadline(p, compute_passing_time(p, g, ControlBounds{}), g);
  EXPECT_NEAR(t.deadline, t.passing_time, 1e-12);
}

TEST(Deadline, CrawlFloorKeepsStoppedPlatoonsFinite) {
  const IntersectionGeometry g;
  const Platoon p = make_platoon(1, Approach::South, 2, 0);
  const PlatoonTiming t = compute_deadline(p, compute_passing_time(p, g, ControlBounds{}), g);
  EXPECT_NEAR(t.cruise_arrival, 400.0, 1e-9);
  EXPECT_THROW(compute_deadline(p, t, g, 0.0), InfeasibleState);
}

TEST(Lateness, Definition) {
  EXPECT_EQ(lateness(23.778, 23.778), 0.0);
  EXPECT_EQ(lateness(30, 20), 10.0);
  EXPECT_EQ(lateness(18, 20), -2.0);
}

// --- grouping ---

TEST(BuildGroups, TriangleEdgePairAndIsolatedPlatoons) {
  // (a) triangle p, q, r.
  {
    std::vector<ScheduleEntry> e{entry(1, 20), entry(2, 21), entry(3, 22)};
    CompatibilityGraph g({1, 2, 3});
    g.connect(0, 1);
    g.connect(1, 2);
    g.connect(0, 2);
    const auto groups = build_groups(e, g);
    ASSERT_EQ(groups.size(), 1u);
    EXPECT_EQ(groups[0].members, (std::vector<int>{1, 2, 3}));
  }
  // (b) edges {p, q} and {r, s}.
  {
    std::vector<ScheduleEntry> e{entry(1, 20), entry(2, 21), entry(3, 22), entry(4, 23)};
    CompatibilityGraph g({1, 2, 3, 4});
    g.connect(0, 1);
    g.connect(2, 3);
    EXPECT_EQ(build_groups(e, g).size(), 2u);
  }
  // (c) three isolated platoons.
  {
    std::vector<ScheduleEntry> e{entry(1, 20), entry(2, 21), entry(4, 22)};
    EXPECT_EQ(build_groups(e, CompatibilityGraph({1, 2, 4})).size(), 3u);
  }
  EXPECT_TRUE(build_groups({}, CompatibilityGraph{}).empty());
}

TEST(BuildGroups, GroupTimingsAreMemberMaxima) {
  std::vector<ScheduleEntry> e{entry(5, 30, 12, 5, 2.0), entry(7, 25, 15, 3, 1.0)};
  CompatibilityGraph g({5, 7});
  g.connect(0, 1);
  const auto groups = build_groups(e, g);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].deadline, 30.0);
  EXPECT_EQ(groups[0].passing, 15.0);
  EXPECT_EQ(groups[0].crossing, 5.0);
  EXPECT_EQ(groups[0].earliest_entry, 1.0);
  EXPECT_EQ(groups[0].min_id, 5);
}

TEST(BuildGroups, OverlappingCliquesFormAPartition) {
  // Path 1-2-3: cliques {1,2} and {2,3} overlap. The larger-first rule ties,
  // so the earlier group deadline wins.
  std::vector<ScheduleEntry> e{entry(1, 50), entry(2, 10), entry(3, 12)};
  CompatibilityGraph g({1, 2, 3});
  g.connect(0, 1);
  g.connect(1, 2);
  const auto groups = build_groups(e, g);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].members, (std::vector<int>{2, 3}));
  EXPECT_EQ(groups[1].members, (std::vector<int>{1}));
}

TEST(BuildGroups, PartitionCoversEveryPlatoonOnce) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<ScheduleEntry> e;
    std::vector<int> ids;
    for (int i = 0; i < n; ++i) {
      e.push_back(entry(100 + i, static_cast<double>(rng() % 50)));
      ids.push_back(100 + i);
    }
    CompatibilityGraph g(ids);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng() % 2) g.connect(i, j);
    std::vector<int> seen;
    for (const Group& grp : build_groups(e, g)) {
      std::vector<int> verts;
      for (int id : grp.members) verts.push_back(id - 100);
      EXPECT_TRUE(g.is_clique(verts));
      seen.insert(seen.end(), grp.members.begin(), grp.members.end());
    }
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(seen, ids);
  }
}

TEST(BuildGroups, ClassGraphGivesTheSamePartition) {
  // Platoons in the same class pairwise conflict; classes decide the rest.
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int classes = 1 + static_cast<int>(rng() % 6);
    std::vector<int> class_ids(classes);
    for (int c = 0; c < classes; ++c) class_ids[c] = c;
    CompatibilityGraph cg(class_ids);
    for (int a = 0; a < classes; ++a)
      for (int b = a + 1; b < classes; ++b)
        if (rng() % 3) cg.connect(a, b);
    const int n = 1 + static_cast<int>(rng() % 10);
    std::vector<ScheduleEntry> e;
    std::vector<int> class_of, ids;
    for (int i = 0; i < n; ++i) {
      e.push_back(entry(i, static_cast<double>(rng() % 1000) / 7.0));
      class_of.push_back(static_cast<int>(rng() % classes));
      ids.push_back(i);
    }
    CompatibilityGraph pg(ids);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (class_of[i] != class_of[j] && cg.adjacent(class_of[i], class_of[j])) pg.connect(i, j);
    const auto a = build_groups(e, pg);
    const auto b = build_groups_by_class(e, class_of, cg);
    ASSERT_EQ(a.size(), b.size()) << "trial " << trial;
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].members, b[k].members) << "trial " << trial;
  }
}

TEST(BuildGroups, GraphMustMatchEntries) {
  std::vector<ScheduleEntry> e{entry(1, 20)};
  EXPECT_THROW(build_groups(e, CompatibilityGraph({1, 2})), ConfigError);
  EXPECT_THROW(build_groups(e, CompatibilityGraph({9})), ConfigError);
}

// --- sequencing ---

namespace {
Group single(int id, double deadline, double earliest = 0.0) {
  Group g;
  g.members = {id};
  g.min_id = id;
  g.deadline = deadline;
  g.earliest_entry = earliest;
  return g;
}
}  // namespace

TEST(Edd, OrdersByDeadline) {
  const auto seq = edd_sequence({single(1, 30), single(2, 20)});
  EXPECT_EQ(seq[0].min_id, 2);
  EXPECT_EQ(seq[1].min_id, 1);
}

TEST(Edd, TiesKeepArrivalOrder) {
  const auto seq = edd_sequence({single(4, 20, 3.0), single(2, 20, 1.0), single(3, 20, 1.0)});
  EXPECT_EQ(seq[0].min_id, 2);
  EXPECT_EQ(seq[1].min_id, 3);
  EXPECT_EQ(seq[2].min_id, 4);
}

// Entries chained back to back with the passing time as the processing
// time: completion of the k-th group is now + p_1 + ... + p_k.
TEST(Edd, MatchesPermutationOptimumForMaxLateness) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> p_dist(5.0, 30.0), slack(0.0, 60.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    const double now = 100.0;
    std::vector<double> p(n), d(n);
    std::vector<Group> groups;
    std::map<int, EntryRequest> req;
    for (int i = 0; i < n; ++i) {
      p[i] = p_dist(rng);
      d[i] = now + p[i] + slack(rng);
      groups.push_back(single(i, d[i]));
      req[i] = {now, p[i], -std::numeric_limits<double>::infinity()};
    }
    const Schedule s = assign_entry_times(edd_sequence(groups), req);
    double lmax = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) lmax = std::max(lmax, lateness(s.exit_times.at(i), d[i]));
    EXPECT_NEAR(lmax, oracle::min_max_lateness(p, d, now), 1e-9) << "trial " << trial;
  }
}

TEST(Precedence, FollowerNeverOvertakes) {
  // Platoon 2 follows 1 in its lane but has the earlier deadline.
  std::vector<ScheduleEntry> e{entry(1, 40), entry(2, 20), entry(3, 30)};
  const EntryIndex idx = index_entries(e);
  const auto seq = sequence_with_precedence({single(1, 40), single(2, 20), single(3, 30)}, {{2, 1}}, idx);
  std::vector<int> order;
  for (const Group& g : seq) order.push_back(g.min_id);
  EXPECT_EQ(order, (std::vector<int>{3, 1, 2}));
}

TEST(Precedence, BlockedMembersAreSplitOff) {
  std::vector<ScheduleEntry> e{entry(1, 40), entry(2, 20), entry(3, 20)};
  const EntryIndex idx = index_entries(e);
  Group both = aggregate_group({2, 3}, idx);
  const auto seq = sequence_with_precedence({both, single(1, 40)}, {{2, 1}}, idx);
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq[0].members, (std::vector<int>{3}));
  EXPECT_EQ(seq[1].members, (std::vector<int>{1}));
  EXPECT_EQ(seq[2].members, (std::vector<int>{2}));
}

TEST(Precedence, CycleIsReported) {
  std::vector<ScheduleEntry> e{entry(1, 40), entry(2, 20)};
  EXPECT_THROW(sequence_with_precedence({single(1, 40), single(2, 20)}, {{1, 2}, {2, 1}}, index_entries(e)),
               InfeasibleSchedule);
}

// --- entry times ---

TEST(EntryTimes, SingleGroupIdleZone) {
  Group g = single(1, 50);
  std::map<int, PlatoonTiming> t;
  t[1].arrival_time_min = 11.1;
  t[1].crossing_time = 3.8;
  const Schedule s = assign_entry_times({g}, 100.0, t, 0.0);
  EXPECT_NEAR(s.entry_times.at(1), 111.1, 1e-12);
  EXPECT_NEAR(s.exit_times.at(1), 114.9, 1e-12);
  EXPECT_NEAR(s.completion_time, 114.9, 1e-12);
}

TEST(EntryTimes, SingleGroupBusyZone) {
  std::map<int, PlatoonTiming> t;
  t[1].arrival_time_min = 11.1;
  t[1].crossing_time = 3.8;
  const Schedule s = assign_entry_times({single(1, 50)}, 100.0, t, 130.0);
  EXPECT_EQ(s.entry_times.at(1), 130.0);
  EXPECT_NEAR(s.exit_times.at(1), 133.8, 1e-12);
}

TEST(EntryTimes, GroupsChainOnPredecessorExit) {
  std::vector<ScheduleEntry> e{entry(1, 20, 10, 4), entry(2, 20, 12, 5), entry(3, 30, 8, 3), entry(4, 40, 9, 6)};
  const EntryIndex idx = index_entries(e);
  const std::vector<Group> seq{aggregate_group({1, 2}, idx), aggregate_group({3}, idx), aggregate_group({4}, idx)};
  std::map<int, PlatoonTiming> t;
  for (const auto& x : e) t[x.id] = x.timing;
  const Schedule s = assign_entry_times(seq, 0.0, t, 0.0);
  EXPECT_EQ(s.group_exit[0], 12.0);  // member 2: 7 + 5
  EXPECT_EQ(s.entry_times.at(3), s.group_exit[0]);
  EXPECT_EQ(s.group_exit[1], 15.0);
  EXPECT_EQ(s.entry_times.at(4), s.group_exit[1]);
  EXPECT_EQ(s.completion_time, 21.0);
}

TEST(EntryTimes, ConflictChainingOnlyWaitsForConflicts) {
  const IntersectionGeometry geo;
  auto lane_route = [&](Approach a, int lane) {
    return Route::in_lane(a, lane, geo.lane_decisions[lane - 1], geo.lanes_per_approach);
  };
  std::map<int, Route> routes{{1, lane_route(Approach::North, 2)},
                              {2, lane_route(Approach::South, 2)},
                              {3, lane_route(Approach::East, 2)}};
  std::map<int, EntryRequest> req{{1, {10, 5, -1e300}}, {2, {10, 5, -1e300}}, {3, {10, 5, -1e300}}};
  const std::vector<Group> seq{single(1, 20), single(2, 21), single(3, 22)};
  const auto table = MovementConflictTable::standard_four_leg();
  const Schedule s = assign_entry_times_by_conflict(seq, req, routes, table);
  EXPECT_EQ(s.entry_times.at(2), 10.0);  // opposing through traffic shares the zone
  EXPECT_EQ(s.entry_times.at(3), 15.0);
  const Schedule g = assign_entry_times(seq, req);
  EXPECT_EQ(g.entry_times.at(2), 15.0);
  EXPECT_EQ(g.entry_times.at(3), 20.0);
}

// --- full recomputation ---

namespace {
Job job(int id, Approach a, int lane, double v0, double t0 = 0.0, int size = 1) {
  const IntersectionGeometry g;
  Job j;
  j.id = id;
  j.route = Route::in_lane(a, lane, g.lane_decisions[lane - 1], g.lanes_per_approach);
  j.entry_time = t0;
  j.initial_speed = v0;
  j.speed = v0;
  j.size = size;
  return j;
}
}  // namespace

TEST(Reschedule, LoneArrivalIsTheSingleGroupCase) {
  const SchedulerConfig cfg;
  const Platoon p = make_platoon(1, Approach::North, 2, 10, 2, 50.0);
  const ScheduleResult r = reschedule_on_arrival({}, p, -1e300, 50.0, cfg);
  const PlatoonTiming t = compute_passing_time(p, cfg.geometry, cfg.bounds);
  EXPECT_NEAR(r.schedule.entry_times.at(1), 50.0 + t.arrival_time_min, 1e-12);
  EXPECT_NEAR(r.schedule.exit_times.at(1), 50.0 + t.passing_time, 1e-12);
}

TEST(Reschedule, ConflictingArrivalWaitsForCommittedExit) {
  const SchedulerConfig cfg;
  const Platoon p = make_platoon(1, Approach::East, 2, 18, 1, 0.0);
  const ScheduleResult r = reschedule_on_arrival({}, p, 40.0, 0.0, cfg);
  EXPECT_GE(r.schedule.entry_times.at(1), 40.0);
}

TEST(Reschedule, CompatibleArrivalJoinsTheFirstGroup) {
  const SchedulerConfig cfg;
  const Platoon a = make_platoon(1, Approach::North, 2, 18, 1, 0.0);
  const Platoon b = make_platoon(2, Approach::South, 2, 18, 1, 0.0);
  const ScheduleResult r = reschedule_on_arrival(std::vector<Platoon>{a}, b, -1e300, 0.0, cfg);
  ASSERT_EQ(r.schedule.ordered_groups.size(), 1u);
  EXPECT_EQ(r.schedule.entry_times.at(1), r.schedule.entry_times.at(2));
}

TEST(Reschedule, DeadlinesAreAbsoluteAndStable) {
  const SchedulerConfig cfg;
  std::vector<Job> jobs{job(1, Approach::North, 2, 10, 3.0), job(2, Approach::East, 2, 12, 5.0)};
  const ScheduleResult first = schedule_jobs(jobs, 5.0, cfg);
  // Later recomputation from the leaders' current states keeps the deadlines.
  jobs[0].position = 40.0;
  jobs[0].speed = 14.0;
  const ScheduleResult later = schedule_jobs(jobs, 8.0, cfg);
  EXPECT_EQ(first.timings.at(1).deadline, later.timings.at(1).deadline);
  EXPECT_NEAR(first.timings.at(1).deadline, 3.0 + 20.0 + 50.0 / 18.0 + 1.0, 1e-12);
}

TEST(Reschedule, LanePrecedenceTightensLeaderDeadline) {
  const SchedulerConfig cfg;
  std::vector<Job> jobs{job(1, Approach::North, 2, 9, 0.0), job(2, Approach::North, 2, 18, 2.0)};
  const ScheduleResult r = schedule_jobs(jobs, 2.0, cfg);
  EXPECT_LE(r.effective_deadline.at(1), r.timings.at(2).deadline - r.timings.at(2).crossing_time + 1e-12);
  EXPECT_LT(r.schedule.entry_times.at(1), r.schedule.entry_times.at(2));
}

TEST(Reschedule, ScheduleNeverAssignsEntriesBeforeEarliestArrival) {
  const SchedulerConfig cfg;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Job> jobs;
    const int n = 1 + static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i) {
      const auto a = kApproaches[rng() % 4];
      const int lane = 1 + static_cast<int>(rng() % 3);
      const double vmax = route_vmax(Route::in_lane(a, lane, cfg.geometry.lane_decisions[lane - 1], 3), cfg.geometry);
      jobs.push_back(job(i, a, lane, vmax * (0.5 + 0.5 * unit(rng)), i * 1.5));
    }
    const ScheduleResult r = schedule_jobs(jobs, n * 1.5, cfg);
    for (const Job& j : jobs)
      EXPECT_GE(r.schedule.entry_times.at(j.id), n * 1.5 + r.timings.at(j.id).arrival_time_min - 1e-9);
  }
}

TEST(FormatSchedule, OneLinePerPlatoon) {
  const SchedulerConfig cfg;
  std::vector<Job> jobs{job(1, Approach::North, 2, 18), job(2, Approach::East, 2, 18)};
  const ScheduleResult r = schedule_jobs(jobs, 0.0, cfg);
  const std::string text = format_schedule(r, {{1, 0.0}, {2, 0.0}});
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_EQ(text.rfind("1 0.000000", 0), 0u);
}
