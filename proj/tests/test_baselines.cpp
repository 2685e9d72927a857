#include <gtest/gtest.h>

#include <random>

#include "pcoord/baselines.hpp"

using namespace pcoord;

namespace {
Job job(int id, Approach a, int lane, double v0, double t0) {
  const IntersectionGeometry g;
  Job j;
  j.id = id;
  j.route = Route::in_lane(a, lane, g.lane_decisions[lane - 1], g.lanes_per_approach);
  j.entry_time = t0;
  j.initial_speed = v0;
  j.speed = v0;
  return j;
}
}  // namespace

TEST(Fcfs, CompatiblePlatoonsUseTheirEarliestArrivals) {
  const SchedulerConfig cfg;
  std::vector<Job> jobs{job(1, Approach::North, 2, 18, 0.0), job(2, Approach::South, 2, 18, 1.0)};
  const Schedule s = fcfs_schedule(jobs, 1.0, cfg);
  EXPECT_NEAR(s.entry_times.at(1), 1.0 + 200.0 / 18.0, 1e-12);
  EXPECT_NEAR(s.entry_times.at(2), 1.0 + 200.0 / 18.0, 1e-12);
}

TEST(Fcfs, ConflictingPlatoonWaitsForTheExit) {
  const SchedulerConfig cfg;
  std::vector<Job> jobs{job(1, Approach::North, 2, 18, 0.0), job(2, Approach::East, 2, 18, 1.0)};
  const Schedule s = fcfs_schedule(jobs, 1.0, cfg);
  EXPECT_EQ(s.entry_times.at(2), s.exit_times.at(1));
  EXPECT_NEAR(s.exit_times.at(1) - s.entry_times.at(1), 50.0 / 18.0 + 1.0, 1e-12);
}

TEST(Fcfs, SerialModeBlocksCompatibleTraffic) {
  const SchedulerConfig cfg;
  std::vector<Job> jobs{job(1, Approach::North, 2, 18, 0.0), job(2, Approach::South, 2, 18, 1.0)};
  const Schedule s = fcfs_schedule(jobs, 1.0, cfg, {}, true);
  EXPECT_EQ(s.entry_times.at(2), s.exit_times.at(1));
}

TEST(Fcfs, CommittedOccupancyIsRespected) {
  const SchedulerConfig cfg;
  std::vector<Job> jobs{job(1, Approach::East, 2, 18, 0.0)};
  std::vector<Commitment> busy{{jobs[0].route, 50.0}};
  busy[0].route.approach = Approach::North;
  EXPECT_EQ(fcfs_schedule(jobs, 0.0, cfg, busy).entry_times.at(1), 50.0);
}

TEST(Fcfs, EntryOrderFollowsArrivalOrderForConflictingTraffic) {
  const SchedulerConfig cfg;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Job> jobs;
    for (int i = 0; i < 8; ++i) {
      // All on crossing through movements, so every pair conflicts.
      const Approach a = (rng() % 2) ? Approach::North : Approach::East;
      jobs.push_back(job(i, a, 2, 9.0 + static_cast<double>(rng() % 90) / 10.0, static_cast<double>(rng() % 40)));
    }
    const Schedule s = fcfs_schedule(jobs, 40.0, cfg);
    std::vector<const Job*> order;
    for (const Job& j : jobs) order.push_back(&j);
    std::stable_sort(order.begin(), order.end(), [](const Job* x, const Job* y) {
      return x->entry_time != y->entry_time ? x->entry_time < y->entry_time : x->id < y->id;
    });
    for (std::size_t k = 1; k < order.size(); ++k) {
      if (conflicts(order[k - 1]->route, order[k]->route, cfg.conflicts))
        EXPECT_GE(s.entry_times.at(order[k]->id), s.exit_times.at(order[k - 1]->id) - 1e-12);
      EXPECT_LE(s.entry_times.at(order[k - 1]->id), s.entry_times.at(order[k]->id) + 1e-12);
    }
  }
}

TEST(Fcfs, OptimalSequencingNeverHasLargerMaxLateness) {
  // The later arrival is fast and has the earlier deadline.
  SchedulerConfig cfg;
  cfg.lane_precedence = false;
  std::vector<Job> jobs{job(1, Approach::North, 2, 9.0, 0.0), job(2, Approach::East, 2, 18.0, 0.5)};
  const ScheduleResult oc = schedule_jobs(jobs, 0.5, cfg);
  const Schedule fcfs = fcfs_schedule(jobs, 0.5, cfg);
  auto lmax = [&](const std::map<int, double>& exits) {
    double worst = -1e300;
    for (const auto& [id, e] : exits) worst = std::max(worst, e - oc.timings.at(id).deadline);
    return worst;
  };
  EXPECT_LE(lmax(oc.schedule.exit_times), lmax(fcfs.exit_times) + 1e-9);
  EXPECT_LT(oc.schedule.entry_times.at(2), oc.schedule.entry_times.at(1));
}

TEST(Individualize, SingletonsAreUnchanged) {
  Platoon p;
  p.id = 3;
  const auto out = individualize(std::vector<Platoon>{p}, 100);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, 3);
}

TEST(Individualize, SplitsWithHeadwayOffsets) {
  Platoon p;
  p.id = 3;
  p.size = 4;
  p.entry_time = 10.0;
  p.headway = 1.2;
  Platoon q;
  q.id = 4;
  q.size = 2;
  const auto out = individualize(std::vector<Platoon>{p, q}, 100);
  ASSERT_EQ(out.size(), 6u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(out[i].size, 1);
    EXPECT_NEAR(out[i].entry_time, 10.0 + 1.2 * i, 1e-12);
    EXPECT_EQ(out[i].route, p.route);
  }
  std::set<int> ids;
  for (const auto& v : out) ids.insert(v.id);
  EXPECT_EQ(ids.size(), 6u);
}

TEST(Lqf, SelectsTheHeaviestGroup) {
  const std::vector<double> w{5, 3, 0, 7};
  EXPECT_EQ(lqf_select(w), 3);
  const std::vector<double> one{0, 0, 4, 0};
  EXPECT_EQ(lqf_select(one), 2);
  const std::vector<double> tie{2, 6, 6, 1};
  EXPECT_EQ(lqf_select(tie), 1);
  EXPECT_THROW(lqf_select(std::vector<double>{}), ConfigError);
}

TEST(Lqf, SelectionInvariantUnderScaling) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(4);
    for (double& x : w) x = static_cast<double>(rng() % 20);
    const int pick = lqf_select(w);
    for (double k : {0.5, 3.0, 17.0}) {
      std::vector<double> scaled = w;
      for (double& x : scaled) x *= k;
      EXPECT_EQ(lqf_select(scaled), pick);
    }
  }
}

TEST(Lqf, WeightsSumQueues) {
  const IntersectionGeometry g;
  auto groups = standard_lane_groups(g);
  assign_weights(groups, {{{Approach::North, 2}, 3.0}, {{Approach::South, 3}, 2.0}, {{Approach::East, 1}, 4.0}});
  EXPECT_EQ(groups[0].weight, 5.0);
  EXPECT_EQ(groups[1].weight, 0.0);
  EXPECT_EQ(groups[3].weight, 4.0);
  EXPECT_EQ(lqf_select(groups), 0);
}
