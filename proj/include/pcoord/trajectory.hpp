#pragma once

// Leader trajectories from the current state to the merging-zone entry:
// accelerate-then-cruise (earliest arrival), the affine-control cubic that
// minimizes 1/2 * integral of u^2, and a piecewise constant-acceleration
// family for delays the cubic cannot absorb within the bounds.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pcoord/error.hpp"
#include "pcoord/platoon.hpp"

namespace pcoord {

enum class TrajectoryKind { TimeOptimal, EnergyOptimal, StopWait };
enum class SegmentLaw { ConstantAccel, CubicPosition };

inline const char* kind_name(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::TimeOptimal: return "time_optimal";
    case TrajectoryKind::EnergyOptimal: return "energy_optimal";
    case TrajectoryKind::StopWait: return "stop_wait";
  }
  return "?";
}

/// One piece of the position law, written in local time tau = t - t_begin:
///   p = jerk*tau^3/6 + accel*tau^2/2 + v0*tau + p0.
/// ConstantAccel pieces have jerk == 0.
struct Segment {
  double t_begin = 0.0;
  double t_end = 0.0;
  SegmentLaw law = SegmentLaw::ConstantAccel;
  double jerk = 0.0;
  double accel = 0.0;
  double v0 = 0.0;
  double p0 = 0.0;

  static Segment constant(double t_begin, double t_end, double u, double v0, double p0) {
    return {t_begin, t_end, SegmentLaw::ConstantAccel, 0.0, u, v0, p0};
  }

  VehicleState at(double t) const {
    const double tau = t - t_begin;
    return {((jerk * tau / 6.0 + accel / 2.0) * tau + v0) * tau + p0, (jerk * tau / 2.0 + accel) * tau + v0,
            jerk * tau + accel};
  }

  double duration() const { return t_end - t_begin; }
};

struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::TimeOptimal;
  std::vector<Segment> segments;
  double t_start = 0.0;
  double t_end = 0.0;
};

inline constexpr double kMinSegment = 1e-12;
inline constexpr double kDomainTolerance = 1e-9;

inline VehicleState evaluate(const Trajectory& traj, double t) {
  if (traj.segments.empty() || t < traj.t_start - kDomainTolerance || t > traj.t_end + kDomainTolerance)
    throw DomainError("time outside the trajectory domain");
  // Last segment whose start is <= t.
  auto it = std::upper_bound(traj.segments.begin(), traj.segments.end(), t,
                             [](double x, const Segment& s) { return x < s.t_begin; });
  if (it != traj.segments.begin()) --it;
  return it->at(t);
}

namespace detail {

inline void push_segment(std::vector<Segment>& out, double duration, double u, double t, double v, double p) {
  if (duration > kMinSegment) out.push_back(Segment::constant(t, t + duration, u, v, p));
}

inline Trajectory close(TrajectoryKind kind, std::vector<Segment> segs, double t_start, double t_end) {
  Trajectory tr;
  tr.kind = kind;
  tr.segments = std::move(segs);
  tr.t_start = t_start;
  tr.t_end = t_end;
  if (!tr.segments.empty()) tr.segments.back().t_end = t_end;
  return tr;
}

}  // namespace detail

/// Earliest arrival at `target` (S for a platoon entering the zone): full
/// acceleration up to v_max, then cruise.
inline Trajectory time_optimal(double v0, double t0, double target, double v_max, double u_max, double p0 = 0.0) {
  const double distance = target - p0;
  if (distance < 0.0) throw DomainError("start position beyond the target");
  const BestArrival best = best_arrival(v0, distance, v_max, u_max);
  std::vector<Segment> segs;
  double t = t0;
  if (best.accel_duration > 0.0) {
    detail::push_segment(segs, best.accel_duration, u_max, t, v0, p0);
    t += best.accel_duration;
  }
  const double cruise = best.duration - best.accel_duration;
  const double p_switch = p0 + best.accel_distance;
  if (cruise > kMinSegment || segs.empty())
    segs.push_back(Segment::constant(t, t0 + best.duration, 0.0, best.accel_duration > 0.0 ? v_max : v0, p_switch));
  return detail::close(TrajectoryKind::TimeOptimal, std::move(segs), t0, t0 + best.duration);
}

/// The affine-control cubic meeting (p0, v0) at t0 and (target, v_target) at
/// tm, without any bound check.
inline Segment solve_cubic(double t0, double tm, double v0, double target, double v_target, double p0 = 0.0) {
  const double T = tm - t0;
  if (!(T > 0.0)) throw InfeasibleSchedule("entry time must follow the start time");
  const double X = target - p0 - v0 * T;
  const double Y = v_target - v0;
  Segment s;
  s.t_begin = t0;
  s.t_end = tm;
  s.law = SegmentLaw::CubicPosition;
  s.jerk = 6.0 * Y / (T * T) - 12.0 * X / (T * T * T);
  s.accel = 6.0 * X / (T * T) - 2.0 * Y / T;
  s.v0 = v0;
  s.p0 = p0;
  return s;
}

/// 1/2 * integral of u^2 over the trajectory.
inline double control_effort(const Trajectory& traj) {
  double total = 0.0;
  for (const Segment& s : traj.segments) {
    const double T = s.duration();
    const double a = s.jerk, b = s.accel;
    total += 0.5 * (a * a * T * T * T / 3.0 + a * b * T * T + b * b * T);
  }
  return total;
}

enum class BoundKind { Speed, Control };

struct Violation {
  double time = 0.0;
  BoundKind bound = BoundKind::Speed;
  double value = 0.0;
};

struct FeasibilityReport {
  bool feasible = true;
  std::optional<Violation> first;  // earliest violation in time
};

/// Analytic bound check: u is affine on every piece, so its extremes sit at
/// the endpoints; v is quadratic, so the vertex is checked too.
inline FeasibilityReport feasibility_check(const Trajectory& traj, const ControlBounds& bounds, double tol = 1e-9) {
  FeasibilityReport report;
  auto note = [&](double t, BoundKind kind, double value) {
    if (!report.first || t < report.first->time) report.first = Violation{t, kind, value};
    report.feasible = false;
  };
  auto check_u = [&](double t, double u) {
    if (u < bounds.u_min - tol || u > bounds.u_max + tol) note(t, BoundKind::Control, u);
  };
  auto check_v = [&](double t, double v) {
    if (v < bounds.v_min - tol || v > bounds.v_max + tol) note(t, BoundKind::Speed, v);
  };
  for (const Segment& s : traj.segments) {
    const VehicleState a = s.at(s.t_begin);
    const VehicleState b = s.at(s.t_end);
    check_u(s.t_begin, a.u);
    check_u(s.t_end, b.u);
    check_v(s.t_begin, a.v);
    check_v(s.t_end, b.v);
    if (s.jerk != 0.0) {
      const double tau = -s.accel / s.jerk;
      if (tau > 0.0 && tau < s.duration()) check_v(s.t_begin + tau, s.at(s.t_begin + tau).v);
    }
  }
  return report;
}

/// Delayed arrival with constant-acceleration pieces only (v_target >= v0).
/// Short delays cruise at v0 and accelerate late; longer ones dip to a lower
/// speed before the final acceleration; beyond that the platoon brakes to a
/// stop at the hold point target - v_target^2/(2 u_max), waits, and
/// accelerates to v_target exactly at the target.
inline Trajectory stop_wait_fallback(double t0, double tm, double v0, double target, double v_target,
                                     const ControlBounds& bounds, double p0 = 0.0) {
  const double a = bounds.u_max;
  const double b = -bounds.u_min;
  const double R = target - p0;
  const double T = tm - t0;
  if (v0 < -kSpeedTolerance) throw InfeasibleState("speed must be >= 0");
  v0 = std::max(0.0, v0);
  if (v0 > v_target + kSpeedTolerance) throw InfeasibleState("fallback needs v0 <= v_target");
  v0 = std::min(v0, v_target);
  const BestArrival best = best_arrival(v0, R, v_target, a);
  if (T < best.duration - 1e-9) throw InfeasibleSchedule("entry time earlier than the earliest arrival");

  if (T <= best.duration + kMinSegment) {
    Trajectory tr = time_optimal(v0, t0, target, v_target, a, p0);
    tr.kind = TrajectoryKind::StopWait;
    return tr;
  }

  const double t_acc = best.accel_duration;
  const double d_acc = best.accel_distance;
  const double k = 1.0 / (2.0 * a) + 1.0 / (2.0 * b);
  const double stop_distance = v0 * v0 / (2.0 * b) + v_target * v_target / (2.0 * a);
  const bool can_dip = v0 > 0.0 && R >= stop_distance - 1e-9;
  const double C = can_dip ? (R - stop_distance) / v0 + v0 / b + v_target / a : 0.0;
  double T_A = std::numeric_limits<double>::infinity();
  if (v0 > 0.0) T_A = (v_target - v0 > kMinSegment) ? (R - d_acc) / v0 + t_acc : best.duration;

  std::vector<Segment> segs;
  double t = t0, p = p0;
  auto piece = [&](double dur, double u, double v) {
    detail::push_segment(segs, dur, u, t, v, p);
    t += dur;
    p += v * dur + 0.5 * u * dur * dur;
  };

  if (T <= T_A && v_target - v0 > kMinSegment) {
    // Cruise at v0, accelerate, cruise at v_target.
    const double c = std::max(0.0, (v_target * (T - t_acc) - (R - d_acc)) / (v_target - v0));
    piece(c, 0.0, v0);
    piece(t_acc, a, v0);
    piece(std::max(0.0, T - c - t_acc), 0.0, v_target);
  } else {
    if (!can_dip) throw InfeasibleSchedule("no room to brake and reaccelerate before the merging zone");
    if (T <= C) {
      const double x = std::sqrt(std::max(0.0, v0 * v0 + v0 * (T - C) / k));
      const double v_low = std::max(0.0, v0 - x);
      const double brake = x / b;
      const double accel = (v_target - v_low) / a;
      const double c = std::max(0.0, T - brake - accel);
      piece(c, 0.0, v0);
      piece(brake, -b, v0);
      piece(accel, a, v_low);
    } else {
      const double c = (R - stop_distance) / v0;
      piece(c, 0.0, v0);
      piece(v0 / b, -b, v0);
      piece(T - C, 0.0, 0.0);
      piece(v_target / a, a, 0.0);
    }
  }
  if (segs.empty()) segs.push_back(Segment::constant(t0, tm, 0.0, v0, p0));
  return detail::close(TrajectoryKind::StopWait, std::move(segs), t0, tm);
}

/// Energy-optimal arrival at tm with speed v_target; falls back to
/// stop_wait_fallback when the cubic leaves the speed or control bounds.
inline Trajectory energy_optimal(double t0, double tm, double v0, double target, double v_target,
                                 const ControlBounds& bounds, double p0 = 0.0) {
  const BestArrival best = best_arrival(std::max(0.0, v0), target - p0, bounds.v_max, bounds.u_max);
  if (tm - t0 < best.duration - 1e-9) throw InfeasibleSchedule("entry time earlier than the earliest arrival");
  Trajectory cubic = detail::close(TrajectoryKind::EnergyOptimal, {solve_cubic(t0, tm, v0, target, v_target, p0)},
                                   t0, tm);
  if (feasibility_check(cubic, bounds).feasible) return cubic;
  return stop_wait_fallback(t0, tm, v0, target, v_target, bounds, p0);
}

/// Plan from the current leader state to an assigned entry time: earliest
/// arrival when tm equals it, otherwise the energy-optimal cubic if it stays
/// within bounds, otherwise the fallback family. `bounds.v_max` is the route
/// limit and the terminal speed.
inline Trajectory plan_arrival(double now, const VehicleState& state, double target, double tm,
                               const ControlBounds& bounds, double same_time_tol = 1e-9) {
  const double v = std::clamp(state.v, 0.0, bounds.v_max);
  const BestArrival best = best_arrival(v, std::max(0.0, target - state.p), bounds.v_max, bounds.u_max);
  const double earliest = now + best.duration;
  if (tm < earliest - same_time_tol) throw InfeasibleSchedule("entry time earlier than the earliest arrival");
  if (tm <= earliest + same_time_tol) return time_optimal(v, now, target, bounds.v_max, bounds.u_max, state.p);
  return energy_optimal(now, tm, v, target, bounds.v_max, bounds, state.p);
}

/// Keeps `past` up to time t and continues with `next` (which starts at t).
inline Trajectory splice(const Trajectory& past, double t, const Trajectory& next) {
  Trajectory out;
  out.kind = next.kind;
  out.t_start = std::min(past.t_start, t);
  out.t_end = next.t_end;
  for (Segment s : past.segments) {
    if (s.t_begin >= t - kMinSegment) break;
    s.t_end = std::min(s.t_end, t);
    out.segments.push_back(s);
  }
  out.segments.insert(out.segments.end(), next.segments.begin(), next.segments.end());
  return out;
}

struct TrajectorySample {
  double t = 0.0;
  VehicleState state;
};

/// Samples at t_start, t_start + dt, ... and always includes t_end.
inline std::vector<TrajectorySample> sample(const Trajectory& traj, double dt) {
  if (!(dt > 0.0)) throw ConfigError("sampling step must be > 0");
  std::vector<TrajectorySample> out;
  const double span = traj.t_end - traj.t_start;
  const auto n = static_cast<long>(std::floor(span / dt + 1e-9));
  for (long i = 0; i <= n; ++i) {
    const double t = traj.t_start + static_cast<double>(i) * dt;
    out.push_back({t, evaluate(traj, std::min(t, traj.t_end))});
  }
  if (out.back().t < traj.t_end - 1e-9) out.push_back({traj.t_end, evaluate(traj, traj.t_end)});
  return out;
}

inline std::string to_csv(const std::vector<TrajectorySample>& samples) {
  std::string out = "t,p,v,u\n";
  char buf[128];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%.6f,%.9f,%.9f,%.9f\n", s.t, s.state.p, s.state.v, s.state.u);
    out += buf;
  }
  return out;
}

}  // namespace pcoord
