#pragma once

#include <algorithm>
#include <optional>

#include "pcoord/error.hpp"
#include "pcoord/geometry.hpp"

namespace pcoord {

/// Leader state; position is measured from the schedule-zone entry.
struct VehicleState {
  double p = 0.0;
  double v = 0.0;
  double u = 0.0;
};

struct ControlBounds {
  double u_min = -3.0;
  double u_max = 3.0;
  double v_min = 0.0;
  double v_max = 18.0;  // route-resolved

  void validate() const {
    if (!(u_min < 0.0 && 0.0 < u_max)) throw ConfigError("control bounds must satisfy u_min < 0 < u_max");
    if (!(0.0 <= v_min && v_min < v_max)) throw ConfigError("speed bounds must satisfy 0 <= v_min < v_max");
  }

  ControlBounds with_vmax(double vmax) const {
    ControlBounds b = *this;
    b.v_max = vmax;
    return b;
  }
};

enum class PlatoonPhase { InScheduleZone, InMergingZone, Exited };

struct Platoon {
  int id = 0;
  int size = 1;
  Route route;
  double headway = 1.2;  // t_h
  VehicleState leader_state;
  double entry_time = 0.0;     // t0
  double initial_speed = 0.0;  // v0
  PlatoonPhase phase = PlatoonPhase::InScheduleZone;
  std::optional<double> assigned_entry;  // tm
  std::optional<double> exit_time;       // te

  void validate() const {
    if (size < 1) throw ConfigError("platoon size must be >= 1");
    if (!(headway > 0.0)) throw ConfigError("platoon headway must be > 0");
    if (initial_speed < 0.0) throw InfeasibleState("initial speed must be >= 0");
    if (assigned_entry && *assigned_entry < entry_time) throw InfeasibleSchedule("tm precedes t0");
    if (exit_time && assigned_entry && !(*exit_time > *assigned_entry))
      throw InfeasibleSchedule("te must follow tm");
  }

  /// Phases only move forward.
  void advance_to(PlatoonPhase next) {
    if (static_cast<int>(next) < static_cast<int>(phase))
      throw DomainError("platoon phase transitions are monotone");
    phase = next;
  }
};

/// Gap between consecutive members cruising at v with time headway t_h.
inline double space_headway(double v, double t_h) { return v * t_h; }

/// Extra time the tail needs to clear a point after the leader passes it.
inline double platoon_tail_clearance_time(int n, double t_h) {
  if (n < 1) throw ConfigError("platoon size must be >= 1");
  return (n - 1) * t_h;
}

/// Exact double-integrator update under constant control over dt.
inline VehicleState integrate(const VehicleState& s, double u, double dt) {
  return {s.p + s.v * dt + 0.5 * u * dt * dt, s.v + u * dt, u};
}

/// Earliest arrival over `distance` when accelerating at u_max up to v_max
/// and cruising from there on.
struct BestArrival {
  double duration = 0.0;        // t_a*
  double accel_duration = 0.0;  // t_s
  double accel_distance = 0.0;  // d_s
};

inline constexpr double kSpeedTolerance = 1e-9;

inline BestArrival best_arrival(double v0, double distance, double v_max, double u_max) {
  if (v0 < -kSpeedTolerance) throw InfeasibleState("speed must be >= 0");
  if (v0 > v_max + kSpeedTolerance) throw InfeasibleState("speed exceeds the route speed limit");
  if (!(u_max > 0.0)) throw ConfigError("u_max must be > 0");
  if (!(v_max > 0.0)) throw ConfigError("v_max must be > 0");
  BestArrival r;
  if (v0 >= v_max - kSpeedTolerance) {
    r.duration = distance / v_max;
    return r;
  }
  r.accel_duration = (v_max - v0) / u_max;
  r.accel_distance = (v_max * v_max - v0 * v0) / (2.0 * u_max);
  if (r.accel_distance > distance + 1e-9 * std::max(1.0, distance))
    throw AssumptionViolation("distance too short to reach the speed limit");
  r.duration = r.accel_duration + std::max(0.0, distance - r.accel_distance) / v_max;
  return r;
}

}  // namespace pcoord
