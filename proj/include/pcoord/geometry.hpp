#pragma once

// Intersection layout, in-zone path lengths, movement speed limits and the
// movement conflict relation of a four-leg intersection (right-hand traffic).

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcoord/error.hpp"

namespace pcoord {

enum class Approach { North = 0, East = 1, South = 2, West = 3 };
enum class Decision { Straight = 0, Left = 1, Right = 2 };

inline constexpr std::array<Approach, 4> kApproaches{Approach::North, Approach::East, Approach::South,
                                                     Approach::West};
inline constexpr std::array<Decision, 3> kDecisions{Decision::Straight, Decision::Left, Decision::Right};

inline char approach_code(Approach a) {
  static constexpr char kCodes[] = {'N', 'E', 'S', 'W'};
  return kCodes[static_cast<int>(a)];
}

inline char decision_code(Decision d) {
  static constexpr char kCodes[] = {'S', 'L', 'R'};
  return kCodes[static_cast<int>(d)];
}

inline std::optional<Approach> approach_from_code(char c) {
  switch (c) {
    case 'N': return Approach::North;
    case 'E': return Approach::East;
    case 'S': return Approach::South;
    case 'W': return Approach::West;
    default: return std::nullopt;
  }
}

inline std::optional<Decision> decision_from_code(char c) {
  switch (c) {
    case 'S': return Decision::Straight;
    case 'L': return Decision::Left;
    case 'R': return Decision::Right;
    default: return std::nullopt;
  }
}

struct IntersectionGeometry {
  double schedule_zone_length = 200.0;  // S
  double merging_zone_side = 50.0;      // M
  int lanes_per_approach = 3;           // W
  double lane_width = 3.5;
  double clearance_time = 1.0;  // t_c
  double superelevation = 0.0;  // E
  double side_friction = 0.15;  // F
  double straight_vmax = 18.0;
  double left_vmax = 9.0;
  double right_vmax = 7.0;
  /// Movement served by each lane, lane 1 (median side) first.
  std::vector<Decision> lane_decisions{Decision::Left, Decision::Straight, Decision::Right};

  double half_lane_width() const { return lane_width / 2.0; }

  void validate() const {
    if (!(schedule_zone_length > 0.0)) throw InvalidGeometry("schedule_zone_length must be > 0");
    if (!(merging_zone_side > 0.0)) throw InvalidGeometry("merging_zone_side must be > 0");
    if (lanes_per_approach < 1) throw InvalidGeometry("lanes_per_approach must be >= 1");
    if (!(lane_width > 0.0)) throw InvalidGeometry("lane_width must be > 0");
    if (!(clearance_time >= 0.0)) throw InvalidGeometry("clearance_time must be >= 0");
    if (!(right_vmax > 0.0 && right_vmax <= left_vmax && left_vmax <= straight_vmax))
      throw InvalidGeometry("speed limits must satisfy 0 < right_vmax <= left_vmax <= straight_vmax");
    if (static_cast<int>(lane_decisions.size()) != lanes_per_approach)
      throw InvalidGeometry("lane_decisions must list one movement per lane");
  }

  /// Lanes (1-based) that serve the given movement.
  std::vector<int> lanes_for(Decision d) const {
    std::vector<int> lanes;
    for (std::size_t i = 0; i < lane_decisions.size(); ++i)
      if (lane_decisions[i] == d) lanes.push_back(static_cast<int>(i) + 1);
    return lanes;
  }
};

/// A platoon's path through the intersection. Lanes are numbered from the
/// median, so the lane centerline lies 2*lane-1 half lanes from the left edge.
struct Route {
  Approach approach = Approach::North;
  int lane_index = 1;
  Decision decision = Decision::Straight;
  int half_lanes_right = 1;  // H_r
  int half_lanes_left = 1;   // H_l

  static Route in_lane(Approach approach, int lane, Decision decision, int lanes_per_approach) {
    if (lane < 1 || lane > lanes_per_approach) throw InvalidGeometry("lane index out of range");
    Route r;
    r.approach = approach;
    r.lane_index = lane;
    r.decision = decision;
    r.half_lanes_left = 2 * lane - 1;
    r.half_lanes_right = 2 * lanes_per_approach - r.half_lanes_left;
    return r;
  }

  int movement_index() const { return static_cast<int>(approach) * 3 + static_cast<int>(decision); }

  std::string name() const {
    return std::string{approach_code(approach)} + std::to_string(lane_index) + decision_code(decision);
  }

  friend bool operator==(const Route&, const Route&) = default;
};

/// Arc length for a turn subtending theta_degrees at radius r.
inline double arc_length(double theta_degrees, double r) {
  if (!(theta_degrees > 0.0 && theta_degrees <= 360.0))
    throw InvalidGeometry("arc angle must lie in (0, 360] degrees");
  if (!(r > 0.0)) throw InvalidGeometry("arc radius must be > 0");
  return theta_degrees / 360.0 * 2.0 * std::numbers::pi * r;
}

inline void check_route(const Route& route, const IntersectionGeometry& geom) {
  const int w = geom.lanes_per_approach;
  if (route.lane_index < 1 || route.lane_index > w) throw InvalidGeometry("lane index out of range");
  if (route.half_lanes_left < 0 || route.half_lanes_right < 0 ||
      route.half_lanes_left + route.half_lanes_right != 2 * w)
    throw InvalidGeometry("half-lane counts must sum to twice the lane count");
}

/// Distance a platoon travels inside the merging zone.
inline double merging_distance(const Route& route, const IntersectionGeometry& geom) {
  check_route(route, geom);
  const double m = geom.merging_zone_side;
  const double two_w = 2.0 * geom.lanes_per_approach;
  switch (route.decision) {
    case Decision::Straight: return m;
    case Decision::Left: return (1.0 - route.half_lanes_right / two_w) * std::numbers::pi * m;
    case Decision::Right: return (1.0 - route.half_lanes_left / two_w) * std::numbers::pi * m;
  }
  return m;
}

/// Maximum comfortable speed through a turn of effective centerline radius.
inline double turn_speed_limit(double radius, double superelevation, double side_friction) {
  if (!(radius > 0.0)) throw InvalidGeometry("turning radius must be > 0");
  if (superelevation < 0.0 || side_friction < 0.0)
    throw InvalidGeometry("superelevation and side friction must be >= 0");
  return std::sqrt(15.0 * radius * (0.1 * superelevation + side_friction));
}

inline double route_vmax(const Route& route, const IntersectionGeometry& geom) {
  switch (route.decision) {
    case Decision::Straight: return geom.straight_vmax;
    case Decision::Left: return geom.left_vmax;
    case Decision::Right: return geom.right_vmax;
  }
  return geom.straight_vmax;
}

/// Movement-level conflict relation over the 12 movements (approach x decision).
/// Entries may be absent for user-built tables; lookups of absent pairs fail.
class MovementConflictTable {
 public:
  static constexpr int kMovements = 12;

  /// Geometric default: boundary points are laid out clockwise as
  /// N-in, N-out, E-in, E-out, S-in, S-out, W-in, W-out. Two movements from
  /// different approaches conflict when they share an exit or their chords
  /// interleave. Movements from the same approach diverge and are compatible.
  static MovementConflictTable standard_four_leg() {
    MovementConflictTable t;
    for (int a = 0; a < kMovements; ++a) {
      for (int b = 0; b < kMovements; ++b) {
        if (a == b) {
          t.entries_[a][b] = true;
          continue;
        }
        const int appr_a = a / 3, appr_b = b / 3;
        if (appr_a == appr_b) {
          t.entries_[a][b] = false;
          continue;
        }
        const int in_a = 2 * appr_a, out_a = exit_point(a);
        const int in_b = 2 * appr_b, out_b = exit_point(b);
        t.entries_[a][b] = (out_a == out_b) || chords_cross(in_a, out_a, in_b, out_b);
      }
    }
    return t;
  }

  void set(int movement_a, int movement_b, bool conflict) {
    entries_.at(movement_a).at(movement_b) = conflict;
    entries_.at(movement_b).at(movement_a) = conflict;
  }

  std::optional<bool> get(int movement_a, int movement_b) const {
    return entries_.at(movement_a).at(movement_b);
  }

  bool lookup(int movement_a, int movement_b) const {
    const auto e = entries_.at(movement_a).at(movement_b);
    if (!e) throw ConfigError("movement pair missing from conflict table: " + movement_name(movement_a) + "/" +
                              movement_name(movement_b));
    return *e;
  }

  static std::string movement_name(int m) {
    return std::string{approach_code(static_cast<Approach>(m / 3)), '.',
                       decision_code(static_cast<Decision>(m % 3))};
  }

  static std::optional<int> movement_from_name(std::string_view s) {
    if (s.size() != 3 || s[1] != '.') return std::nullopt;
    const auto a = approach_from_code(s[0]);
    const auto d = decision_from_code(s[2]);
    if (!a || !d) return std::nullopt;
    return static_cast<int>(*a) * 3 + static_cast<int>(*d);
  }

  friend bool operator==(const MovementConflictTable&, const MovementConflictTable&) = default;

 private:
  static int exit_leg(int movement) {
    const int appr = movement / 3;
    switch (static_cast<Decision>(movement % 3)) {
      case Decision::Straight: return (appr + 2) % 4;
      case Decision::Left: return (appr + 1) % 4;
      case Decision::Right: return (appr + 3) % 4;
    }
    return appr;
  }
  static int exit_point(int movement) { return 2 * exit_leg(movement) + 1; }

  // Strict interleaving of chord endpoints on a circle of 8 boundary points.
  static bool chords_cross(int a0, int a1, int b0, int b1) {
    auto strictly_between = [](int lo, int hi, int x) {
      if (lo > hi) std::swap(lo, hi);
      return lo < x && x < hi;
    };
    return strictly_between(a0, a1, b0) != strictly_between(a0, a1, b1);
  }

  std::array<std::array<std::optional<bool>, kMovements>, kMovements> entries_{};
};

/// True when two routes may not share the merging zone. Platoons queued in the
/// same lane always conflict; parallel lanes of the same movement never do.
inline bool conflicts(const Route& a, const Route& b, const MovementConflictTable& table) {
  if (a.approach == b.approach && a.lane_index == b.lane_index) return true;
  if (a.movement_index() == b.movement_index()) return false;
  return table.lookup(a.movement_index(), b.movement_index());
}

}  // namespace pcoord
