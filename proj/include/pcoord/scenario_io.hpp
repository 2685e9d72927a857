#pragma once

// Scenario files: a flat, sectioned key = value text format.
//
//   [geometry]  [demand]  [controller]  [fuel]  [experiment]  [conflicts]
//
// '#' and ';' start comments. Every key is optional; unset keys keep the
// library defaults, except arrival rates which default to zero. Unknown
// sections and keys are rejected with the offending line number.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pcoord/simulation.hpp"

namespace pcoord {

/// Sweep axes carried in the [experiment] section next to horizon and seed.
struct SweepAxes {
  std::vector<ControllerKind> controllers;
  std::vector<int> max_sizes;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;

  friend bool operator==(const SweepAxes&, const SweepAxes&) = default;
};

struct ScenarioDocument {
  ScenarioSpec spec;
  SweepAxes sweep;
};

/// Default demand used by the shipped scenario, platoons per hour per approach.
inline constexpr double kDefaultRatePerHour = 120.0;

inline ScenarioSpec default_scenario() {
  ScenarioSpec s;
  s.demand.rate_per_hour.fill(kDefaultRatePerHour);
  return s;
}

inline SweepAxes default_sweep() {
  SweepAxes a;
  a.controllers.assign(kControllers.begin(), kControllers.end());
  a.max_sizes = {1, 2, 3, 4, 5};
  for (std::uint64_t s = 1; s <= 30; ++s) a.seeds.push_back(s);
  a.output_dir = "results";
  return a;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Shortest text that reads back to the same double.
inline std::string fmt_double(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

template <class Range, class F>
std::string join(const Range& r, F f) {
  std::string out;
  for (const auto& x : r) {
    if (!out.empty()) out += ", ";
    out += f(x);
  }
  return out;
}

// One key of the format: how to read it into a document and how to print it.
struct Field {
  std::function<void(ScenarioDocument&, std::string_view)> read;
  std::function<std::string(const ScenarioDocument&)> write;
};

// Raised by value readers; the caller adds line and key.
struct BadValue {
  std::string why;
};

inline double read_double(std::string_view v) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) throw BadValue{"expected a number"};
  return x;
}

template <class Int>
Int read_int(std::string_view v) {
  Int x{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) throw BadValue{"expected an integer"};
  return x;
}

inline bool read_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw BadValue{"expected true or false"};
}

inline Field spec_number(double ScenarioSpec::*member) {
  return {[=](ScenarioDocument& d, std::string_view v) { d.spec.*member = read_double(v); },
          [=](const ScenarioDocument& d) { return fmt_double(d.spec.*member); }};
}

inline Field geometry_number(double IntersectionGeometry::*member) {
  return {[=](ScenarioDocument& d, std::string_view v) { d.spec.geometry.*member = read_double(v); },
          [=](const ScenarioDocument& d) { return fmt_double(d.spec.geometry.*member); }};
}

inline Field demand_number(double DemandSpec::*member) {
  return {[=](ScenarioDocument& d, std::string_view v) { d.spec.demand.*member = read_double(v); },
          [=](const ScenarioDocument& d) { return fmt_double(d.spec.demand.*member); }};
}

inline Field fuel_number(double FuelModel::*member) {
  return {[=](ScenarioDocument& d, std::string_view v) { d.spec.fuel.*member = read_double(v); },
          [=](const ScenarioDocument& d) { return fmt_double(d.spec.fuel.*member); }};
}

inline Field bounds_number(double ControlBounds::*member) {
  return {[=](ScenarioDocument& d, std::string_view v) { d.spec.bounds.*member = read_double(v); },
          [=](const ScenarioDocument& d) { return fmt_double(d.spec.bounds.*member); }};
}

inline Field rate(Approach a) {
  const int i = static_cast<int>(a);
  return {[=](ScenarioDocument& d, std::string_view v) {
            const double r = read_double(v);
            if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("arrival rate must be >= 0");
            d.spec.demand.rate_per_hour[i] = r;
          },
          [=](const ScenarioDocument& d) { return fmt_double(d.spec.demand.rate_per_hour[i]); }};
}

// Section name -> key name -> field, in print order.
using Schema = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>;

inline const Schema& schema() {
  static const Schema s = [] {
    Schema out;
    out.push_back({"geometry",
                   {{"schedule_zone_length", geometry_number(&IntersectionGeometry::schedule_zone_length)},
                    {"merging_zone_side", geometry_number(&IntersectionGeometry::merging_zone_side)},
                    {"lanes_per_approach",
                     {[](ScenarioDocument& d, std::string_view v) {
                        d.spec.geometry.lanes_per_approach = read_int<int>(v);
                      },
                      [](const ScenarioDocument& d) { return std::to_string(d.spec.geometry.lanes_per_approach); }}},
                    {"lane_decisions",
                     {[](ScenarioDocument& d, std::string_view v) {
                        std::vector<Decision> ds;
                        for (auto item : split_list(v)) {
                          const auto dec = item.size() == 1 ? decision_from_code(item[0]) : std::nullopt;
                          if (!dec) throw BadValue{"expected a list of L, S or R"};
                          ds.push_back(*dec);
                        }
                        d.spec.geometry.lane_decisions = ds;
                      },
                      [](const ScenarioDocument& d) {
                        return join(d.spec.geometry.lane_decisions,
                                    [](Decision x) { return std::string(1, decision_code(x)); });
                      }}},
                    {"lane_width", geometry_number(&IntersectionGeometry::lane_width)},
                    {"clearance_time", geometry_number(&IntersectionGeometry::clearance_time)},
                    {"superelevation", geometry_number(&IntersectionGeometry::superelevation)},
                    {"side_friction", geometry_number(&IntersectionGeometry::side_friction)},
                    {"straight_vmax", geometry_number(&IntersectionGeometry::straight_vmax)},
                    {"left_vmax", geometry_number(&IntersectionGeometry::left_vmax)},
                    {"right_vmax", geometry_number(&IntersectionGeometry::right_vmax)}}});
    out.push_back(
        {"demand",
         {{"rate_N", rate(Approach::North)},
          {"rate_E", rate(Approach::East)},
          {"rate_S", rate(Approach::South)},
          {"rate_W", rate(Approach::West)},
          {"size_weights",
           {[](ScenarioDocument& d, std::string_view v) {
              std::vector<double> w;
              for (auto item : split_list(v)) w.push_back(read_double(item));
              d.spec.demand.size_weights = w;
            },
            [](const ScenarioDocument& d) { return join(d.spec.demand.size_weights, fmt_double); }}},
          {"max_platoon_size",
           {[](ScenarioDocument& d, std::string_view v) { d.spec.demand.max_platoon_size = read_int<int>(v); },
            [](const ScenarioDocument& d) { return std::to_string(d.spec.demand.max_platoon_size); }}},
          {"movement_mix",
           {[](ScenarioDocument& d, std::string_view v) {
              const auto items = split_list(v);
              if (items.size() != 3) throw BadValue{"expected three shares: straight, left, right"};
              for (int i = 0; i < 3; ++i) d.spec.demand.movement_mix[i] = read_double(items[i]);
            },
            [](const ScenarioDocument& d) { return join(d.spec.demand.movement_mix, fmt_double); }}},
          {"headway", demand_number(&DemandSpec::headway)},
          {"entry_speed_min", demand_number(&DemandSpec::entry_speed_min)},
          {"entry_speed_max", demand_number(&DemandSpec::entry_speed_max)}}});
    out.push_back(
        {"controller",
         {{"type",
           {[](ScenarioDocument& d, std::string_view v) {
              const auto c = controller_from_name(v);
              if (!c) throw BadValue{"unknown controller"};
              d.spec.controller = *c;
            },
            [](const ScenarioDocument& d) { return std::string(controller_name(d.spec.controller)); }}},
          {"u_min", bounds_number(&ControlBounds::u_min)},
          {"u_max", bounds_number(&ControlBounds::u_max)},
          {"v_min", bounds_number(&ControlBounds::v_min)},
          {"lqf_interval", spec_number(&ScenarioSpec::lqf_interval)},
          {"fcfs_serial",
           {[](ScenarioDocument& d, std::string_view v) { d.spec.fcfs_serial = read_bool(v); },
            [](const ScenarioDocument& d) { return std::string(d.spec.fcfs_serial ? "true" : "false"); }}},
          {"oc_chaining",
           {[](ScenarioDocument& d, std::string_view v) {
              if (v == "group") d.spec.oc_chaining = SchedulerConfig::Chaining::Group;
              else if (v == "conflict") d.spec.oc_chaining = SchedulerConfig::Chaining::Conflict;
              else throw BadValue{"expected group or conflict"};
            },
            [](const ScenarioDocument& d) {
              return std::string(d.spec.oc_chaining == SchedulerConfig::Chaining::Group ? "group" : "conflict");
            }}},
          {"crawl_floor", spec_number(&ScenarioSpec::crawl_floor)}}});
    out.push_back({"fuel",
                   {{"c0", fuel_number(&FuelModel::c0)},
                    {"c1", fuel_number(&FuelModel::c1)},
                    {"c2", fuel_number(&FuelModel::c2)},
                    {"c3", fuel_number(&FuelModel::c3)},
                    {"d0", fuel_number(&FuelModel::d0)},
                    {"d1", fuel_number(&FuelModel::d1)}}});
    out.push_back(
        {"experiment",
         {{"horizon", spec_number(&ScenarioSpec::horizon)},
          {"dt", spec_number(&ScenarioSpec::dt)},
          {"seed",
           {[](ScenarioDocument& d, std::string_view v) { d.spec.seed = read_int<std::uint64_t>(v); },
            [](const ScenarioDocument& d) { return std::to_string(d.spec.seed); }}},
          {"controllers",
           {[](ScenarioDocument& d, std::string_view v) {
              d.sweep.controllers.clear();
              for (auto item : split_list(v)) {
                const auto c = controller_from_name(item);
                if (!c) throw BadValue{"unknown controller '" + std::string(item) + "'"};
                d.sweep.controllers.push_back(*c);
              }
            },
            [](const ScenarioDocument& d) {
              return join(d.sweep.controllers, [](ControllerKind c) { return std::string(controller_name(c)); });
            }}},
          {"max_sizes",
           {[](ScenarioDocument& d, std::string_view v) {
              d.sweep.max_sizes.clear();
              for (auto item : split_list(v)) d.sweep.max_sizes.push_back(read_int<int>(item));
            },
            [](const ScenarioDocument& d) {
              return join(d.sweep.max_sizes, [](int k) { return std::to_string(k); });
            }}},
          {"seeds",
           {[](ScenarioDocument& d, std::string_view v) {
              // Comma list whose items are seeds or inclusive ranges "first-last".
              d.sweep.seeds.clear();
              for (auto item : split_list(v)) {
                const auto dash = item.find('-');
                if (dash == std::string_view::npos) {
                  d.sweep.seeds.push_back(read_int<std::uint64_t>(item));
                  continue;
                }
                const auto lo = read_int<std::uint64_t>(trim(item.substr(0, dash)));
                const auto hi = read_int<std::uint64_t>(trim(item.substr(dash + 1)));
                if (hi < lo) throw BadValue{"empty seed range"};
                for (auto s = lo; s <= hi; ++s) d.sweep.seeds.push_back(s);
              }
            },
            [](const ScenarioDocument& d) {
              return join(d.sweep.seeds, [](std::uint64_t s) { return std::to_string(s); });
            }}},
          {"output_dir",
           {[](ScenarioDocument& d, std::string_view v) { d.sweep.output_dir = std::string(v); },
            [](const ScenarioDocument& d) { return d.sweep.output_dir; }}}}});
    return out;
  }();
  return s;
}

inline const Field* find_field(std::string_view section, std::string_view key) {
  for (const auto& [name, fields] : schema()) {
    if (name != section) continue;
    for (const auto& [k, f] : fields)
      if (k == key) return &f;
  }
  return nullptr;
}

}  // namespace detail

/// Parses a scenario document. Syntax and schema errors raise ParseError with
/// the line and key; the assembled spec is then validated as a whole.
inline ScenarioDocument parse_document(std::string_view text) {
  ScenarioDocument doc;
  doc.spec.demand.rate_per_hour.fill(0.0);
  doc.sweep = default_sweep();
  std::string section;
  std::map<std::string, int> seen;
  bool conflicts_seen = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto c = raw.find_first_of("#;"); c != std::string_view::npos) raw = raw.substr(0, c);
    const auto line = detail::trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no, "");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      const bool known = section == "conflicts" ||
                         std::any_of(detail::schema().begin(), detail::schema().end(),
                                     [&](const auto& s) { return s.first == section; });
      if (!known) throw ParseError("unknown section [" + section + "]", line_no, section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no, "");
    const std::string key(detail::trim(line.substr(0, eq)));
    const auto value = detail::trim(line.substr(eq + 1));
    if (section.empty()) throw ParseError("key outside of any section", line_no, key);
    const std::string qualified = section + "." + key;
    if (auto [it, fresh] = seen.emplace(qualified, line_no); !fresh)
      throw ParseError("duplicate key (first set on line " + std::to_string(it->second) + ")", line_no, qualified);

    if (section == "conflicts") {
      // N.L/S.S = conflict | compatible
      const auto slash = key.find('/');
      const auto a = slash == std::string::npos ? std::nullopt
                                                : MovementConflictTable::movement_from_name(key.substr(0, slash));
      const auto b = slash == std::string::npos ? std::nullopt
                                                : MovementConflictTable::movement_from_name(key.substr(slash + 1));
      if (!a || !b) throw ParseError("expected a movement pair such as N.L/S.S", line_no, qualified);
      if (value != "conflict" && value != "compatible")
        throw ParseError("expected conflict or compatible", line_no, qualified);
      if (!conflicts_seen) {
        doc.spec.conflicts = MovementConflictTable{};
        conflicts_seen = true;
      }
      doc.spec.conflicts.set(*a, *b, value == "conflict");
      continue;
    }

    const detail::Field* f = detail::find_field(section, key);
    if (!f) throw ParseError("unknown key", line_no, qualified);
    try {
      f->read(doc, value);
    } catch (const detail::BadValue& e) {
      throw ParseError(e.why + ", got '" + std::string(value) + "'", line_no, qualified);
    } catch (const ConfigError& e) {
      throw ConfigError(qualified + " (line " + std::to_string(line_no) + "): " + e.what());
    }
  }
  doc.spec.bounds.v_max = doc.spec.geometry.straight_vmax;
  doc.spec.validate();
  return doc;
}

inline ScenarioSpec parse_scenario(std::string_view text) { return parse_document(text).spec; }

/// Prints every key, so that parse_document(serialize(doc)) reproduces doc.
/// The conflict section is written only when it differs from the geometric default.
inline std::string serialize(const ScenarioDocument& doc) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, fields] : detail::schema()) {
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& [key, f] : fields) out << key << " = " << f.write(doc) << '\n';
  }
  if (!(doc.spec.conflicts == MovementConflictTable::standard_four_leg())) {
    out << "\n[conflicts]\n";
    for (int a = 0; a < MovementConflictTable::kMovements; ++a)
      for (int b = a; b < MovementConflictTable::kMovements; ++b)
        if (const auto e = doc.spec.conflicts.get(a, b))
          out << MovementConflictTable::movement_name(a) << '/' << MovementConflictTable::movement_name(b) << " = "
              << (*e ? "conflict" : "compatible") << '\n';
  }
  return out.str();
}

inline std::string serialize(const ScenarioSpec& spec) {
  ScenarioDocument doc{spec, default_sweep()};
  return serialize(doc);
}

}  // namespace pcoord
