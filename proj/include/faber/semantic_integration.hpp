#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faber/event_model.hpp"

namespace faber {

/// One raw sensor reading. Its position in the stream is its arrival order.
struct RawReading {
  std::string sensor_id;
  double value = 0.0;
  std::optional<std::string> tag;  // spatial tag, e.g. "table"
  std::optional<Wallclock> wallclock;
};

enum class Comparator { kLess, kLessEq, kGreater, kGreaterEq, kEqual, kNotEqual };

struct Guard {
  std::string sensor_id;
  std::optional<std::string> tag;
  Comparator comparator = Comparator::kGreater;
  double threshold = 0.0;

  bool accepts(double value) const;
};

/// Conjunction of guards over the latest reading of each sensor inside a
/// window of `window` arrival ticks ending at the triggering reading.
struct IntegrationRule {
  std::string id;
  std::vector<Guard> guards;
  std::uint64_t window = 2;
  std::string emitted_kind;
  std::uint64_t debounce = 0;
  // Emit only on an unsatisfied -> satisfied transition.
  bool edge = false;
};

/// Parses `RULE id: IF sensor cmp value [AND ...] WITHIN w EMIT kind DEBOUNCE d [EDGE]`,
/// one rule per line.
std::vector<IntegrationRule> parse_integration_rules(std::string_view text);

/// Thresholds for the stock kitchen: chair > 50 kg, stove > 50 C.
std::string kitchen_integration_rules(double chair_kg = 50.0, double stove_celsius = 50.0);

/// Sensor ids known to the stock kitchen.
std::set<std::string> kitchen_sensors();

/// Emitted events are ordered by triggering reading then rule order and
/// receive consecutive ticks.
EventLog integrate(std::string day_id, std::span<const RawReading> stream, std::span<const IntegrationRule> rules,
                   const std::set<std::string>& known_sensors, const Vocabulary& vocabulary);

}  // namespace faber
