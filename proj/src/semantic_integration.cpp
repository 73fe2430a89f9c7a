#include "faber/semantic_integration.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "faber/errors.hpp"
#include "text_util.hpp"

namespace faber {

namespace {

std::optional<Comparator> parse_comparator(std::string_view s) {
  if (s == "<") return Comparator::kLess;
  if (s == "<=") return Comparator::kLessEq;
  if (s == ">") return Comparator::kGreater;
  if (s == ">=") return Comparator::kGreaterEq;
  if (s == "==" || s == "=") return Comparator::kEqual;
  if (s == "!=") return Comparator::kNotEqual;
  return std::nullopt;
}

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    auto start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

template <typename T>
T parse_number(std::string_view s, int line, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(std::string("invalid ") + what + " '" + std::string(s) + "'", line);
  }
  return value;
}

const char* const kRepositories[][2] = {
    {"fridge", "Fridge"},
    {"foodCabinet", "FoodCabinet"},
    {"medicineCabinet", "MedicineCabinet"},
    {"panCabinet", "PanCabinet"},
    {"silverwareDrawer", "SilverwareDrawer"},
    {"glasswareCabinet", "GlasswareCabinet"},
};

}  // namespace

bool Guard::accepts(double v) const {
  switch (comparator) {
    case Comparator::kLess: return v < threshold;
    case Comparator::kLessEq: return v <= threshold;
    case Comparator::kGreater: return v > threshold;
    case Comparator::kGreaterEq: return v >= threshold;
    case Comparator::kEqual: return v == threshold;
    case Comparator::kNotEqual: return v != threshold;
  }
  return false;
}

std::vector<IntegrationRule> parse_integration_rules(std::string_view text) {
  std::vector<IntegrationRule> rules;
  int line_no = 0;
  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto tok = tokenize(line);
    std::size_t i = 0;
    auto expect = [&](std::string_view keyword) {
      if (i >= tok.size() || tok[i] != keyword) {
        throw ParseError("expected '" + std::string(keyword) + "'", line_no);
      }
      ++i;
    };
    auto next = [&](const char* what) -> std::string_view {
      if (i >= tok.size()) throw ParseError(std::string("missing ") + what, line_no);
      return tok[i++];
    };

    IntegrationRule rule;
    expect("RULE");
    auto id = next("rule id");
    if (id.back() == ':') {
      id.remove_suffix(1);
    } else {
      expect(":");
    }
    if (id.empty()) throw ParseError("empty rule id", line_no);
    rule.id = std::string(id);
    expect("IF");
    while (true) {
      Guard guard;
      auto sensor = next("sensor");
      if (auto at = sensor.find('@'); at != std::string_view::npos) {
        guard.tag = std::string(sensor.substr(at + 1));
        sensor = sensor.substr(0, at);
      }
      guard.sensor_id = std::string(sensor);
      auto cmp = parse_comparator(next("comparator"));
      if (!cmp) throw ParseError("unknown comparator", line_no);
      guard.comparator = *cmp;
      guard.threshold = parse_number<double>(next("threshold"), line_no, "threshold");
      if (!std::isfinite(guard.threshold)) throw ParseError("threshold must be finite", line_no);
      rule.guards.push_back(std::move(guard));
      if (i < tok.size() && tok[i] == "AND") {
        ++i;
        continue;
      }
      break;
    }
    expect("WITHIN");
    rule.window = parse_number<std::uint64_t>(next("window"), line_no, "window");
    if (rule.window == 0) throw ParseError("window must be at least 1", line_no);
    expect("EMIT");
    rule.emitted_kind = std::string(next("event kind"));
    expect("DEBOUNCE");
    rule.debounce = parse_number<std::uint64_t>(next("debounce"), line_no, "debounce");
    if (i < tok.size() && tok[i] == "EDGE") {
      rule.edge = true;
      ++i;
    }
    if (i != tok.size()) throw ParseError("trailing tokens after rule", line_no);
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::string kitchen_integration_rules(double chair_kg, double stove_celsius) {
  std::ostringstream out;
  auto chair = format_number(chair_kg);
  auto stove = format_number(stove_celsius);
  out << "RULE sit: IF pir.table@table == 1 AND press.chair > " << chair
      << " WITHIN 2 EMIT SittingAtKitchenChair DEBOUNCE 0 EDGE\n";
  out << "RULE stand: IF press.chair <= " << chair << " WITHIN 1 EMIT StandingUpFromKitchenChair DEBOUNCE 0 EDGE\n";
  out << "RULE near_table: IF pir.table@table == 1 WITHIN 1 EMIT PresenceNearKitchenTable DEBOUNCE 0 EDGE\n";
  out << "RULE leave_table: IF pir.table@table == 0 WITHIN 1 EMIT LeavingKitchenTable DEBOUNCE 0 EDGE\n";
  out << "RULE stove_on: IF temp.stove > " << stove << " WITHIN 1 EMIT StoveOn DEBOUNCE 0 EDGE\n";
  out << "RULE stove_off: IF temp.stove <= " << stove << " WITHIN 1 EMIT StoveOff DEBOUNCE 0 EDGE\n";
  for (const auto& repo : kRepositories) {
    out << "RULE open_" << repo[0] << ": IF mag." << repo[0] << " == 1 WITHIN 1 EMIT Opening" << repo[1]
        << " DEBOUNCE 0 EDGE\n";
    out << "RULE close_" << repo[0] << ": IF mag." << repo[0] << " == 0 WITHIN 1 EMIT Closing" << repo[1]
        << " DEBOUNCE 0 EDGE\n";
  }
  return out.str();
}

std::set<std::string> kitchen_sensors() {
  std::set<std::string> sensors = {"pir.table", "press.chair", "temp.stove"};
  for (const auto& repo : kRepositories) sensors.insert(std::string("mag.") + repo[0]);
  return sensors;
}

EventLog integrate(std::string day_id, std::span<const RawReading> stream, std::span<const IntegrationRule> rules,
                   const std::set<std::string>& known_sensors, const Vocabulary& vocabulary) {
  for (const auto& rule : rules) {
    for (const auto& guard : rule.guards) {
      if (!known_sensors.count(guard.sensor_id)) {
        throw ConfigError("rule '" + rule.id + "' references unknown sensor '" + guard.sensor_id + "'");
      }
    }
    if (!vocabulary.contains(rule.emitted_kind)) {
      throw VocabularyError("rule '" + rule.id + "' emits unknown event kind '" + rule.emitted_kind + "'");
    }
  }

  struct RuleState {
    std::optional<std::uint64_t> last_emission;
    std::optional<bool> previously_satisfied;
  };
  std::vector<RuleState> state(rules.size());
  // Latest arrival index per (sensor, tag) key.
  std::map<std::string, std::size_t> latest;
  auto key_of = [](std::string_view sensor, const std::optional<std::string>& tag) {
    return std::string(sensor) + (tag ? "@" + *tag : std::string());
  };

  EventLog log;
  log.day_id = std::move(day_id);
  std::uint64_t next_tick = 0;
  for (std::size_t arrival = 0; arrival < stream.size(); ++arrival) {
    const auto& reading = stream[arrival];
    latest[key_of(reading.sensor_id, std::nullopt)] = arrival;
    if (reading.tag) latest[key_of(reading.sensor_id, reading.tag)] = arrival;

    for (std::size_t r = 0; r < rules.size(); ++r) {
      const auto& rule = rules[r];
      bool triggered = false;
      for (const auto& g : rule.guards) {
        if (g.sensor_id == reading.sensor_id && (!g.tag || g.tag == reading.tag)) triggered = true;
      }
      if (!triggered) continue;

      bool satisfied = true;
      for (const auto& g : rule.guards) {
        auto it = latest.find(key_of(g.sensor_id, g.tag));
        if (it == latest.end() || arrival - it->second >= rule.window || !g.accepts(stream[it->second].value)) {
          satisfied = false;
          break;
        }
      }
      auto& st = state[r];
      bool was = st.previously_satisfied.value_or(true);
      bool first = !st.previously_satisfied.has_value();
      st.previously_satisfied = satisfied;
      if (!satisfied) continue;
      if (rule.edge && (first || was)) continue;
      if (st.last_emission && arrival - *st.last_emission < rule.debounce) continue;
      st.last_emission = arrival;
      log.events.push_back(
          Event{Timestamp{next_tick++, reading.wallclock}, reading.sensor_id, rule.emitted_kind, reading.value});
    }
  }
  log.validate();
  return log;
}

}  // namespace faber
