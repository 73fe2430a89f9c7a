#include <algorithm>
#include <cctype>
#include <sstream>

#include "faber/anomaly.hpp"
#include "faber/errors.hpp"
#include "json.hpp"
#include "text_util.hpp"

namespace faber::anomaly {

RuleConfig default_rule_config() {
  return {{
      {"nc1_timeout", 10 * 60},
      {"c4_grace", 5 * 60},
      {"c5_lookback", 30 * 60},
      {"c6_deadline", 60 * 60},
      {"c7_lead", 15 * 60},
  }};
}

namespace {

std::string threshold(const RuleConfig& config, const std::string& key, const std::string& rule) {
  auto it = config.thresholds.find(key);
  if (it == config.thresholds.end()) throw ConfigError("rule " + rule + " needs threshold '" + key + "'");
  if (it->second < 0) throw ConfigError("threshold '" + key + "' must not be negative");
  return std::to_string(it->second) + "s";
}

}  // namespace

std::string builtin_rule_text(const RuleConfig& c) {
  std::ostringstream out;
  // Repository left open: no close within the timeout before it is opened again.
  out << "NC1: anomaly(nca, R, T1) :- action(open, door, R, T1),\n"
         "  not(action(close, door, R, T2), T1 < T2, T2 - T1 <= "
      << threshold(c, "nc1_timeout", "NC1")
      << ",\n      not(action(open, door, R, T3), T1 < T3, T3 < T2)).\n";
  // Medicine retrieved and never returned before its next retrieval.
  out << "NC2: anomaly(nca, M, T1) :- action(retrieve, M, C, T1), medicine(M),\n"
         "  not(action(return, M, C2, T2), T1 < T2,\n"
         "      not(action(retrieve, M, C3, T3), T1 < T3, T3 < T2)).\n";
  out << "NC3: anomaly(nca, F, T1) :- action(retrieve, F, S, T1), cookFood(F),\n"
         "  interval(prepareMeal, Ts, Te), Ts <= T1, T1 <= Te,\n"
         "  not(holds(on, stove, H1, H2), H1 <= Te, Ts <= H2).\n";
  out << "NC4: anomaly(nca, Meal, null) :- mealtime(Meal, W1, W2),\n"
         "  not(interval(prepareMeal, Ts, Te), W1 <= Ts, Ts <= W2).\n";
  out << "C1: anomaly(co, M, null) :- prescribed(M, T1, T2),\n"
         "  not(action(retrieve, M, C, T), medCabinet(C), T1 < T, T < T2).\n";
  out << "C2: anomaly(wa, M, null) :- action(retrieve, M, C, T), medCabinet(C), medicine(M),\n"
         "  not(prescribed(M, T1, T2)).\n";
  out << "C3: anomaly(rep, M, T2) :- prescribed(M, W1, W2), action(retrieve, M, C, T1),\n"
         "  action(retrieve, M, C, T2), medCabinet(C), W1 < T1, T1 < T2, T2 < W2.\n";
  out << "C4: anomaly(co, stove, H1) :- holds(on, stove, H1, H2),\n"
         "  interval(prepareMeal, Ts, Te), Ts <= H1, H1 <= Te, H2 - Te > "
      << threshold(c, "c4_grace", "C4") << ".\n";
  out << "C5: anomaly(co, Meal, null) :- interval(consumeMeal, Ts, Te),\n"
         "  mealtime(Meal, W1, W2), W1 <= Ts, Ts <= W2,\n"
         "  not(action(open, door, silverwareDrawer, T), Ts - "
      << threshold(c, "c5_lookback", "C5") << " <= T, T <= Te).\n";
  out << "C6: anomaly(co, Meal, null) :- interval(prepareMeal, Ts, Te),\n"
         "  mealtime(Meal, W1, W2), W1 <= Ts, Ts <= W2,\n"
         "  not(interval(consumeMeal, Cs, Ce), Ts < Cs, Cs - Te <= "
      << threshold(c, "c6_deadline", "C6") << ").\n";
  out << "C7: anomaly(wa, stove, H1) :- holds(on, stove, H1, H2),\n"
         "  not(action(open, door, panCabinet, T), H1 - "
      << threshold(c, "c7_lead", "C7") << " <= T, T <= H2).\n";
  return out.str();
}

std::vector<Rule> builtin_rule_set(const RuleConfig& config) { return parse_rules(builtin_rule_text(config)); }

HomeModel HomeModel::kitchen() {
  HomeModel h;
  h.medicines = {"aspirin", "metformin", "simvastatin", "ibuprofen", "warfarin"};
  h.refrigerated_foods = {"milk", "yogurt", "butter", "eggs", "meat", "cheese"};
  h.cook_foods = {"eggs", "meat", "pasta", "rice", "soup"};
  h.foods = {"milk", "yogurt", "butter", "eggs", "meat", "cheese", "bread", "cereals", "pasta", "rice",
             "coffee", "biscuits", "soup"};
  h.repositories = {"fridge", "foodCabinet", "medicineCabinet", "panCabinet", "silverwareDrawer", "glasswareCabinet"};
  h.non_refrigerated_storage = {"foodCabinet"};
  h.medicine_cabinets = {"medicineCabinet"};
  h.mealtimes = {{"breakfast", 6 * 3600 + 1800, 10 * 3600},
                 {"lunch", 11 * 3600 + 1800, 14 * 3600 + 1800},
                 {"dinner", 18 * 3600, 21 * 3600 + 1800}};
  return h;
}

std::string constant_name(std::string_view label) {
  std::string s(label);
  if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

namespace {

Value time_of(const Timestamp& ts, const TimeBase& base) { return Value::time(seconds_of_day(ts, base), ts.tick); }

// RFID readings name the item in the sensor id, optionally behind a prefix.
std::string item_of(const Event& e) {
  auto pos = e.sensor_id.find_last_of(".:");
  return constant_name(pos == std::string::npos ? e.sensor_id : e.sensor_id.substr(pos + 1));
}

}  // namespace

FactSet build_facts(const EventLog& log, const std::vector<boundary::ActivityInterval>& intervals,
                    const std::vector<Prescription>& prescriptions, const HomeModel& home, const TimeBase& base) {
  FactSet facts;
  auto add = [&](std::string pred, std::vector<Value> args) { facts.insert({std::move(pred), std::move(args)}); };
  auto sym = [](std::string s) { return Value::sym(std::move(s)); };

  std::vector<Value> stove_on;
  for (const auto& e : log.events) {
    Value t = time_of(e.timestamp, base);
    add("event", {sym(e.kind), t});
    const std::string& k = e.kind;
    if (detail::starts_with(k, "Opening")) {
      add("action", {sym("open"), sym("door"), sym(constant_name(k.substr(7))), t});
    } else if (detail::starts_with(k, "Closing")) {
      add("action", {sym("close"), sym("door"), sym(constant_name(k.substr(7))), t});
    } else if (detail::starts_with(k, "RetrievingFrom")) {
      add("action", {sym("retrieve"), sym(item_of(e)), sym(constant_name(k.substr(14))), t});
    } else if (detail::starts_with(k, "ReturningTo")) {
      add("action", {sym("return"), sym(item_of(e)), sym(constant_name(k.substr(11))), t});
    } else if (k == "StoveOn") {
      stove_on.push_back(t);
    } else if (k == "StoveOff") {
      for (const auto& on : stove_on) add("holds", {sym("on"), sym("stove"), on, t});
      stove_on.clear();
    }
  }
  // A stove never switched off stays on until the end of the day.
  for (const auto& on : stove_on) add("holds", {sym("on"), sym("stove"), on, Value::time(24 * 3600 - 1)});

  for (const auto& iv : intervals) {
    Value a = sym(constant_name(iv.activity));
    Value s = time_of(iv.start, base), e = time_of(iv.end, base);
    add("interval", {a, s, e});
    add("startActivity", {a, s});
    if (iv.completed) add("endActivity", {a, e});
  }
  for (const auto& p : prescriptions) add("prescribed", {sym(p.medicine), Value::time(p.from), Value::time(p.to)});
  for (const auto& m : home.mealtimes) add("mealtime", {sym(m.meal), Value::time(m.from), Value::time(m.to)});
  for (const auto& x : home.medicines) add("medicine", {sym(x)});
  for (const auto& x : home.foods) add("food", {sym(x)});
  for (const auto& x : home.refrigerated_foods) add("refFood", {sym(x)});
  for (const auto& x : home.cook_foods) add("cookFood", {sym(x)});
  for (const auto& x : home.repositories) add("repository", {sym(x)});
  for (const auto& x : home.non_refrigerated_storage) add("nonRefStorage", {sym(x)});
  for (const auto& x : home.medicine_cabinets) add("medCabinet", {sym(x)});
  return facts;
}

std::vector<boundary::ActivityInterval> gold_intervals(const EventLog& log, const Annotation& gold) {
  // Ticks without an event borrow the wallclock of the closest earlier event.
  auto stamp = [&](std::uint64_t tick) {
    Timestamp ts{tick, std::nullopt};
    auto it = std::upper_bound(log.events.begin(), log.events.end(), tick,
                               [](std::uint64_t t, const Event& e) { return t < e.timestamp.tick; });
    if (it != log.events.begin()) ts.wallclock = std::prev(it)->timestamp.wallclock;
    else if (!log.events.empty()) ts.wallclock = log.events.front().timestamp.wallclock;
    return ts;
  };
  std::vector<boundary::ActivityInterval> out;
  for (const auto& iv : gold.activity_intervals) out.push_back({iv.activity, stamp(iv.start), stamp(iv.end), true});
  return out;
}

std::string to_json_line(const Anomaly& a) {
  nlohmann::ordered_json j;
  j["day_id"] = a.day_id;
  j["rule_id"] = a.rule_id;
  j["category"] = category_name(a.category);
  j["object"] = a.object.kind == Value::Kind::kSymbol ? a.object.symbol : to_string(a.object);
  if (a.time.is_null()) j["time"] = nullptr;
  else if (a.time.tick) j["time"] = *a.time.tick;
  else j["time"] = to_string(a.time);
  return j.dump();
}

LabeledAnomaly to_labeled(const Anomaly& a) {
  LabeledAnomaly out;
  out.code = a.rule_id;
  out.object = a.object.kind == Value::Kind::kSymbol ? a.object.symbol : to_string(a.object);
  if (!a.time.is_null()) out.tick = a.time.tick;
  return out;
}

}  // namespace faber::anomaly
