#include "doctest.h"
#include "faber/errors.hpp"
#include "faber/semantic_integration.hpp"

using namespace faber;

namespace {

RawReading reading(std::string sensor, double value, std::optional<std::string> tag = std::nullopt) {
  return RawReading{std::move(sensor), value, std::move(tag), std::nullopt};
}

std::vector<std::string> kinds(const EventLog& log) {
  std::vector<std::string> out;
  for (const auto& e : log.events) out.push_back(e.kind);
  return out;
}

}  // namespace

TEST_CASE("rule text parses guards, window, debounce and edge flag") {
  auto rules = parse_integration_rules(
      "# comment\nRULE sit: IF pir.table@table == 1 AND press.chair > 50 WITHIN 2 EMIT SittingAtKitchenChair "
      "DEBOUNCE 3 EDGE\n");
  REQUIRE(rules.size() == 1);
  const auto& r = rules[0];
  CHECK(r.id == "sit");
  REQUIRE(r.guards.size() == 2);
  CHECK(r.guards[0].tag == std::optional<std::string>("table"));
  CHECK(r.guards[1].comparator == Comparator::kGreater);
  CHECK(r.guards[1].threshold == 50.0);
  CHECK(r.window == 2);
  CHECK(r.debounce == 3);
  CHECK(r.edge);
  CHECK_THROWS_AS(parse_integration_rules("RULE x: IF a > nan WITHIN 1 EMIT StoveOn DEBOUNCE 0"), ParseError);
  CHECK_THROWS_AS(parse_integration_rules("RULE x: IF a > 1 EMIT StoveOn DEBOUNCE 0"), ParseError);
}

TEST_CASE("presence near the table plus heavy chair reading means sitting") {
  auto rules = parse_integration_rules(kitchen_integration_rules());
  std::vector<RawReading> stream = {reading("pir.table", 1, "table"), reading("press.chair", 62)};
  auto log = integrate("d", stream, rules, kitchen_sensors(), Vocabulary::kitchen());
  auto k = kinds(log);
  CHECK(std::find(k.begin(), k.end(), "SittingAtKitchenChair") != k.end());
}

TEST_CASE("light chair reading alone emits nothing") {
  auto rules = parse_integration_rules(
      "RULE sit: IF pir.table@table == 1 AND press.chair > 50 WITHIN 2 EMIT SittingAtKitchenChair DEBOUNCE 0\n");
  std::vector<RawReading> stream = {reading("press.chair", 40)};
  CHECK(integrate("d", stream, rules, kitchen_sensors(), Vocabulary::kitchen()).events.empty());
}

TEST_CASE("debounce suppresses a second spike one tick later") {
  // Hand replay: arrival 0 fires (no prior emission); arrival 1 is 1 < 5 after it.
  auto rules = parse_integration_rules("RULE hot: IF temp.stove > 50 WITHIN 1 EMIT StoveOn DEBOUNCE 5\n");
  std::vector<RawReading> stream = {reading("temp.stove", 80), reading("temp.stove", 85)};
  auto log = integrate("d", stream, rules, kitchen_sensors(), Vocabulary::kitchen());
  REQUIRE(log.events.size() == 1);
  CHECK(log.events[0].timestamp.tick == 0);
  CHECK(log.events[0].value == 80.0);
}

TEST_CASE("edge rules fire on transitions only") {
  auto rules = parse_integration_rules(kitchen_integration_rules());
  std::vector<RawReading> stream = {reading("temp.stove", 20), reading("temp.stove", 70), reading("temp.stove", 90),
                                    reading("temp.stove", 30), reading("temp.stove", 25)};
  auto log = integrate("d", stream, rules, kitchen_sensors(), Vocabulary::kitchen());
  CHECK(kinds(log) == std::vector<std::string>{"StoveOn", "StoveOff"});
  CHECK_NOTHROW(log.validate());
}

TEST_CASE("unknown sensors and kinds are configuration errors") {
  auto bad_sensor = parse_integration_rules("RULE r: IF lidar > 1 WITHIN 1 EMIT StoveOn DEBOUNCE 0\n");
  CHECK_THROWS_AS(integrate("d", {}, bad_sensor, kitchen_sensors(), Vocabulary::kitchen()), ConfigError);
  auto bad_kind = parse_integration_rules("RULE r: IF temp.stove > 1 WITHIN 1 EMIT Levitating DEBOUNCE 0\n");
  CHECK_THROWS_AS(integrate("d", {}, bad_kind, kitchen_sensors(), Vocabulary::kitchen()), VocabularyError);
}

TEST_CASE("removing a rule never adds events") {
  auto rules = parse_integration_rules(kitchen_integration_rules());
  std::vector<RawReading> stream;
  for (int i = 0; i < 60; ++i) {
    switch (i % 5) {
      case 0: stream.push_back(reading("pir.table", i % 2, "table")); break;
      case 1: stream.push_back(reading("press.chair", (i * 13) % 90)); break;
      case 2: stream.push_back(reading("temp.stove", (i * 17) % 120)); break;
      case 3: stream.push_back(reading("mag.fridge", (i / 5) % 2)); break;
      default: stream.push_back(reading("mag.panCabinet", (i / 3) % 2)); break;
    }
  }
  auto full = integrate("d", stream, rules, kitchen_sensors(), Vocabulary::kitchen());
  for (std::size_t drop = 0; drop < rules.size(); ++drop) {
    auto fewer = rules;
    fewer.erase(fewer.begin() + static_cast<long>(drop));
    auto reduced = integrate("d", stream, fewer, kitchen_sensors(), Vocabulary::kitchen());
    CHECK(reduced.events.size() <= full.events.size());
  }
}
