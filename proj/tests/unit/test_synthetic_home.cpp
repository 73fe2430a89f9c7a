#include <filesystem>
#include <map>
#include <sstream>

#include "doctest.h"
#include "faber/anomaly.hpp"
#include "faber/errors.hpp"
#include "faber/synthetic_home.hpp"

using namespace faber;
using namespace faber::synth;

namespace {

const std::vector<GeneratedDay>& paper_days() {
  static const auto days = generate(ScenarioSpec::paper_profile_spec());
  return days;
}

std::string serialize(const std::vector<GeneratedDay>& days) {
  std::ostringstream out;
  for (const auto& d : days) {
    write_log(d.log, out);
    write_annotation(d.gold, out);
  }
  return out.str();
}

std::vector<LabeledAnomaly> recovered(const GeneratedDay& d) {
  auto facts = anomaly::build_facts(d.log, anomaly::gold_intervals(d.log, d.gold), d.gold.prescriptions,
                                    anomaly::HomeModel::kitchen(), TimeBase{});
  std::vector<LabeledAnomaly> out;
  for (const auto& a : anomaly::evaluate(anomaly::builtin_rule_set(anomaly::default_rule_config()), facts))
    out.push_back(anomaly::to_labeled(a));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("reference profile: 21 days with the expected group totals") {
  const auto& days = paper_days();
  REQUIRE(days.size() == 21);
  CHECK(days.front().log.day_id == "g1-s01");
  CHECK(days.back().log.day_id == "g2-s14");
  std::map<std::string, std::map<bool, unsigned>> totals;
  std::size_t instances = 0;
  for (const auto& d : days) {
    CHECK(d.injected.size() == d.gold.anomalies.size());
    for (const auto& a : d.gold.anomalies) ++totals[d.group][is_critical(a.code)];
    instances += d.gold.activity_intervals.size();
    CHECK_NOTHROW(d.log.validate());
    CHECK_NOTHROW(d.gold.validate());
  }
  CHECK(totals["g1"][false] == 7);
  CHECK(totals["g1"][true] == 0);
  CHECK(totals["g2"][false] == 29);
  CHECK(totals["g2"][true] == 28);
  CHECK(instances > 150);
}

TEST_CASE("generation is deterministic in the seed") {
  auto spec = ScenarioSpec::paper_profile_spec();
  CHECK(serialize(generate(spec)) == serialize(paper_days()));
  spec.seed = 7;
  CHECK(serialize(generate(spec)) != serialize(paper_days()));
}

TEST_CASE("engine on gold boundaries recovers exactly the injected anomalies") {
  for (const auto& d : paper_days()) {
    INFO(d.log.day_id);
    CHECK(recovered(d) == d.gold.anomalies);
  }
}

TEST_CASE("gold boundaries coincide with emitted step events") {
  for (const auto& d : paper_days()) {
    std::set<std::uint64_t> ticks;
    for (const auto& e : d.log.events) ticks.insert(e.timestamp.tick);
    for (const auto& iv : d.gold.activity_intervals) {
      CHECK(ticks.count(iv.start) == 1);
      CHECK(ticks.count(iv.end) == 1);
    }
  }
}

TEST_CASE("spec validation and impossible injections") {
  auto spec = ScenarioSpec::paper_profile_spec();
  spec.groups[0].totals["C1"] = 1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);

  spec = ScenarioSpec::paper_profile_spec();
  spec.scripts["consume"].push_back({"FlyingCarpet", "", 1, 2});
  CHECK_THROWS_AS(spec.validate(), ConfigError);

  // No stove in any script: C7 cannot be placed.
  spec = ScenarioSpec::paper_profile_spec();
  spec.cooked_probability = {{"breakfast", 0.0}, {"lunch", 0.0}, {"dinner", 0.0}};
  try {
    generate(spec);
    FAIL("expected GenerationError");
  } catch (const GenerationError& e) {
    CHECK(std::string(e.what()).find("g2") != std::string::npos);
  }

  CHECK_THROWS_AS(ScenarioSpec::parse("{\"mode\": \"sometimes\"}"), ConfigError);
  CHECK_THROWS_AS(ScenarioSpec::parse("{not json"), ConfigError);
  CHECK(ScenarioSpec::parse("{\"seed\": 9}").seed == 9);
}

TEST_CASE("rate mode injects per day") {
  auto spec = ScenarioSpec::paper_profile_spec();
  spec.paper_profile = false;
  spec.groups = {{"g1", 3, {}, {{"NC1", 1.0}}}, {"g2", 3, {}, {{"C5", 1.0}, {"C2", 1.0}}}};
  auto days = generate(spec);
  REQUIRE(days.size() == 6);
  for (const auto& d : days) {
    std::multiset<std::string> codes;
    for (const auto& a : d.gold.anomalies) codes.insert(a.code);
    if (d.group == "g1") CHECK(codes == std::multiset<std::string>{"NC1"});
    else CHECK(codes == std::multiset<std::string>{"C2", "C5"});
    CHECK(recovered(d) == d.gold.anomalies);
  }
}

TEST_CASE("sensor failures drop events without touching gold") {
  auto days = paper_days();
  CHECK(serialize(inject_sensor_failures(days, {})) == serialize(days));

  auto all = inject_sensor_failures(days, {1, {{"g2-s01", "mag.fridge", 1.0, {}}}});
  for (const auto& e : all[7].log.events) CHECK(e.sensor_id != "mag.fridge");
  CHECK(all[7].gold == days[7].gold);

  std::size_t idx = 0;
  while (days[0].log.events[idx].sensor_id != "stove" && idx + 1 < days[0].log.events.size()) ++idx;
  auto one = inject_sensor_failures(days, {0, {{"g1-s01", days[0].log.events[idx].sensor_id, std::nullopt, {idx}}}});
  CHECK(one[0].log.events.size() + 1 == days[0].log.events.size());

  CHECK_THROWS_AS(inject_sensor_failures(days, {0, {{"nobody", "mag.fridge", 1.0, {}}}}), ConfigError);
  CHECK_THROWS_AS(inject_sensor_failures(days, {0, {{"g1-s01", "mag.moon", 1.0, {}}}}), ConfigError);
}

TEST_CASE("days round-trip through files") {
  auto dir = std::filesystem::temp_directory_path() / "faber_synth_roundtrip";
  std::filesystem::remove_all(dir);
  save_days(paper_days(), dir);
  auto back = load_days(dir);
  REQUIRE(back.size() == paper_days().size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].log == paper_days()[i].log);
    CHECK(back[i].gold == paper_days()[i].gold);
    CHECK(back[i].group == paper_days()[i].group);
  }
  std::filesystem::remove_all(dir);
}
