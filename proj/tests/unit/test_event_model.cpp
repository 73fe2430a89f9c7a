#include <random>
#include <sstream>

#include "doctest.h"
#include "faber/errors.hpp"
#include "faber/event_model.hpp"

using namespace faber;

namespace {

RawRecord record(std::string kind, std::uint64_t arrival) {
  return RawRecord{"s." + kind, std::move(kind), std::nullopt, arrival, std::nullopt};
}

}  // namespace

TEST_CASE("ingest assigns arrival-order ticks") {
  auto vocab = Vocabulary::kitchen();
  std::vector<RawRecord> records = {record("ClosingFridge", 7), record("OpeningFridge", 3),
                                    record("StoveOn", 9)};
  auto log = ingest_log("d1", records, vocab);
  REQUIRE(log.events.size() == 3);
  CHECK(log.events[0].kind == "OpeningFridge");
  CHECK(log.events[1].kind == "ClosingFridge");
  for (std::uint64_t i = 0; i < 3; ++i) CHECK(log.events[i].timestamp.tick == i);
}

TEST_CASE("ingest of empty input yields empty log") {
  auto log = ingest_log("d", {}, Vocabulary::kitchen());
  CHECK(log.events.empty());
}

TEST_CASE("ingest rejects kinds outside the vocabulary") {
  try {
    ingest_log("d", {record("FlyingCarpet", 0)}, Vocabulary::kitchen());
    FAIL("expected a vocabulary error");
  } catch (const VocabularyError& e) {
    CHECK(std::string(e.what()).find("FlyingCarpet") != std::string::npos);
  }
}

TEST_CASE("ingest is deterministic and keeps ties in input order") {
  std::mt19937_64 rng(11);
  auto kinds = Vocabulary::kitchen().kinds();
  std::vector<std::string> pool(kinds.begin(), kinds.end());
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RawRecord> records;
    for (int i = 0; i < 40; ++i) records.push_back(record(pool[rng() % pool.size()], rng() % 20));
    auto a = ingest_log("d", records, Vocabulary::kitchen());
    auto b = ingest_log("d", records, Vocabulary::kitchen());
    CHECK(a == b);
    CHECK_NOTHROW(a.validate());
  }
}

TEST_CASE("event log round-trips through the line format") {
  EventLog log;
  log.day_id = "g1-s01";
  log.events.push_back({Timestamp{0, parse_wallclock("2024-03-01T08:05:00")}, "mag.fridge", "OpeningFridge", 1.0});
  log.events.push_back({Timestamp{1, parse_wallclock("2024-03-01T08:05:07")}, "milk", "RetrievingFromFridge", {}});
  log.events.push_back({Timestamp{5, std::nullopt}, "temp.stove", "StoveOn", 61.5});
  std::stringstream buffer;
  write_log(log, buffer);
  CHECK(buffer.str().find("0;2024-03-01T08:05:00;mag.fridge;OpeningFridge;1\n") != std::string::npos);
  CHECK(read_log(buffer) == log);
}

TEST_CASE("log reader enforces the total order") {
  std::istringstream dup("0;-;a;StoveOn;-\n0;-;a;StoveOff;-\n");
  CHECK_THROWS_AS(read_log(dup), OrderError);
  std::istringstream back("3;-;a;StoveOn;-\n2;-;a;StoveOff;-\n");
  CHECK_THROWS_AS(read_log(back), OrderError);
}

TEST_CASE("malformed log lines report their line number") {
  std::istringstream in("# day=x\n0;-;a;StoveOn;-\n1;-;a;StoveOff\n");
  try {
    read_log(in);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("annotations round-trip and validate") {
  Annotation ann;
  ann.day_id = "g2-s03";
  ann.prescriptions.push_back({"aspirin", 8 * 3600, 10 * 3600});
  ann.activity_intervals.push_back({"PrepareMeal", 4, 19});
  ann.anomalies.push_back({"NC1", "fridge", 12});
  ann.anomalies.push_back({"C1", "aspirin", std::nullopt});
  std::stringstream buffer;
  write_annotation(ann, buffer);
  CHECK(read_annotation(buffer) == ann);

  std::istringstream bad("A;PrepareMeal;9;9\n");
  CHECK_THROWS_AS(read_annotation(bad), OrderError);
  std::istringstream label("A;Juggling;1;9\n");
  CHECK_THROWS_AS(read_annotation(label), VocabularyError);
}

TEST_CASE("clock helpers") {
  CHECK(parse_clock("08:12:35") == 8 * 3600 + 12 * 60 + 35);
  CHECK(parse_clock("07:30") == 7 * 3600 + 30 * 60);
  CHECK_FALSE(parse_clock("25:00").has_value());
  CHECK(format_clock(8 * 3600 + 5) == "08:00:05");
  CHECK(seconds_of_day(Timestamp{10, std::nullopt}, TimeBase{30}) == 300);
  CHECK(seconds_of_day(Timestamp{10, parse_wallclock("2024-03-01T08:00:00")}, TimeBase{}) == 8 * 3600);
  CHECK(format_wallclock(*parse_wallclock("2024-12-31T23:59:59")) == "2024-12-31T23:59:59");
}
