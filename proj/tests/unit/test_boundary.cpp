#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "faber/boundary.hpp"
#include "faber/errors.hpp"

using namespace faber;
using namespace faber::boundary;

namespace {

EventLog make_log(const std::vector<std::string>& kinds, std::uint64_t first_tick = 0) {
  EventLog log;
  log.day_id = "t";
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    log.events.push_back({Timestamp{first_tick + i, std::nullopt}, "s", kinds[i], std::nullopt});
  }
  return log;
}

std::size_t count_soft(const BoundaryProgram& bp) { return bp.program.soft.size(); }

}  // namespace

TEST_CASE("window programs have 2, 4 and 6 templates and five hard families") {
  auto vocab = Vocabulary::kitchen();
  auto p1 = build_program(1, vocab, iadl_labels());
  auto p2 = build_program(2, vocab, iadl_labels());
  auto p3 = build_program(3, vocab, iadl_labels());
  CHECK(count_soft(p1) == 2);
  CHECK(count_soft(p2) == 4);
  CHECK(count_soft(p3) == 6);
  for (const auto* p : {&p1, &p2, &p3}) CHECK(p->program.hard.size() == 5);
  CHECK(p3.program.soft[4].formula.plus_variables == std::vector<std::string>{"e1", "e2", "e3", "a"});
  CHECK_THROWS_AS(build_program(4, vocab, iadl_labels()), ParameterError);
  CHECK_THROWS_AS(build_program(0, vocab, iadl_labels()), ParameterError);
}

TEST_CASE("direct pairing of one start and one end") {
  auto log = make_log(std::vector<std::string>(25, "OpeningFridge"));
  Boundaries b;
  b.starts["PrepareMeal"] = {4};
  b.ends["PrepareMeal"] = {19};
  auto intervals = pair_boundaries(log, b, DetectOptions{});
  REQUIRE(intervals.size() == 1);
  CHECK(intervals[0].start.tick == 4);
  CHECK(intervals[0].end.tick == 19);
  CHECK(intervals[0].completed);
}

TEST_CASE("unmatched start closes after the threshold") {
  auto log = make_log(std::vector<std::string>(10, "OpeningFridge"));
  log.events[2].timestamp.wallclock = parse_wallclock("2024-01-01T08:00:00");
  Boundaries b;
  b.starts["PrepareMeal"] = {2};
  b.ends["PrepareMeal"] = {1};  // stray end before the start
  auto intervals = pair_boundaries(log, b, DetectOptions{});
  REQUIRE(intervals.size() == 1);
  CHECK_FALSE(intervals[0].completed);
  CHECK(intervals[0].end.wallclock == parse_wallclock("2024-01-01T09:30:00"));
  CHECK(intervals[0].end.tick == 2 + 90 * 60 / 30);
}

TEST_CASE("empty day yields no intervals") {
  auto bp = build_program(3, Vocabulary::kitchen(), iadl_labels());
  CHECK(detect(EventLog{}, bp).empty());
}

TEST_CASE("boundary evaluation with slack") {
  Annotation gold;
  gold.activity_intervals.push_back({"PrepareMeal", 10, 20});
  std::vector<ActivityInterval> exact = {{"PrepareMeal", {10, {}}, {20, {}}, true}};
  auto s = evaluate_boundaries(exact, gold, 0);
  CHECK(s.counts == Counts{2, 0, 0});
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 1.0);
  CHECK(s.f1 == 1.0);

  std::vector<ActivityInterval> off = {{"PrepareMeal", {12, {}}, {20, {}}, true}};
  CHECK(match_boundaries(off, gold, 1) == Counts{1, 1, 1});
  CHECK(match_boundaries(off, gold, 2) == Counts{2, 0, 0});

  // Incomplete intervals contribute only their start.
  std::vector<ActivityInterval> open = {{"PrepareMeal", {10, {}}, {200, {}}, false}};
  CHECK(match_boundaries(open, gold, 0) == Counts{1, 0, 1});
  // Wrong activity never matches.
  std::vector<ActivityInterval> other = {{"ConsumeMeal", {10, {}}, {20, {}}, true}};
  CHECK(match_boundaries(other, gold, 5) == Counts{0, 2, 2});
}

TEST_CASE("truth atoms carry the current-activity closure") {
  auto log = make_log({"OpeningFridge", "ClosingFridge", "StoveOn", "StoveOff", "OpeningFridge"});
  Annotation gold;
  gold.activity_intervals.push_back({"PrepareMeal", 1, 3});
  auto atoms = truth_atoms(log, gold);
  std::set<std::string> text;
  for (const auto& a : atoms) text.insert(mln::to_string(a));
  CHECK(text == std::set<std::string>{"startActivity(PrepareMeal,1)", "endActivity(PrepareMeal,3)",
                                      "currentActivity(PrepareMeal,1,1)", "currentActivity(PrepareMeal,1,2)"});
  auto bp = build_program(1, Vocabulary::kitchen(), {"PrepareMeal"});
  auto full = ground_full(bp, log);
  CHECK_FALSE(mln::first_violated_hard(full, mln::truth_assignment(full, atoms)).has_value());
}

TEST_CASE("chain solver matches exhaustive MAP on tiny boundary networks") {
  const std::vector<std::string> kinds = {"OpeningFridge", "ClosingFridge", "StoveOn"};
  std::mt19937_64 rng(17);
  int compared = 0;
  for (int trial = 0; trial < 60; ++trial) {
    int n = 1 + static_cast<int>(rng() % 3);
    std::size_t length = n == 1 ? 3 : 3;
    std::vector<std::string> seq;
    for (std::size_t i = 0; i < length; ++i) seq.push_back(kinds[rng() % kinds.size()]);
    auto log = make_log(seq);
    auto bp = build_program(n, Vocabulary::kitchen(), {"PrepareMeal"});
    for (auto& sf : bp.program.soft) {
      for (const auto& a : kinds) {
        for (const auto& b : kinds) {
          for (const auto& c : kinds) {
            std::vector<std::string> key;
            auto arity = sf.formula.plus_variables.size();
            if (arity >= 2) key.push_back(a);
            if (arity >= 3) key.push_back(b);
            if (arity >= 4) key.push_back(c);
            key.push_back("PrepareMeal");
            sf.weights[key] = static_cast<double>(static_cast<int>(rng() % 17) - 8) * 0.25;
          }
        }
      }
    }
    auto soft = ground_soft(bp, log);
    auto chain = solve_chain(soft);
    auto full = ground_full(bp, log);
    REQUIRE(full.atoms.size() <= 24);
    auto exact = mln::map_exact(full);
    CHECK(chain.objective == exact.objective);
    auto b = boundaries_of(soft, chain.assignment);
    CHECK(violated_family(log, b).empty());
    auto closed = closure_assignment(full, log, b);
    CHECK_FALSE(mln::first_violated_hard(full, closed).has_value());
    CHECK(mln::soft_objective(full, closed) == chain.objective);
    ++compared;
  }
  CHECK(compared == 60);
}

TEST_CASE("trained detector recovers a repeated pattern") {
  auto vocab = Vocabulary::kitchen();
  std::vector<std::string> day = {"PresenceNearKitchenTable", "OpeningMedicineCabinet",
                                  "RetrievingFromMedicineCabinet", "ReturningToMedicineCabinet",
                                  "ClosingMedicineCabinet", "LeavingKitchenTable", "OpeningFridge",
                                  "ClosingFridge"};
  auto log = make_log(day);
  Annotation gold;
  gold.activity_intervals.push_back({"TakeMedicines", 1, 4});
  std::vector<EventLog> logs(3, log);
  std::vector<Annotation> golds(3, gold);
  auto trained = train(build_program(3, vocab, iadl_labels()), logs, golds);
  auto intervals = detect(log, trained);
  REQUIRE(intervals.size() == 1);
  CHECK(intervals[0].activity == "TakeMedicines");
  CHECK(intervals[0].start.tick == 1);
  CHECK(intervals[0].end.tick == 4);
}

TEST_CASE("interval lines round-trip") {
  std::vector<ActivityInterval> ivs = {{"PrepareMeal", {3, {}}, {9, {}}, true},
                                       {"ConsumeMeal", {12, {}}, {132, parse_wallclock("2024-01-01T10:00:00")}, false}};
  std::stringstream buffer;
  write_intervals("d", ivs, buffer);
  CHECK(buffer.str() == "# day=d\nA;PrepareMeal;3;9\nA;ConsumeMeal;12;132;incomplete;2024-01-01T10:00:00\n");
  CHECK(read_intervals(buffer) == ivs);
}
