#include <random>
#include <set>

#include "doctest.h"
#include "faber/errors.hpp"
#include "faber/mln.hpp"
#include "mln_oracles.hpp"

using namespace faber;
using namespace faber::mln;

namespace {

// Two-event sequence example: one soft template, one mutual-exclusion axiom.
const char* kExampleProgram = R"(
types:
  event
  time
  activity = {SetTheTable, WashDishes}
predicates:
  observable event(event, time)
  observable nextEvent(time, time)
  hidden currentActivity(activity, time)
soft:
  f1: event(+ej, ti) & event(+ek, tk) & nextEvent(ti, tk) => currentActivity(+a, ti)
hard:
  f2: currentActivity(SetTheTable, t) => !currentActivity(WashDishes, t)
)";

std::vector<GroundFact> example_evidence() {
  return {{"event", {"ClosingSilverwareDrawer", "0"}},
          {"event", {"OpeningGlasswareCabinet", "1"}},
          {"nextEvent", {"0", "1"}}};
}

GroundNetwork tiny(std::vector<std::pair<std::vector<GroundLiteral>, double>> soft,
                   std::vector<std::vector<GroundLiteral>> hard, std::size_t atoms) {
  GroundNetwork net;
  for (std::size_t i = 0; i < atoms; ++i) net.atoms.push_back({"x", {std::to_string(i)}});
  net.hard_ids = {"h"};
  net.soft_ids = {"s"};
  net.weight_keys.push_back({0, {}});
  for (auto& [lits, w] : soft) net.soft.push_back({GroundClause{lits, 0}, w, 0, 1.0});
  for (auto& lits : hard) net.hard.push_back(GroundClause{lits, 0});
  return net;
}

}  // namespace

TEST_CASE("soft template with plus variables") {
  auto p = parse_program(R"(
types:
  event
  time
  activity
predicates:
  observable event(event, time)
  hidden startActivity(activity, time)
  hidden endActivity(activity, time)
soft: event(+e,t) => startActivity(+a,t)
hard: startActivity(a,t) => !endActivity(a,t)
)");
  REQUIRE(p.soft.size() == 1);
  CHECK(p.soft[0].formula.plus_variables == std::vector<std::string>{"e", "a"});
  REQUIRE(p.hard.size() == 1);
  CHECK(p.hard[0].clauses.size() == 1);
  CHECK(p.hard[0].clauses[0].size() == 2);
}

TEST_CASE("type errors name the predicate and position") {
  const char* header = "types:\n  a\n  b\npredicates:\n  hidden p(a)\n  hidden q(b)\n";
  try {
    parse_program(std::string(header) + "hard: p(x, y)\n");
    FAIL("expected type error");
  } catch (const TypeError& e) {
    CHECK(std::string(e.what()).find("'p' expects 1 arguments, got 2") != std::string::npos);
  }
  try {
    parse_program(std::string(header) + "hard: p(x) => q(x)\n");
    FAIL("expected type error");
  } catch (const TypeError& e) {
    CHECK(std::string(e.what()).find("argument 1") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_program(std::string(header) + "hard: p(x) => \n"), ParseError);
}

TEST_CASE("syntax errors carry a column") {
  try {
    parse_program("types:\n  a\npredicates:\n  hidden p(a)\nhard: p(x)) \n");
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 5);
    CHECK(e.column() > 0);
  }
}

TEST_CASE("program text round-trips including the weight block") {
  auto p = parse_program(kExampleProgram);
  p.soft[0].weights[{"ClosingSilverwareDrawer", "OpeningGlasswareCabinet", "SetTheTable"}] = 1.5;
  auto text = write_program(p);
  CHECK(text.find("weights:") != std::string::npos);
  auto q = parse_program(text);
  CHECK(write_program(q) == text);
  CHECK(q.soft[0].weight({"ClosingSilverwareDrawer", "OpeningGlasswareCabinet", "SetTheTable"}) == 1.5);
  CHECK(q.soft[0].weight({"X", "Y", "WashDishes"}) == 0.0);
}

TEST_CASE("grounding counts follow the domain size") {
  auto p = parse_program(R"(
types:
  thing = {A, B, C}
predicates:
  hidden p(thing)
hard: p(x) | !p(x) | p(x)
soft: 1.0 p(x)
)");
  auto net = ground(p, {});
  CHECK(net.atoms.size() == 3);
  CHECK(net.soft.size() == 3);
  CHECK(net.hard.empty());  // tautologies vanish
}

TEST_CASE("empty program and evidence give an empty network") {
  auto net = ground(parse_program("types:\n  t\npredicates:\n  hidden p(t)\nsoft: 1 p(x)\n"), {});
  CHECK(net.atoms.empty());
  CHECK(net.soft.empty());
  CHECK(net.hard.empty());
}

TEST_CASE("two-event example grounds into competing activities") {
  auto p = parse_program(kExampleProgram);
  auto net = ground(p, example_evidence());
  // currentActivity over {SetTheTable, WashDishes} x {0, 1}.
  CHECK(net.atoms.size() == 4);
  REQUIRE(net.soft.size() == 2);
  std::set<std::string> implied;
  for (const auto& wc : net.soft) {
    REQUIRE(wc.clause.literals.size() == 1);
    CHECK(wc.clause.literals[0].positive);
    implied.insert(to_string(net.atoms[wc.clause.literals[0].atom]));
  }
  CHECK(implied == std::set<std::string>{"currentActivity(SetTheTable,0)", "currentActivity(WashDishes,0)"});
  // Making both true violates the hard grounding at time 0.
  Assignment both(net.atoms.size(), 0);
  for (const auto& wc : net.soft) both[wc.clause.literals[0].atom] = 1;
  CHECK(first_violated_hard(net, both).has_value());
}

TEST_CASE("higher weight wins the two-event example") {
  auto p = parse_program(kExampleProgram);
  p.soft[0].weights[{"ClosingSilverwareDrawer", "OpeningGlasswareCabinet", "SetTheTable"}] = 2.0;
  p.soft[0].weights[{"ClosingSilverwareDrawer", "OpeningGlasswareCabinet", "WashDishes"}] = 1.0;
  auto net = ground(p, example_evidence());
  auto state = map_exact(net);
  auto set = net.find_atom({"currentActivity", {"SetTheTable", "0"}});
  auto wash = net.find_atom({"currentActivity", {"WashDishes", "0"}});
  REQUIRE(set);
  REQUIRE(wash);
  CHECK(state.assignment[*set] == 1);
  CHECK(state.assignment[*wash] == 0);
  CHECK(state.objective == 2.0);
}

TEST_CASE("evidence falsifying a body removes the grounding") {
  auto p = parse_program(kExampleProgram);
  auto evidence = example_evidence();
  evidence.pop_back();  // no nextEvent
  CHECK(ground(p, evidence).soft.empty());
}

TEST_CASE("grounding budget raises a capacity error") {
  auto p = parse_program("types:\n  t\npredicates:\n  observable o(t)\n  hidden p(t, t)\nsoft: 1 p(x, y)\n");
  std::vector<GroundFact> evidence;
  for (int i = 0; i < 40; ++i) evidence.push_back({"o", {std::to_string(i)}});
  CHECK_THROWS_AS(ground(p, evidence, GroundingOptions{1000}), CapacityError);
  CHECK(ground(p, evidence, GroundingOptions{1600}).soft.size() == 1600);
}

TEST_CASE("mutual exclusion keeps the heavier atom") {
  auto net = tiny({{{{0, true}}, 2.0}, {{{1, true}}, 1.0}}, {{{0, false}, {1, false}}}, 2);
  auto s = map_exact(net);
  CHECK(s.assignment == Assignment{1, 0});
  CHECK(s.objective == 2.0);
}

TEST_CASE("no soft clauses means all false") {
  auto net = tiny({}, {{{0, true}, {1, false}}}, 3);
  auto s = map_exact(net);
  CHECK(s.assignment == Assignment{0, 0, 0});
  CHECK(s.objective == 0.0);
}

TEST_CASE("infeasible and oversized networks are rejected") {
  auto net = tiny({}, {{{0, true}}, {{0, false}}}, 1);
  try {
    map_exact(net);
    FAIL("expected infeasibility");
  } catch (const InfeasibleError& e) {
    CHECK(std::string(e.what()).find("x(0)") != std::string::npos);
  }
  CHECK_THROWS_AS(map_search(net, 1, SearchParams{200, 2, 0.1}), SearchFailure);
  CHECK_THROWS_AS(map_exact(tiny({}, {}, 25)), CapacityError);
}

TEST_CASE("single soft unit clause is made true by local search") {
  auto net = tiny({{{{0, true}}, 5.0}}, {}, 1);
  auto s = map_search(net, 7);
  CHECK(s.assignment == Assignment{1});
  CHECK(s.objective == 5.0);
}

TEST_CASE("map_exact agrees with exhaustive enumeration") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 12;
    auto net = oracle::random_network(rng, n, rng() % 20, rng() % 8);
    auto truth = oracle::enumerate(net);
    if (!truth) {
      CHECK_THROWS_AS(map_exact(net), InfeasibleError);
      continue;
    }
    auto s = map_exact(net);
    CHECK(s.objective == truth->objective);
    CHECK(s.assignment == oracle::to_assignment(truth->bits, n));
    CHECK_FALSE(first_violated_hard(net, s.assignment).has_value());
    CHECK(soft_objective(net, s.assignment) == s.objective);
  }
}

TEST_CASE("doubling weights leaves the exact argmax unchanged") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    auto net = oracle::random_network(rng, 8, 15, 3);
    if (!oracle::enumerate(net)) continue;
    auto a = map_exact(net);
    for (auto& wc : net.soft) wc.weight *= 2;
    auto b = map_exact(net);
    CHECK(a.assignment == b.assignment);
    CHECK(b.objective == 2 * a.objective);
  }
}

TEST_CASE("map_search is deterministic in its seed") {
  std::mt19937_64 rng(5);
  auto net = oracle::random_network(rng, 16, 40, 4);
  CHECK(map_search(net, 3) == map_search(net, 3));
}

TEST_CASE("perceptron learns a positive weight for a consistently true binding") {
  auto p = parse_program(R"(
types:
  kind
  time
  label = {Cook, Eat}
predicates:
  observable event(kind, time)
  hidden act(label, time)
soft:
  s1: event(+k, t) => act(+l, t)
hard:
  h1: act(Cook, t) => !act(Eat, t)
)");
  using Day = std::pair<std::vector<GroundFact>, std::vector<GroundFact>>;
  std::vector<Day> days = {
      {{{"event", {"StoveOn", "0"}}, {"event", {"Sitting", "1"}}}, {{"act", {"Cook", "0"}}, {"act", {"Eat", "1"}}}},
  };
  auto learned = learn_weights(p, std::span<const Day>(days)).program;
  CHECK(learned.soft[0].weight({"StoveOn", "Cook"}) > 0.0);
  CHECK(learned.soft[0].weight({"Sitting", "Eat"}) > 0.0);
  CHECK(learned.soft[0].weight({"StoveOn", "Eat"}) <= 0.0);
  // Never observed in training.
  CHECK(learned.soft[0].weights.count({"Shower", "Cook"}) == 0);
  CHECK(learned.soft[0].weight({"Shower", "Cook"}) == 0.0);
  CHECK(learned.hard.size() == 1);
}

TEST_CASE("learning with no soft formulae returns the program unchanged") {
  auto p = parse_program("types:\n  t\npredicates:\n  hidden p(t)\nhard: p(A) => p(B)\n");
  using Day = std::pair<std::vector<GroundFact>, std::vector<GroundFact>>;
  std::vector<Day> days = {{{}, {}}};
  auto out = learn_weights(p, std::span<const Day>(days)).program;
  CHECK(write_program(out) == write_program(p));
}

TEST_CASE("labels violating a hard formula are rejected by name") {
  auto p = parse_program(kExampleProgram);
  using Day = std::pair<std::vector<GroundFact>, std::vector<GroundFact>>;
  std::vector<Day> days = {
      {example_evidence(), {{"currentActivity", {"SetTheTable", "0"}}, {"currentActivity", {"WashDishes", "0"}}}}};
  try {
    learn_weights(p, std::span<const Day>(days));
    FAIL("expected label error");
  } catch (const LabelError& e) {
    CHECK(std::string(e.what()).find("'f2'") != std::string::npos);
  }
}

TEST_CASE("truth objective is monitored per epoch") {
  auto p = parse_program(kExampleProgram);
  using Day = std::pair<std::vector<GroundFact>, std::vector<GroundFact>>;
  std::vector<Day> days = {{example_evidence(), {{"currentActivity", {"SetTheTable", "0"}}}}};
  auto result = learn_weights(p, std::span<const Day>(days));
  REQUIRE(result.epochs.size() == 10);
  // The first epoch makes the one mistake; the update then rewards the truth.
  CHECK(result.epochs.front().mistakes == 1);
  CHECK(result.epochs.front().truth_objective > 0.0);
  CHECK(result.epochs.back().mistakes == 0);
  // Once predictions are correct only the L2 shrinkage moves the weights.
  CHECK(result.epochs.back().truth_objective > 0.09);
}
