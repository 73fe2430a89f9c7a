#pragma once

// Rule-based anomaly recognition: a small Datalog dialect with stratified
// negation as failure, temporal comparisons and duration arithmetic.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "faber/boundary.hpp"
#include "faber/event_model.hpp"

namespace faber::anomaly {

// ---------------------------------------------------------------------------
// Values and facts

struct Value {
  enum class Kind { kNull, kSymbol, kNumber, kTime, kDuration };
  Kind kind = Kind::kNull;
  std::string symbol;
  double number = 0.0;
  std::int64_t seconds = 0;          // time of day or duration length
  std::optional<std::uint64_t> tick;  // time values only

  static Value null() { return {}; }
  static Value sym(std::string s);
  static Value num(double v);
  static Value time(std::int64_t seconds_of_day, std::optional<std::uint64_t> tick = std::nullopt);
  static Value duration(std::int64_t seconds);

  bool is_null() const { return kind == Kind::kNull; }

  // Structural order used for fact storage; not the temporal order.
  friend bool operator==(const Value&, const Value&) = default;
  friend std::strong_ordering operator<=>(const Value& a, const Value& b);
};

std::string to_string(const Value& v);

struct Fact {
  std::string predicate;
  std::vector<Value> args;

  friend bool operator==(const Fact&, const Fact&) = default;
  friend auto operator<=>(const Fact&, const Fact&) = default;
};

std::string to_string(const Fact& f);

using FactSet = std::set<Fact>;

// ---------------------------------------------------------------------------
// Rules

struct Term {
  bool variable = false;
  std::string name;  // variable name
  Value value;       // constant
};

/// Sum of signed terms, e.g. `T2 - T1` or `Ts - 30min`.
struct Expr {
  std::vector<std::pair<int, Term>> parts;
};

enum class CompareOp { kLess, kLessEq, kGreater, kGreaterEq, kEq, kNeq };

struct Atom {
  std::string predicate;
  std::vector<Term> args;
};

struct Goal {
  enum class Kind { kAtom, kNot, kCompare };
  Kind kind = Kind::kAtom;
  Atom atom;
  std::vector<Goal> negated;
  Expr lhs, rhs;
  CompareOp op = CompareOp::kEq;
};

struct Rule {
  std::string id;
  Atom head;
  std::vector<Goal> body;
  int line = 0;
};

/// Parses `[ID:] head [:- body].` rules. Body goals are separated by `,`,
/// `&` or `∧`; `not(...)` wraps a negated conjunction; comparisons may be
/// chained (`T1 < T < T2`). Uppercase-initial identifiers and `_` are
/// variables unless followed by `(`; predicate names are normalized to a
/// lowercase first letter. Literals: `08:05:00`, `@12`, `@12/08:05:00`,
/// `45min`, `10s`, `2h`, numbers, `null`, `'Quoted'`.
std::vector<Rule> parse_rules(std::string_view text);

/// Ground facts in the same syntax (rules without body or variables).
FactSet parse_facts(std::string_view text);

// ---------------------------------------------------------------------------
// Evaluation

struct Anomaly {
  std::string day_id;
  std::string rule_id;
  std::string category;  // nca, co, cr, wa, rep
  Value object;
  Value time;
};

/// Full category name for a code: nca -> non-critical, co ->
/// critical-omission, cr -> critical-replacement, wa -> wrong-activity,
/// rep -> repetition.
std::string category_name(std::string_view code);

/// Derives all anomaly heads. Output is ordered by rule id (natural order),
/// then time (null first), then object. Throws StratificationError or
/// SafetyError for ill-formed rule sets.
std::vector<Anomaly> evaluate(const std::vector<Rule>& rules, const FactSet& facts, const std::string& day_id = {});

/// Every fact derivable from `facts` under `rules`.
FactSet saturate(const std::vector<Rule>& rules, const FactSet& facts);

// ---------------------------------------------------------------------------
// Builtin rule set and home model

/// Thresholds in seconds: nc1_timeout, c4_grace, c5_lookback, c6_deadline,
/// c7_lead.
struct RuleConfig {
  std::map<std::string, std::int64_t> thresholds;
};

RuleConfig default_rule_config();

/// Exactly the eleven rules NC1-NC4 and C1-C7, in that order. Throws
/// ConfigError when a threshold is missing or negative.
std::vector<Rule> builtin_rule_set(const RuleConfig& config);
std::string builtin_rule_text(const RuleConfig& config);

struct Mealtime {
  std::string meal;
  std::int64_t from = 0;  // seconds of day
  std::int64_t to = 0;
};

/// Object catalog with category atoms.
struct HomeModel {
  std::set<std::string> medicines;
  std::set<std::string> foods;
  std::set<std::string> refrigerated_foods;
  std::set<std::string> cook_foods;
  std::set<std::string> repositories;
  std::set<std::string> non_refrigerated_storage;
  std::set<std::string> medicine_cabinets;
  std::vector<Mealtime> mealtimes;

  static HomeModel kitchen();
};

/// Lowercase-initial constant for an IADL label or repository suffix.
std::string constant_name(std::string_view label);

/// Facts of one day: actions and events from the log, stove holds
/// intervals, activity boundaries, prescriptions, mealtimes and categories.
FactSet build_facts(const EventLog& log, const std::vector<boundary::ActivityInterval>& intervals,
                    const std::vector<Prescription>& prescriptions, const HomeModel& home, const TimeBase& base);

/// Gold intervals resolved to timestamps of the log.
std::vector<boundary::ActivityInterval> gold_intervals(const EventLog& log, const Annotation& gold);

/// `{"day_id":...,"rule_id":...,"category":...,"object":...,"time":...}`;
/// time is a tick, a clock string or null.
std::string to_json_line(const Anomaly& a);

LabeledAnomaly to_labeled(const Anomaly& a);

}  // namespace faber::anomaly
