#pragma once

// Activity boundary detection: the windowed MLN program, per-day MAP and
// post-processing into activity intervals.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "faber/event_model.hpp"
#include "faber/metrics.hpp"
#include "faber/mln.hpp"

namespace faber::boundary {

/// Hard formula ids, in program order.
inline constexpr const char* kStartNotEnd = "start_not_end";
inline constexpr const char* kEndNotStart = "end_not_start";
inline constexpr const char* kSingleStart = "single_start";
inline constexpr const char* kStartOpens = "start_opens";
inline constexpr const char* kCarryOn = "carry_on";

struct BoundaryProgram {
  int n = 3;
  mln::MlnProgram program;
};

/// n in {1,2,3}: 2, 4 or 6 soft window templates plus the five hard
/// families. Throws ParameterError for other n.
BoundaryProgram build_program(int n, const Vocabulary& vocabulary, const std::vector<std::string>& activities);

/// event(kind, tick) per event and nextEvent between consecutive events.
std::vector<mln::GroundFact> evidence_for(const EventLog& log);

/// Gold start/end atoms plus the minimal currentActivity closure. Boundaries
/// whose tick is missing from the log move inward to the nearest logged
/// tick of the interval; intervals with no logged tick are skipped.
std::vector<mln::GroundFact> truth_atoms(const EventLog& log, const Annotation& gold);

/// Full grounding, including the currentActivity atoms and hard clauses.
mln::GroundNetwork ground_full(const BoundaryProgram& bp, const EventLog& log);
/// Soft clauses only; atoms are the start/end atoms they mention.
mln::GroundNetwork ground_soft(const BoundaryProgram& bp, const EventLog& log);

/// Exact MAP for boundary networks. Every soft clause must be a unit clause
/// over a startActivity/endActivity atom; the hard families then reduce to
/// a two-state automaton per activity solved by dynamic programming. Ties
/// prefer no boundary at the earliest tick.
mln::MapState solve_chain(const mln::GroundNetwork& soft_net);

/// Boundary pattern of one activity on the ordered ticks of a day.
struct Boundaries {
  std::map<std::string, std::vector<std::uint64_t>> starts;
  std::map<std::string, std::vector<std::uint64_t>> ends;
};

Boundaries boundaries_of(const mln::GroundNetwork& net, const mln::Assignment& assignment);

/// Assignment to every atom of `full` with minimal currentActivity closure.
mln::Assignment closure_assignment(const mln::GroundNetwork& full, const EventLog& log, const Boundaries& b);

/// Direct check of the five hard families on a boundary pattern; returns
/// the id of the first violated family or an empty string.
std::string violated_family(const EventLog& log, const Boundaries& b);

enum class Solver { kChain, kSearch };

struct TrainOptions {
  mln::LearnOptions learn;
};

/// Learns window weights from (log, gold) days with the chain solver.
BoundaryProgram train(const BoundaryProgram& untrained, std::span<const EventLog> logs,
                      std::span<const Annotation> gold, const TrainOptions& options = {});

struct ActivityInterval {
  std::string activity;
  Timestamp start;
  Timestamp end;
  bool completed = true;

  friend bool operator==(const ActivityInterval&, const ActivityInterval&) = default;
};

/// Maximum duration per activity, in seconds.
using Thresholds = std::map<std::string, std::int64_t>;
/// PrepareMeal 90 min, ConsumeMeal 60 min, TakeMedicines 15 min.
Thresholds default_thresholds();

struct DetectOptions {
  Thresholds thresholds = default_thresholds();
  TimeBase time_base;
  Solver solver = Solver::kChain;
  std::uint64_t seed = 1;  // map_search only
  mln::SearchParams search;
  /// Re-ground with hard clauses and check the MAP state against them.
  bool validate = true;
};

/// Pairs each start with the first later end of the same activity; stray
/// ends are dropped; unmatched starts close at start + threshold.
std::vector<ActivityInterval> pair_boundaries(const EventLog& log, const Boundaries& b, const DetectOptions& options);

std::vector<ActivityInterval> detect(const EventLog& log, const BoundaryProgram& trained,
                                     const DetectOptions& options = {});

/// Converts detected intervals into gold-style intervals for downstream rules.
std::vector<LabeledInterval> as_labeled(const std::vector<ActivityInterval>& intervals);

struct BoundaryScore {
  Counts counts;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 0.0;
};

/// Starts of all intervals and ends of completed ones are matched one-to-one
/// against gold boundaries of the same activity and kind within +-slack.
Counts match_boundaries(const std::vector<ActivityInterval>& predicted, const Annotation& gold, std::uint64_t slack);
BoundaryScore evaluate_boundaries(const std::vector<ActivityInterval>& predicted, const Annotation& gold,
                                  std::uint64_t slack);

/// `A;label;start;end` lines; incomplete intervals append `;incomplete`.
void write_intervals(const std::string& day_id, const std::vector<ActivityInterval>& intervals, std::ostream& out);
std::vector<ActivityInterval> read_intervals(std::istream& in);

}  // namespace faber::boundary
