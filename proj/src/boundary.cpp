#include "faber/boundary.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "faber/errors.hpp"
#include "text_util.hpp"

namespace faber::boundary {

namespace {

constexpr const char* kStart = "startActivity";
constexpr const char* kEnd = "endActivity";
constexpr const char* kCurrent = "currentActivity";

const char* kPairTemplates[] = {
    "start_pair_first: event(+e1, t1) & event(+e2, t2) & nextEvent(t1, t2) => startActivity(+a, t1)",
    "start_pair_second: event(+e1, t1) & event(+e2, t2) & nextEvent(t1, t2) => startActivity(+a, t2)",
    "end_pair_first: event(+e1, t1) & event(+e2, t2) & nextEvent(t1, t2) => endActivity(+a, t1)",
    "end_pair_second: event(+e1, t1) & event(+e2, t2) & nextEvent(t1, t2) => endActivity(+a, t2)",
};

const char* kTripleTemplates[] = {
    "start_triple_mid: event(+e1, t1) & event(+e2, t2) & event(+e3, t3) & nextEvent(t1, t2) & nextEvent(t2, t3)"
    " => startActivity(+a, t2)",
    "end_triple_mid: event(+e1, t1) & event(+e2, t2) & event(+e3, t3) & nextEvent(t1, t2) & nextEvent(t2, t3)"
    " => endActivity(+a, t2)",
};

std::string tick_name(std::uint64_t t) { return std::to_string(t); }

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParameterError("not a tick: '" + std::string(s) + "'");
  return v;
}

std::vector<std::uint64_t> ticks_of(const EventLog& log) {
  std::vector<std::uint64_t> ticks;
  ticks.reserve(log.events.size());
  for (const auto& e : log.events) ticks.push_back(e.timestamp.tick);
  return ticks;
}

// Per activity: boundary flags aligned with the ordered ticks.
struct Pattern {
  std::vector<char> start;
  std::vector<char> end;
};

std::map<std::string, Pattern> pattern_of(const std::vector<std::uint64_t>& ticks, const Boundaries& b) {
  std::map<std::string, Pattern> out;
  auto position = [&](std::uint64_t t) -> std::size_t {
    auto it = std::lower_bound(ticks.begin(), ticks.end(), t);
    if (it == ticks.end() || *it != t) throw ParameterError("boundary at tick " + std::to_string(t) + " not in log");
    return static_cast<std::size_t>(it - ticks.begin());
  };
  auto touch = [&](const std::string& a) -> Pattern& {
    auto& p = out[a];
    if (p.start.empty()) {
      p.start.assign(ticks.size(), 0);
      p.end.assign(ticks.size(), 0);
    }
    return p;
  };
  for (const auto& [a, ts] : b.starts) {
    auto& p = touch(a);
    for (auto t : ts) p.start[position(t)] = 1;
  }
  for (const auto& [a, ts] : b.ends) {
    auto& p = touch(a);
    for (auto t : ts) p.end[position(t)] = 1;
  }
  return out;
}

// Minimal currentActivity closure: (activity, start position, position).
struct CurrentSpan {
  std::string activity;
  std::size_t from;
  std::size_t to;  // inclusive
};

std::vector<CurrentSpan> closure_spans(const std::map<std::string, Pattern>& patterns) {
  std::vector<CurrentSpan> spans;
  for (const auto& [a, p] : patterns) {
    for (std::size_t s = 0; s < p.start.size(); ++s) {
      if (!p.start[s]) continue;
      std::size_t t = s;
      while (t + 1 < p.start.size() && !p.end[t + 1]) ++t;
      spans.push_back({a, s, t});
    }
  }
  return spans;
}

}  // namespace

BoundaryProgram build_program(int n, const Vocabulary& vocabulary, const std::vector<std::string>& activities) {
  if (n < 1 || n > 3) throw ParameterError("window length n must be 1, 2 or 3, got " + std::to_string(n));
  std::ostringstream text;
  text << "types:\n  event = {";
  bool first = true;
  for (const auto& k : vocabulary.kinds()) {
    text << (first ? "" : ", ") << k;
    first = false;
  }
  text << "}\n  time\n  activity = {";
  for (std::size_t i = 0; i < activities.size(); ++i) text << (i ? ", " : "") << activities[i];
  text << "}\n";
  text << "predicates:\n"
          "  observable event(event, time)\n"
          "  observable nextEvent(time, time)\n"
          "  hidden startActivity(activity, time)\n"
          "  hidden endActivity(activity, time)\n"
          "  hidden currentActivity(activity, time, time)\n";
  text << "soft:\n";
  if (n == 1) {
    text << "  start_single: event(+e, t) => startActivity(+a, t)\n";
    text << "  end_single: event(+e, t) => endActivity(+a, t)\n";
  } else {
    for (const auto* t : kPairTemplates) text << "  " << t << '\n';
    if (n == 3) {
      for (const auto* t : kTripleTemplates) text << "  " << t << '\n';
    }
  }
  text << "hard:\n"
       << "  " << kStartNotEnd << ": startActivity(a, t) => !endActivity(a, t)\n"
       << "  " << kEndNotStart << ": endActivity(a, t) => !startActivity(a, t)\n"
       << "  " << kSingleStart << ": currentActivity(a, ts, t) & t != ts => !startActivity(a, t)\n"
       << "  " << kStartOpens << ": startActivity(a, ts) => currentActivity(a, ts, ts)\n"
       << "  " << kCarryOn
       << ": currentActivity(a, ts, t1) & nextEvent(t1, t2) & !endActivity(a, t2) => currentActivity(a, ts, t2)\n";
  return BoundaryProgram{n, mln::parse_program(text.str())};
}

std::vector<mln::GroundFact> evidence_for(const EventLog& log) {
  std::vector<mln::GroundFact> facts;
  facts.reserve(log.events.size() * 2);
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& e = log.events[i];
    facts.push_back({"event", {e.kind, tick_name(e.timestamp.tick)}});
    if (i + 1 < log.events.size()) {
      facts.push_back({"nextEvent", {tick_name(e.timestamp.tick), tick_name(log.events[i + 1].timestamp.tick)}});
    }
  }
  return facts;
}

namespace {

Boundaries gold_boundaries(const EventLog& log, const Annotation& gold) {
  auto ticks = ticks_of(log);
  Boundaries b;
  for (const auto& iv : gold.activity_intervals) {
    auto lo = std::lower_bound(ticks.begin(), ticks.end(), iv.start);
    auto hi = std::upper_bound(ticks.begin(), ticks.end(), iv.end);
    if (lo == hi) continue;
    auto s = *lo, e = *(hi - 1);
    if (s >= e) continue;
    b.starts[iv.activity].push_back(s);
    b.ends[iv.activity].push_back(e);
  }
  for (auto& [a, v] : b.starts) std::sort(v.begin(), v.end());
  for (auto& [a, v] : b.ends) std::sort(v.begin(), v.end());
  return b;
}

}  // namespace

std::vector<mln::GroundFact> truth_atoms(const EventLog& log, const Annotation& gold) {
  auto b = gold_boundaries(log, gold);
  auto ticks = ticks_of(log);
  std::vector<mln::GroundFact> atoms;
  for (const auto& [a, ts] : b.starts) {
    for (auto t : ts) atoms.push_back({kStart, {a, tick_name(t)}});
  }
  for (const auto& [a, ts] : b.ends) {
    for (auto t : ts) atoms.push_back({kEnd, {a, tick_name(t)}});
  }
  for (const auto& span : closure_spans(pattern_of(ticks, b))) {
    for (auto t = span.from; t <= span.to; ++t) {
      atoms.push_back({kCurrent, {span.activity, tick_name(ticks[span.from]), tick_name(ticks[t])}});
    }
  }
  return atoms;
}

mln::GroundNetwork ground_full(const BoundaryProgram& bp, const EventLog& log) {
  auto evidence = evidence_for(log);
  return mln::ground(bp.program, evidence);
}

mln::GroundNetwork ground_soft(const BoundaryProgram& bp, const EventLog& log) {
  mln::MlnProgram soft_only = bp.program;
  soft_only.hard.clear();
  auto evidence = evidence_for(log);
  auto net = mln::ground(soft_only, evidence);
  net.hard_ids = {};
  for (const auto& f : bp.program.hard) net.hard_ids.push_back(f.id);
  return net;
}

mln::MapState solve_chain(const mln::GroundNetwork& net) {
  // Ordered ticks from the evidence.
  std::vector<std::uint64_t> ticks;
  for (const auto& f : net.evidence) {
    if (f.predicate == "event") ticks.push_back(parse_u64(f.args.at(1)));
  }
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());

  // Gain of setting each atom true, per activity and position.
  struct Gains {
    std::vector<double> start, end;
    std::vector<std::int64_t> start_atom, end_atom;
  };
  std::map<std::string, Gains> gains;
  auto slot = [&](const std::string& a) -> Gains& {
    auto& g = gains[a];
    if (g.start.empty()) {
      g.start.assign(ticks.size(), 0.0);
      g.end.assign(ticks.size(), 0.0);
      g.start_atom.assign(ticks.size(), -1);
      g.end_atom.assign(ticks.size(), -1);
    }
    return g;
  };
  auto position = [&](const std::string& t) {
    auto v = parse_u64(t);
    auto it = std::lower_bound(ticks.begin(), ticks.end(), v);
    if (it == ticks.end() || *it != v) throw ParameterError("atom at tick " + t + " has no event");
    return static_cast<std::size_t>(it - ticks.begin());
  };
  for (std::uint32_t i = 0; i < net.atoms.size(); ++i) {
    const auto& atom = net.atoms[i];
    if (atom.predicate != kStart && atom.predicate != kEnd) {
      throw ParameterError("chain solver cannot handle atom " + mln::to_string(atom));
    }
    auto& g = slot(atom.args.at(0));
    auto p = position(atom.args.at(1));
    (atom.predicate == kStart ? g.start_atom : g.end_atom)[p] = i;
  }
  if (!net.hard.empty()) throw ParameterError("chain solver expects a soft-only boundary network");
  for (const auto& wc : net.soft) {
    if (wc.clause.literals.size() != 1) throw ParameterError("chain solver needs unit soft clauses");
    const auto& lit = wc.clause.literals[0];
    const auto& atom = net.atoms[lit.atom];
    auto& g = gains[atom.args[0]];
    auto p = position(atom.args[1]);
    double delta = lit.positive ? wc.weight : -wc.weight;
    (atom.predicate == kStart ? g.start : g.end)[p] += delta;
  }

  mln::Assignment assignment(net.atoms.size(), 0);
  const std::size_t m = ticks.size();
  for (auto& [activity, g] : gains) {
    // value[i][s]: best gain from position i onward in state s (0 idle, 1 active).
    std::vector<std::array<double, 2>> value(m + 1, {0.0, 0.0});
    for (std::size_t i = m; i-- > 0;) {
      double idle_next = value[i + 1][0], active_next = value[i + 1][1];
      value[i][0] = std::max({idle_next, g.end[i] + idle_next, g.start[i] + active_next});
      value[i][1] = std::max(active_next, g.end[i] + idle_next);
    }
    int state = 0;
    for (std::size_t i = 0; i < m; ++i) {
      double idle_next = value[i + 1][0], active_next = value[i + 1][1];
      constexpr double eps = 1e-12;
      bool set_start = false, set_end = false;
      if (state == 0) {
        double best = value[i][0];
        if (idle_next >= best - eps) {
        } else if (g.end[i] + idle_next >= best - eps) {
          set_end = true;
        } else {
          set_start = true;
          state = 1;
        }
      } else {
        if (active_next >= value[i][1] - eps) {
        } else {
          set_end = true;
          state = 0;
        }
      }
      if (set_start) {
        if (g.start_atom[i] < 0) throw ParameterError("missing start atom for positive gain");
        assignment[static_cast<std::size_t>(g.start_atom[i])] = 1;
      }
      if (set_end) {
        if (g.end_atom[i] < 0) throw ParameterError("missing end atom for positive gain");
        assignment[static_cast<std::size_t>(g.end_atom[i])] = 1;
      }
    }
  }
  double objective = mln::soft_objective(net, assignment);
  return mln::MapState{std::move(assignment), objective};
}

Boundaries boundaries_of(const mln::GroundNetwork& net, const mln::Assignment& assignment) {
  Boundaries b;
  for (std::size_t i = 0; i < net.atoms.size(); ++i) {
    if (!assignment[i]) continue;
    const auto& atom = net.atoms[i];
    if (atom.predicate == kStart) b.starts[atom.args[0]].push_back(parse_u64(atom.args[1]));
    if (atom.predicate == kEnd) b.ends[atom.args[0]].push_back(parse_u64(atom.args[1]));
  }
  for (auto& [a, v] : b.starts) std::sort(v.begin(), v.end());
  for (auto& [a, v] : b.ends) std::sort(v.begin(), v.end());
  return b;
}

mln::Assignment closure_assignment(const mln::GroundNetwork& full, const EventLog& log, const Boundaries& b) {
  auto ticks = ticks_of(log);
  std::vector<mln::GroundFact> truths;
  for (const auto& [a, ts] : b.starts) {
    for (auto t : ts) truths.push_back({kStart, {a, tick_name(t)}});
  }
  for (const auto& [a, ts] : b.ends) {
    for (auto t : ts) truths.push_back({kEnd, {a, tick_name(t)}});
  }
  for (const auto& span : closure_spans(pattern_of(ticks, b))) {
    for (auto t = span.from; t <= span.to; ++t) {
      truths.push_back({kCurrent, {span.activity, tick_name(ticks[span.from]), tick_name(ticks[t])}});
    }
  }
  return mln::truth_assignment(full, truths);
}

std::string violated_family(const EventLog& log, const Boundaries& b) {
  auto patterns = pattern_of(ticks_of(log), b);
  for (const auto& [a, p] : patterns) {
    for (std::size_t i = 0; i < p.start.size(); ++i) {
      if (p.start[i] && p.end[i]) return kStartNotEnd;
    }
  }
  // A start inside the closure of an earlier start of the same activity.
  for (const auto& span : closure_spans(patterns)) {
    const auto& p = patterns.at(span.activity);
    for (auto t = span.from + 1; t <= span.to; ++t) {
      if (p.start[t]) return kSingleStart;
    }
  }
  return {};
}

BoundaryProgram train(const BoundaryProgram& untrained, std::span<const EventLog> logs,
                      std::span<const Annotation> gold, const TrainOptions& options) {
  if (logs.size() != gold.size()) throw ParameterError("training needs one annotation per log");
  std::vector<mln::TrainingExample> examples;
  examples.reserve(logs.size());
  for (std::size_t d = 0; d < logs.size(); ++d) {
    auto b = gold_boundaries(logs[d], gold[d]);
    if (auto family = violated_family(logs[d], b); !family.empty()) {
      throw LabelError("labels of day '" + logs[d].day_id + "' violate hard formula '" + family + "'");
    }
    auto net = ground_soft(untrained, logs[d]);
    auto truth = truth_atoms(logs[d], gold[d]);
    auto assignment = mln::truth_assignment(net, truth);
    examples.push_back({std::move(net), std::move(assignment)});
  }
  auto learn = options.learn;
  if (!learn.solver) learn.solver = solve_chain;
  auto result = mln::learn_weights(untrained.program, std::span<const mln::TrainingExample>(examples), learn);
  return BoundaryProgram{untrained.n, std::move(result.program)};
}

Thresholds default_thresholds() {
  return {{std::string(kPrepareMeal), 90 * 60}, {std::string(kConsumeMeal), 60 * 60},
          {std::string(kTakeMedicines), 15 * 60}};
}

std::vector<ActivityInterval> pair_boundaries(const EventLog& log, const Boundaries& b, const DetectOptions& options) {
  std::unordered_map<std::uint64_t, const Event*> by_tick;
  for (const auto& e : log.events) by_tick[e.timestamp.tick] = &e;
  auto stamp = [&](std::uint64_t t) {
    auto it = by_tick.find(t);
    return it == by_tick.end() ? Timestamp{t, std::nullopt} : it->second->timestamp;
  };

  std::vector<ActivityInterval> intervals;
  for (const auto& [activity, starts] : b.starts) {
    std::vector<std::uint64_t> ends;
    if (auto it = b.ends.find(activity); it != b.ends.end()) ends = it->second;
    std::size_t e = 0;
    for (std::size_t s = 0; s < starts.size(); ++s) {
      auto start = starts[s];
      // A later start takes over when no end came in between.
      while (e < ends.size() && ends[e] <= start) ++e;
      bool next_start_first = s + 1 < starts.size() && (e == ends.size() || starts[s + 1] < ends[e]);
      if (e < ends.size() && !next_start_first) {
        intervals.push_back({activity, stamp(start), stamp(ends[e]), true});
        ++e;
        continue;
      }
      auto th = options.thresholds.find(activity);
      if (th == options.thresholds.end() || th->second <= 0) {
        throw ConfigError("no positive duration threshold for activity '" + activity + "'");
      }
      auto start_ts = stamp(start);
      Timestamp end_ts;
      auto spt = options.time_base.seconds_per_tick;
      end_ts.tick = start + static_cast<std::uint64_t>(std::max(1.0, std::ceil(static_cast<double>(th->second) / spt)));
      if (start_ts.wallclock) end_ts.wallclock = *start_ts.wallclock + std::chrono::seconds(th->second);
      intervals.push_back({activity, start_ts, end_ts, false});
    }
  }
  std::sort(intervals.begin(), intervals.end(), [](const ActivityInterval& x, const ActivityInterval& y) {
    if (x.start.tick != y.start.tick) return x.start.tick < y.start.tick;
    return x.activity < y.activity;
  });
  return intervals;
}

std::vector<ActivityInterval> detect(const EventLog& log, const BoundaryProgram& trained, const DetectOptions& options) {
  if (log.events.empty()) return {};
  Boundaries b;
  if (options.solver == Solver::kChain) {
    auto net = ground_soft(trained, log);
    auto state = solve_chain(net);
    b = boundaries_of(net, state.assignment);
    if (options.validate) {
      auto full = ground_full(trained, log);
      auto assignment = closure_assignment(full, log, b);
      if (auto bad = mln::first_violated_hard(full, assignment)) {
        throw InfeasibleError("MAP state of day '" + log.day_id + "' violates " + mln::describe(full, full.hard[*bad]));
      }
    }
  } else {
    auto full = ground_full(trained, log);
    auto state = mln::map_search(full, options.seed, options.search);
    b = boundaries_of(full, state.assignment);
  }
  if (auto family = violated_family(log, b); !family.empty()) {
    throw InfeasibleError("MAP state of day '" + log.day_id + "' violates hard formula '" + family + "'");
  }
  return pair_boundaries(log, b, options);
}

std::vector<LabeledInterval> as_labeled(const std::vector<ActivityInterval>& intervals) {
  std::vector<LabeledInterval> out;
  for (const auto& iv : intervals) out.push_back({iv.activity, iv.start.tick, iv.end.tick});
  return out;
}

Counts match_boundaries(const std::vector<ActivityInterval>& predicted, const Annotation& gold, std::uint64_t slack) {
  // Key: activity plus boundary kind (0 start, 1 end).
  std::map<std::pair<std::string, int>, std::vector<std::uint64_t>> pred, truth;
  for (const auto& iv : predicted) {
    pred[{iv.activity, 0}].push_back(iv.start.tick);
    if (iv.completed) pred[{iv.activity, 1}].push_back(iv.end.tick);
  }
  for (const auto& iv : gold.activity_intervals) {
    truth[{iv.activity, 0}].push_back(iv.start);
    truth[{iv.activity, 1}].push_back(iv.end);
  }
  Counts counts;
  for (auto& [key, ps] : pred) {
    std::sort(ps.begin(), ps.end());
    auto& gs = truth[key];
    std::sort(gs.begin(), gs.end());
    std::vector<char> used(gs.size(), 0);
    for (auto p : ps) {
      // Closest unused gold boundary within slack; earliest on ties.
      std::optional<std::size_t> best;
      std::uint64_t best_dist = 0;
      for (std::size_t g = 0; g < gs.size(); ++g) {
        if (used[g]) continue;
        auto dist = p > gs[g] ? p - gs[g] : gs[g] - p;
        if (dist <= slack && (!best || dist < best_dist)) {
          best = g;
          best_dist = dist;
        }
      }
      if (best) {
        used[*best] = 1;
        ++counts.tp;
      } else {
        ++counts.fp;
      }
    }
  }
  for (const auto& [key, gs] : truth) counts.fn += gs.size();
  counts.fn -= counts.tp;
  return counts;
}

BoundaryScore evaluate_boundaries(const std::vector<ActivityInterval>& predicted, const Annotation& gold,
                                  std::uint64_t slack) {
  BoundaryScore s;
  s.counts = match_boundaries(predicted, gold, slack);
  s.precision = s.counts.precision();
  s.recall = s.counts.recall();
  s.f1 = s.counts.f1();
  return s;
}

void write_intervals(const std::string& day_id, const std::vector<ActivityInterval>& intervals, std::ostream& out) {
  if (!day_id.empty()) out << "# day=" << day_id << '\n';
  for (const auto& iv : intervals) {
    out << "A;" << iv.activity << ';' << iv.start.tick << ';' << iv.end.tick;
    if (!iv.completed) {
      out << ";incomplete";
      if (iv.end.wallclock) out << ';' << format_wallclock(*iv.end.wallclock);
    }
    out << '\n';
  }
}

std::vector<ActivityInterval> read_intervals(std::istream& in) {
  std::vector<ActivityInterval> out;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto f = detail::split(line, ';');
    if (f.size() < 4 || f.size() > 6 || f[0] != "A") throw ParseError("expected an A; interval record", line_no);
    ActivityInterval iv;
    iv.activity = std::string(f[1]);
    try {
      iv.start.tick = parse_u64(f[2]);
      iv.end.tick = parse_u64(f[3]);
    } catch (const ParameterError&) {
      throw ParseError("invalid tick in interval record", line_no);
    }
    if (f.size() >= 5) {
      if (f[4] != "incomplete") throw ParseError("unknown interval flag '" + std::string(f[4]) + "'", line_no);
      iv.completed = false;
    }
    if (f.size() == 6) {
      iv.end.wallclock = parse_wallclock(f[5]);
      if (!iv.end.wallclock) throw ParseError("invalid wallclock in interval record", line_no);
    }
    out.push_back(std::move(iv));
  }
  return out;
}

}  // namespace faber::boundary
