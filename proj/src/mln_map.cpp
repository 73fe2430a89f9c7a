#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "faber/errors.hpp"
#include "faber/mln.hpp"

namespace faber::mln {

namespace {

constexpr double kEps = 1e-9;

struct Occurrence {
  std::uint32_t clause;
  bool positive;
};

// Clause-by-atom incidence shared by both solvers. Soft clauses come first,
// hard clauses follow at offset soft.size().
struct Incidence {
  std::vector<std::vector<Occurrence>> by_atom;
  std::vector<const GroundClause*> clauses;
  std::vector<double> weight;  // soft only
  std::size_t soft_count = 0;

  explicit Incidence(const GroundNetwork& net) : by_atom(net.atoms.size()) {
    soft_count = net.soft.size();
    for (const auto& wc : net.soft) {
      clauses.push_back(&wc.clause);
      weight.push_back(wc.weight);
    }
    for (const auto& hc : net.hard) clauses.push_back(&hc);
    for (std::uint32_t c = 0; c < clauses.size(); ++c) {
      for (const auto& l : clauses[c]->literals) {
        if (l.atom >= by_atom.size()) {
          throw ParameterError("clause references atom " + std::to_string(l.atom) + " outside the network");
        }
        by_atom[l.atom].push_back({c, l.positive});
      }
    }
  }

  bool is_hard(std::uint32_t c) const { return c >= soft_count; }
};

[[noreturn]] void throw_infeasible(const GroundNetwork& net) {
  Assignment all_false(net.atoms.size(), 0);
  auto violated = first_violated_hard(net, all_false);
  std::string detail = violated ? describe(net, net.hard[*violated]) : std::string("(none)");
  throw InfeasibleError("no assignment satisfies the hard clauses; violated: " + detail);
}

// Depth-first branch and bound over atoms in index order.
class BranchAndBound {
 public:
  explicit BranchAndBound(const GroundNetwork& net)
      : net_(net), inc_(net), value_(net.atoms.size(), -1) {
    sat_.assign(inc_.clauses.size(), 0);
    open_.resize(inc_.clauses.size());
    for (std::size_t c = 0; c < inc_.clauses.size(); ++c) open_[c] = inc_.clauses[c]->literals.size();
    for (std::size_t c = 0; c < inc_.soft_count; ++c) bound_ += contribution(c);
  }

  std::optional<MapState> solve() {
    // Empty hard clauses can never be satisfied.
    for (std::size_t c = inc_.soft_count; c < inc_.clauses.size(); ++c) {
      if (open_[c] == 0) return std::nullopt;
    }
    std::vector<std::uint32_t> trail;
    if (!propagate_all(trail)) return std::nullopt;
    search(0);
    return best_;
  }

 private:
  double contribution(std::size_t c) const {
    double w = inc_.weight[c];
    if (sat_[c] > 0) return w;
    return open_[c] > 0 ? std::max(w, 0.0) : 0.0;
  }

  // Assigns and updates counters; returns false on a hard conflict.
  bool assign(std::uint32_t atom, bool v, std::vector<std::uint32_t>& trail, std::vector<std::uint32_t>& touched) {
    value_[atom] = v ? 1 : 0;
    trail.push_back(atom);
    bool ok = true;
    for (const auto& occ : inc_.by_atom[atom]) {
      bool soft = !inc_.is_hard(occ.clause);
      double before = soft ? contribution(occ.clause) : 0.0;
      --open_[occ.clause];
      if (occ.positive == v) ++sat_[occ.clause];
      if (soft) {
        bound_ += contribution(occ.clause) - before;
      } else if (sat_[occ.clause] == 0) {
        if (open_[occ.clause] == 0) ok = false;
        else if (open_[occ.clause] == 1) touched.push_back(occ.clause);
      }
    }
    return ok;
  }

  void unassign(std::uint32_t atom) {
    bool v = value_[atom] == 1;
    for (const auto& occ : inc_.by_atom[atom]) {
      bool soft = !inc_.is_hard(occ.clause);
      double before = soft ? contribution(occ.clause) : 0.0;
      ++open_[occ.clause];
      if (occ.positive == v) --sat_[occ.clause];
      if (soft) bound_ += contribution(occ.clause) - before;
    }
    value_[atom] = -1;
  }

  // Forces the remaining literal of every unit hard clause.
  bool propagate(std::vector<std::uint32_t>& trail, std::vector<std::uint32_t> queue) {
    while (!queue.empty()) {
      auto c = queue.back();
      queue.pop_back();
      if (sat_[c] > 0 || open_[c] != 1) {
        if (sat_[c] == 0 && open_[c] == 0) return false;
        continue;
      }
      for (const auto& l : inc_.clauses[c]->literals) {
        if (value_[l.atom] < 0) {
          if (!assign(l.atom, l.positive, trail, queue)) return false;
          break;
        }
      }
    }
    return true;
  }

  bool propagate_all(std::vector<std::uint32_t>& trail) {
    std::vector<std::uint32_t> queue;
    for (std::size_t c = inc_.soft_count; c < inc_.clauses.size(); ++c) {
      if (open_[c] == 1) queue.push_back(static_cast<std::uint32_t>(c));
    }
    return propagate(trail, std::move(queue));
  }

  void search(std::uint32_t next) {
    while (next < value_.size() && value_[next] >= 0) ++next;
    if (best_ && bound_ <= best_->objective + kEps) return;
    if (next == value_.size()) {
      Assignment a(value_.begin(), value_.end());
      double objective = soft_objective(net_, a);
      if (!best_ || objective > best_->objective + kEps) best_ = MapState{std::move(a), objective};
      return;
    }
    for (bool v : {false, true}) {
      std::vector<std::uint32_t> trail, touched;
      bool ok = assign(next, v, trail, touched) && propagate(trail, std::move(touched));
      if (ok) search(next + 1);
      for (auto it = trail.rbegin(); it != trail.rend(); ++it) unassign(*it);
    }
  }

  const GroundNetwork& net_;
  Incidence inc_;
  std::vector<signed char> value_;
  std::vector<std::uint32_t> sat_;
  std::vector<std::size_t> open_;
  double bound_ = 0.0;
  std::optional<MapState> best_;
};

// MaxWalkSAT over a cost that counts hard violations at weight `big`.
class WalkSat {
 public:
  WalkSat(const GroundNetwork& net, std::uint64_t seed, const SearchParams& params)
      : net_(net), inc_(net), params_(params), rng_(seed) {
    double total = 0.0;
    for (double w : inc_.weight) total += std::abs(w);
    big_ = 1.0 + total;
    bad_pos_.assign(inc_.clauses.size(), kAbsent);
  }

  std::optional<MapState> run() {
    std::optional<MapState> best;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (unsigned r = 0; r < std::max(1u, params_.restarts); ++r) {
      value_.assign(net_.atoms.size(), 0);
      if (r > 0) {
        for (auto& v : value_) v = unit(rng_) < 0.5 ? 1 : 0;
      }
      reset();
      consider(best);
      for (std::uint64_t flip = 0; flip < params_.max_flips && !bad_.empty(); ++flip) {
        auto c = bad_[std::uniform_int_distribution<std::size_t>(0, bad_.size() - 1)(rng_)];
        auto atom = choose(c, unit(rng_) < params_.noise);
        flip_atom(atom);
        if (hard_bad_ == 0 && (!best || soft_cost_ < best_cost_ - kEps)) consider(best);
      }
      if (best && best_cost_ <= kEps) break;  // nothing left to improve
    }
    return best;
  }

 private:
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

  bool lit_true(const GroundLiteral& l) const { return (value_[l.atom] != 0) == l.positive; }

  bool clause_bad(std::uint32_t c, std::uint32_t true_count) const {
    if (inc_.is_hard(c) || inc_.weight[c] >= 0) return true_count == 0;
    return true_count > 0;
  }

  double clause_cost(std::uint32_t c, std::uint32_t true_count) const {
    if (!clause_bad(c, true_count)) return 0.0;
    return inc_.is_hard(c) ? big_ : std::abs(inc_.weight[c]);
  }

  void set_bad(std::uint32_t c, bool bad) {
    if (bad && bad_pos_[c] == kAbsent) {
      bad_pos_[c] = bad_.size();
      bad_.push_back(c);
    } else if (!bad && bad_pos_[c] != kAbsent) {
      auto pos = bad_pos_[c];
      bad_[pos] = bad_.back();
      bad_pos_[bad_[pos]] = pos;
      bad_.pop_back();
      bad_pos_[c] = kAbsent;
    }
  }

  void reset() {
    true_count_.assign(inc_.clauses.size(), 0);
    for (auto c : bad_) bad_pos_[c] = kAbsent;
    bad_.clear();
    hard_bad_ = 0;
    soft_cost_ = 0.0;
    for (std::uint32_t c = 0; c < inc_.clauses.size(); ++c) {
      for (const auto& l : inc_.clauses[c]->literals) true_count_[c] += lit_true(l);
      bool bad = clause_bad(c, true_count_[c]);
      set_bad(c, bad);
      if (bad && inc_.is_hard(c)) ++hard_bad_;
      if (!inc_.is_hard(c)) soft_cost_ += clause_cost(c, true_count_[c]);
    }
  }

  void consider(std::optional<MapState>& best) {
    if (hard_bad_ != 0) return;
    if (best && soft_cost_ >= best_cost_ - kEps) return;
    best_cost_ = soft_cost_;
    Assignment a(value_.begin(), value_.end());
    double objective = soft_objective(net_, a);
    best = MapState{std::move(a), objective};
  }

  double flip_delta(std::uint32_t atom) const {
    double delta = 0.0;
    for (const auto& occ : inc_.by_atom[atom]) {
      auto tc = true_count_[occ.clause];
      bool now_true = (value_[atom] != 0) == occ.positive;
      auto after = now_true ? tc - 1 : tc + 1;
      delta += clause_cost(occ.clause, after) - clause_cost(occ.clause, tc);
    }
    return delta;
  }

  std::uint32_t choose(std::uint32_t c, bool random_walk) {
    const auto& lits = inc_.clauses[c]->literals;
    // A bad negative-weight clause is repaired by falsifying a true literal.
    std::vector<std::uint32_t> candidates;
    bool want_true = !inc_.is_hard(c) && inc_.weight[c] < 0;
    for (const auto& l : lits) {
      if (lit_true(l) == want_true) candidates.push_back(l.atom);
    }
    if (candidates.empty()) {
      for (const auto& l : lits) candidates.push_back(l.atom);
    }
    if (random_walk) {
      return candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng_)];
    }
    std::uint32_t best = candidates.front();
    double best_delta = flip_delta(best);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      double d = flip_delta(candidates[i]);
      if (d < best_delta - kEps) {
        best_delta = d;
        best = candidates[i];
      }
    }
    return best;
  }

  void flip_atom(std::uint32_t atom) {
    value_[atom] = value_[atom] ? 0 : 1;
    bool v = value_[atom] != 0;
    for (const auto& occ : inc_.by_atom[atom]) {
      auto c = occ.clause;
      auto before = true_count_[c];
      true_count_[c] = occ.positive == v ? before + 1 : before - 1;
      bool was_bad = clause_bad(c, before);
      bool is_bad = clause_bad(c, true_count_[c]);
      if (was_bad == is_bad) continue;
      set_bad(c, is_bad);
      if (inc_.is_hard(c)) {
        hard_bad_ += is_bad ? 1 : -1;
      } else {
        double w = std::abs(inc_.weight[c]);
        soft_cost_ += is_bad ? w : -w;
      }
    }
  }

  const GroundNetwork& net_;
  Incidence inc_;
  SearchParams params_;
  std::mt19937_64 rng_;
  double big_ = 1.0;

  std::vector<char> value_;
  std::vector<std::uint32_t> true_count_;
  std::vector<std::uint32_t> bad_;
  std::vector<std::size_t> bad_pos_;
  long hard_bad_ = 0;
  double soft_cost_ = 0.0;
  double best_cost_ = 0.0;
};

}  // namespace

bool clause_satisfied(const GroundClause& clause, const Assignment& assignment) {
  for (const auto& l : clause.literals) {
    if ((assignment[l.atom] != 0) == l.positive) return true;
  }
  return false;
}

double soft_objective(const GroundNetwork& net, const Assignment& assignment) {
  double total = 0.0;
  for (const auto& wc : net.soft) {
    if (clause_satisfied(wc.clause, assignment)) total += wc.weight;
  }
  return total;
}

std::optional<std::size_t> first_violated_hard(const GroundNetwork& net, const Assignment& assignment) {
  for (std::size_t i = 0; i < net.hard.size(); ++i) {
    if (!clause_satisfied(net.hard[i], assignment)) return i;
  }
  return std::nullopt;
}

std::string describe(const GroundNetwork& net, const GroundClause& clause) {
  std::ostringstream out;
  if (clause.formula < net.hard_ids.size()) out << net.hard_ids[clause.formula] << ": ";
  if (clause.literals.empty()) out << "(empty clause)";
  for (std::size_t i = 0; i < clause.literals.size(); ++i) {
    const auto& l = clause.literals[i];
    if (i) out << " v ";
    if (!l.positive) out << '!';
    out << (l.atom < net.atoms.size() ? to_string(net.atoms[l.atom]) : "#" + std::to_string(l.atom));
  }
  return out.str();
}

MapState map_exact(const GroundNetwork& net, const ExactOptions& options) {
  if (net.atoms.size() > options.max_atoms) {
    throw CapacityError("exact MAP is limited to " + std::to_string(options.max_atoms) + " hidden atoms, network has " +
                        std::to_string(net.atoms.size()));
  }
  auto result = BranchAndBound(net).solve();
  if (!result) throw_infeasible(net);
  return *result;
}

MapState map_search(const GroundNetwork& net, std::uint64_t seed, const SearchParams& params) {
  if (!(params.noise >= 0.0 && params.noise <= 1.0)) throw ParameterError("noise must lie in [0, 1]");
  auto result = WalkSat(net, seed, params).run();
  if (!result) {
    throw SearchFailure("no hard-feasible state found in " + std::to_string(params.restarts) + " restarts of " +
                        std::to_string(params.max_flips) + " flips");
  }
  return *result;
}

}  // namespace faber::mln
