#include <algorithm>
#include <charconv>
#include <limits>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "faber/errors.hpp"
#include "faber/mln.hpp"

namespace faber::mln {

namespace {

constexpr std::uint32_t kUnbound = std::numeric_limits<std::uint32_t>::max();

struct VecHash {
  std::size_t operator()(const std::vector<std::uint32_t>& v) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (auto x : v) {
      h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

std::optional<double> as_number(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Shared state of one grounding run.
class Grounder {
 public:
  Grounder(const MlnProgram& program, std::span<const GroundFact> evidence, const GroundingOptions& options)
      : program_(program), sig_(program.signature), options_(options) {
    for (const auto& fact : evidence) add_evidence(fact);
    for (const auto& type : sig_.types()) {
      auto& dom = domains_[type];
      const auto& cs = sig_.constants(type);
      for (std::size_t i = 0; i < cs.size(); ++i) {
        auto id = intern(cs[i]);
        dom.push_back(id);
        domain_pos_[id] = static_cast<std::uint32_t>(i);
      }
    }
  }

  GroundNetwork run() {
    net_.soft_ids.reserve(program_.soft.size());
    for (const auto& sf : program_.soft) net_.soft_ids.push_back(sf.formula.id);
    for (const auto& f : program_.hard) net_.hard_ids.push_back(f.id);

    for (std::uint32_t i = 0; i < program_.soft.size(); ++i) {
      const auto& f = program_.soft[i].formula;
      double share = 1.0 / static_cast<double>(f.clauses.size());
      for (const auto& clause : f.clauses) ground_clause(f, clause, /*soft=*/true, i, share);
    }
    for (std::uint32_t i = 0; i < program_.hard.size(); ++i) {
      const auto& f = program_.hard[i];
      for (const auto& clause : f.clauses) ground_clause(f, clause, /*soft=*/false, i, 1.0);
    }
    finalize_atoms();
    std::sort(evidence_facts_.begin(), evidence_facts_.end());
    evidence_facts_.erase(std::unique(evidence_facts_.begin(), evidence_facts_.end()), evidence_facts_.end());
    net_.evidence = std::move(evidence_facts_);
    return std::move(net_);
  }

 private:
  struct ClausePlan {
    std::vector<std::string> vars;
    std::vector<std::string> var_types;
    // literal args resolved to slot index (variables) or constant id
    struct Arg {
      bool variable;
      std::uint32_t value;
    };
    struct Lit {
      const Literal* source;
      std::uint32_t predicate = 0;  // evidence predicate index (observable)
      std::vector<Arg> args;
      Arg lhs{}, rhs{};
    };
    std::vector<Lit> joins;     // observable, negated: must be true in evidence
    std::vector<Lit> checks;    // observable positive and builtins: clause satisfied if true
    std::vector<Lit> hidden;
    std::vector<std::uint32_t> plus_slots;
  };

  std::uint32_t intern(const std::string& name) {
    auto [it, inserted] = const_ids_.emplace(name, static_cast<std::uint32_t>(names_.size()));
    if (inserted) names_.push_back(name);
    return it->second;
  }

  std::uint32_t pred_index(const std::string& name) {
    auto [it, inserted] = pred_ids_.emplace(name, static_cast<std::uint32_t>(pred_ids_.size()));
    if (inserted) evidence_tuples_.emplace_back();
    return it->second;
  }

  void add_evidence(const GroundFact& fact) {
    const auto* decl = sig_.predicate(fact.predicate);
    if (!decl) throw TypeError("evidence uses unknown predicate '" + fact.predicate + "'");
    if (!decl->observable) throw TypeError("evidence atom " + to_string(fact) + " is not observable");
    if (decl->arg_types.size() != fact.args.size()) {
      throw TypeError("evidence atom " + to_string(fact) + " has wrong arity for '" + fact.predicate + "'");
    }
    std::vector<std::uint32_t> tuple;
    for (std::size_t i = 0; i < fact.args.size(); ++i) {
      sig_.add_constant(decl->arg_types[i], fact.args[i]);
      tuple.push_back(intern(fact.args[i]));
    }
    auto p = pred_index(fact.predicate);
    auto key = tuple;
    key.insert(key.begin(), p);
    if (evidence_set_.insert(key).second) evidence_tuples_[p].push_back(std::move(tuple));
    evidence_facts_.push_back(fact);
  }

  bool evidence_true(std::uint32_t pred, const std::vector<std::uint32_t>& args) const {
    auto key = args;
    key.insert(key.begin(), pred);
    return evidence_set_.count(key) > 0;
  }

  const std::vector<std::uint32_t>& index_for(std::uint32_t pred, std::size_t pos, std::uint32_t value) {
    auto& by_pos = indices_[{pred, static_cast<std::uint32_t>(pos)}];
    if (by_pos.empty() && !evidence_tuples_[pred].empty()) {
      const auto& tuples = evidence_tuples_[pred];
      for (std::uint32_t i = 0; i < tuples.size(); ++i) by_pos[tuples[i][pos]].push_back(i);
    }
    static const std::vector<std::uint32_t> none;
    auto it = by_pos.find(value);
    return it == by_pos.end() ? none : it->second;
  }

  ClausePlan plan(const Formula& f, const Clause& clause) {
    ClausePlan plan;
    auto slot = [&](const std::string& var) {
      auto it = std::find(plan.vars.begin(), plan.vars.end(), var);
      if (it != plan.vars.end()) return static_cast<std::uint32_t>(it - plan.vars.begin());
      plan.vars.push_back(var);
      plan.var_types.push_back(f.variable_types.at(var));
      return static_cast<std::uint32_t>(plan.vars.size() - 1);
    };
    auto arg = [&](const Term& t) {
      return t.variable ? ClausePlan::Arg{true, slot(t.name)} : ClausePlan::Arg{false, intern(t.name)};
    };
    for (const auto& lit : clause) {
      ClausePlan::Lit pl;
      pl.source = &lit;
      if (lit.is_builtin) {
        pl.lhs = arg(lit.builtin.lhs);
        pl.rhs = arg(lit.builtin.rhs);
        plan.checks.push_back(std::move(pl));
        continue;
      }
      for (const auto& t : lit.atom.args) pl.args.push_back(arg(t));
      const auto* decl = sig_.predicate(lit.atom.predicate);
      if (decl->observable) {
        pl.predicate = pred_index(lit.atom.predicate);
        (lit.positive ? plan.checks : plan.joins).push_back(std::move(pl));
      } else {
        plan.hidden.push_back(std::move(pl));
      }
    }
    // Plus variables absent from this CNF clause are still enumerated so the
    // weight key is complete.
    for (const auto& v : f.plus_variables) plan.plus_slots.push_back(slot(v));
    return plan;
  }

  bool builtin_holds(const Literal& lit, std::uint32_t a, std::uint32_t b) const {
    const auto& sa = names_[a];
    const auto& sb = names_[b];
    int cmp;
    if (a == b) {
      cmp = 0;
    } else if (auto na = as_number(sa), nb = as_number(sb); na && nb) {
      cmp = *na < *nb ? -1 : (*na > *nb ? 1 : 0);
    } else {
      cmp = sa < sb ? -1 : (sa > sb ? 1 : 0);
    }
    bool value = false;
    switch (lit.builtin.op) {
      case Comparison::kEq: value = cmp == 0; break;
      case Comparison::kNeq: value = cmp != 0; break;
      case Comparison::kLess: value = cmp < 0; break;
      case Comparison::kLessEq: value = cmp <= 0; break;
      case Comparison::kGreater: value = cmp > 0; break;
      case Comparison::kGreaterEq: value = cmp >= 0; break;
    }
    return lit.positive ? value : !value;
  }

  static std::uint32_t value_of(const ClausePlan::Arg& a, const std::vector<std::uint32_t>& binding) {
    return a.variable ? binding[a.value] : a.value;
  }

  // True when some fully bound check literal already satisfies the clause.
  bool satisfied_by_checks(const ClausePlan& plan, const std::vector<std::uint32_t>& binding) const {
    for (const auto& c : plan.checks) {
      if (c.source->is_builtin) {
        auto a = value_of(c.lhs, binding), b = value_of(c.rhs, binding);
        if (a == kUnbound || b == kUnbound) continue;
        if (builtin_holds(*c.source, a, b)) return true;
      } else {
        std::vector<std::uint32_t> args;
        bool bound = true;
        for (const auto& x : c.args) {
          auto v = value_of(x, binding);
          if (v == kUnbound) {
            bound = false;
            break;
          }
          args.push_back(v);
        }
        if (bound && evidence_true(c.predicate, args)) return true;
      }
    }
    return false;
  }

  void join(const ClausePlan& plan, std::vector<char>& used, std::size_t remaining, std::vector<std::uint32_t>& binding,
            const std::function<void()>& leaf) {
    if (satisfied_by_checks(plan, binding)) return;
    if (remaining == 0) {
      leaf();
      return;
    }
    // Most-bound literal first.
    std::size_t best = plan.joins.size();
    int best_bound = -1;
    for (std::size_t i = 0; i < plan.joins.size(); ++i) {
      if (used[i]) continue;
      int bound = 0;
      for (const auto& a : plan.joins[i].args) bound += value_of(a, binding) != kUnbound;
      if (bound > best_bound) {
        best_bound = bound;
        best = i;
      }
    }
    const auto& lit = plan.joins[best];
    const auto& tuples = evidence_tuples_[lit.predicate];
    used[best] = 1;
    auto try_tuple = [&](const std::vector<std::uint32_t>& tuple) {
      std::vector<std::uint32_t> newly;
      bool ok = true;
      for (std::size_t k = 0; k < lit.args.size(); ++k) {
        const auto& a = lit.args[k];
        auto cur = value_of(a, binding);
        if (cur == kUnbound) {
          binding[a.value] = tuple[k];
          newly.push_back(a.value);
        } else if (cur != tuple[k]) {
          ok = false;
          break;
        }
      }
      if (ok) join(plan, used, remaining - 1, binding, leaf);
      for (auto s : newly) binding[s] = kUnbound;
    };
    // Use an index on the first bound argument when there is one.
    std::optional<std::size_t> bound_pos;
    for (std::size_t k = 0; k < lit.args.size(); ++k) {
      if (value_of(lit.args[k], binding) != kUnbound) {
        bound_pos = k;
        break;
      }
    }
    if (bound_pos) {
      const auto& ids = index_for(lit.predicate, *bound_pos, value_of(lit.args[*bound_pos], binding));
      for (auto id : ids) try_tuple(tuples[id]);
    } else {
      for (const auto& tuple : tuples) try_tuple(tuple);
    }
    used[best] = 0;
  }

  void enumerate(const ClausePlan& plan, std::size_t slot, std::vector<std::uint32_t>& binding,
                 const std::function<void()>& leaf) {
    if (satisfied_by_checks(plan, binding)) return;
    while (slot < binding.size() && binding[slot] != kUnbound) ++slot;
    if (slot == binding.size()) {
      leaf();
      return;
    }
    auto it = domains_.find(plan.var_types[slot]);
    if (it == domains_.end()) return;
    for (auto c : it->second) {
      binding[slot] = c;
      enumerate(plan, slot + 1, binding, leaf);
    }
    binding[slot] = kUnbound;
  }

  void ground_clause(const Formula& f, const Clause& clause, bool soft, std::uint32_t formula_index, double share) {
    auto p = plan(f, clause);
    std::vector<std::uint32_t> binding(p.vars.size(), kUnbound);
    std::vector<char> used(p.joins.size(), 0);

    auto leaf = [&]() {
      GroundClause gc;
      gc.formula = formula_index;
      for (const auto& h : p.hidden) {
        std::vector<std::uint32_t> args;
        args.reserve(h.args.size());
        for (const auto& a : h.args) args.push_back(value_of(a, binding));
        auto atom = atom_id(h.source->atom.predicate, std::move(args));
        GroundLiteral gl{atom, h.source->positive};
        bool duplicate = false;
        for (const auto& existing : gc.literals) {
          if (existing.atom == atom) {
            if (existing.positive != gl.positive) return;  // tautology
            duplicate = true;
          }
        }
        if (!duplicate) gc.literals.push_back(gl);
      }
      if (gc.literals.empty()) {
        if (!soft) {
          throw InfeasibleError("hard formula '" + f.id + "' is violated by the evidence");
        }
        return;
      }
      if (net_.soft.size() + net_.hard.size() >= options_.max_clauses) {
        throw CapacityError("grounding exceeds the budget of " + std::to_string(options_.max_clauses) +
                            " ground clauses");
      }
      if (soft) {
        WeightKey key{formula_index, {}};
        for (auto s : p.plus_slots) key.binding.push_back(names_[binding[s]]);
        auto [kit, inserted] = key_ids_.emplace(key, static_cast<std::uint32_t>(net_.weight_keys.size()));
        if (inserted) net_.weight_keys.push_back(key);
        double w = program_.soft[formula_index].weight(key.binding) * share;
        net_.soft.push_back(WeightedClause{std::move(gc), w, kit->second, share});
      } else {
        net_.hard.push_back(std::move(gc));
      }
    };

    auto after_join = [&]() { enumerate(p, 0, binding, leaf); };
    join(p, used, p.joins.size(), binding, after_join);
  }

  std::uint32_t atom_id(const std::string& predicate, std::vector<std::uint32_t> args) {
    auto p = pred_index(predicate);
    args.insert(args.begin(), p);
    auto [it, inserted] = atom_ids_.emplace(std::move(args), static_cast<std::uint32_t>(atom_keys_.size()));
    if (inserted) atom_keys_.push_back(&it->first);
    return it->second;
  }

  // Sorts atoms by predicate name then argument domain positions, and remaps clauses.
  void finalize_atoms() {
    std::vector<std::string> pred_names(pred_ids_.size());
    for (const auto& [name, id] : pred_ids_) pred_names[id] = name;
    std::vector<std::uint32_t> order(atom_keys_.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    auto pos = [&](std::uint32_t c) {
      auto it = domain_pos_.find(c);
      return it == domain_pos_.end() ? std::numeric_limits<std::uint32_t>::max() : it->second;
    };
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      const auto& ka = *atom_keys_[a];
      const auto& kb = *atom_keys_[b];
      if (ka[0] != kb[0]) return pred_names[ka[0]] < pred_names[kb[0]];
      for (std::size_t i = 1; i < ka.size() && i < kb.size(); ++i) {
        if (ka[i] != kb[i]) {
          auto pa = pos(ka[i]), pb = pos(kb[i]);
          if (pa != pb) return pa < pb;
          return names_[ka[i]] < names_[kb[i]];
        }
      }
      return ka.size() < kb.size();
    });
    std::vector<std::uint32_t> remap(order.size());
    net_.atoms.resize(order.size());
    for (std::uint32_t r = 0; r < order.size(); ++r) {
      remap[order[r]] = r;
      const auto& key = *atom_keys_[order[r]];
      GroundFact fact;
      fact.predicate = pred_names[key[0]];
      for (std::size_t i = 1; i < key.size(); ++i) fact.args.push_back(names_[key[i]]);
      net_.atoms[r] = std::move(fact);
    }
    for (auto& wc : net_.soft) {
      for (auto& l : wc.clause.literals) l.atom = remap[l.atom];
    }
    for (auto& hc : net_.hard) {
      for (auto& l : hc.literals) l.atom = remap[l.atom];
    }
  }

  const MlnProgram& program_;
  Signature sig_;
  GroundingOptions options_;
  GroundNetwork net_;

  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> const_ids_;
  std::unordered_map<std::string, std::uint32_t> pred_ids_;
  std::map<std::string, std::vector<std::uint32_t>> domains_;
  std::unordered_map<std::uint32_t, std::uint32_t> domain_pos_;

  std::vector<std::vector<std::vector<std::uint32_t>>> evidence_tuples_;
  std::unordered_set<std::vector<std::uint32_t>, VecHash> evidence_set_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::unordered_map<std::uint32_t, std::vector<std::uint32_t>>>
      indices_;
  std::vector<GroundFact> evidence_facts_;

  std::unordered_map<std::vector<std::uint32_t>, std::uint32_t, VecHash> atom_ids_;
  std::vector<const std::vector<std::uint32_t>*> atom_keys_;
  std::map<WeightKey, std::uint32_t> key_ids_;
};

}  // namespace

GroundNetwork ground(const MlnProgram& program, std::span<const GroundFact> evidence,
                     const GroundingOptions& options) {
  return Grounder(program, evidence, options).run();
}

void apply_weights(GroundNetwork& net, const MlnProgram& program) {
  std::vector<double> key_weights(net.weight_keys.size());
  for (std::size_t k = 0; k < net.weight_keys.size(); ++k) {
    const auto& key = net.weight_keys[k];
    key_weights[k] = program.soft.at(key.formula).weight(key.binding);
  }
  for (auto& wc : net.soft) wc.weight = key_weights[wc.key] * wc.share;
}

std::optional<std::uint32_t> GroundNetwork::find_atom(const GroundFact& fact) const {
  for (std::uint32_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i] == fact) return i;
  }
  return std::nullopt;
}

}  // namespace faber::mln
