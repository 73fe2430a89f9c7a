#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "faber/anomaly.hpp"
#include "faber/errors.hpp"
#include "text_util.hpp"

namespace faber::anomaly {

namespace {

using Row = std::vector<Value>;
using Relation = std::set<Row>;
using Database = std::map<std::string, Relation>;

struct CTerm {
  int var = -1;  // -1 for constants
  Value value;
};

struct CExpr {
  std::vector<std::pair<int, CTerm>> parts;
};

struct CGoal {
  Goal::Kind kind = Goal::Kind::kAtom;
  std::string predicate;
  std::vector<CTerm> args;
  std::vector<CGoal> negated;
  CExpr lhs, rhs;
  CompareOp op = CompareOp::kEq;
  int bind = -1;  // `X = expr` with X unbound: assigns instead of testing
};

struct CRule {
  std::string id;
  std::string head;
  std::vector<CTerm> head_args;
  std::vector<CGoal> plan;
  std::size_t vars = 0;
};

void collect_vars(const Expr& e, std::set<std::string>& out) {
  for (const auto& [sign, t] : e.parts)
    if (t.variable) out.insert(t.name);
}

void collect_vars(const Goal& g, std::set<std::string>& out) {
  switch (g.kind) {
    case Goal::Kind::kAtom:
      for (const auto& t : g.atom.args)
        if (t.variable) out.insert(t.name);
      break;
    case Goal::Kind::kNot:
      for (const auto& inner : g.negated) collect_vars(inner, out);
      break;
    case Goal::Kind::kCompare:
      collect_vars(g.lhs, out);
      collect_vars(g.rhs, out);
      break;
  }
}

bool subset(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

class Compiler {
 public:
  explicit Compiler(const Rule& rule) : rule_(rule) {}

  CRule compile() {
    CRule out;
    out.id = rule_.id;
    out.head = rule_.head.predicate;
    std::set<std::string> bound;
    out.plan = plan(rule_.body, bound);
    for (const auto& t : rule_.head.args) {
      if (t.variable && !bound.count(t.name)) {
        throw SafetyError("rule " + rule_.id + ": head variable " + t.name + " is not bound by a positive body atom");
      }
      out.head_args.push_back(term(t));
    }
    out.vars = index_.size();
    return out;
  }

 private:
  int var(const std::string& name) {
    auto [it, inserted] = index_.emplace(name, static_cast<int>(index_.size()));
    return it->second;
  }

  CTerm term(const Term& t) {
    CTerm c;
    if (t.variable) c.var = var(t.name);
    else c.value = t.value;
    return c;
  }

  CExpr expr(const Expr& e) {
    CExpr c;
    for (const auto& [sign, t] : e.parts) c.parts.emplace_back(sign, term(t));
    return c;
  }

  static const Term* lone_variable(const Expr& e) {
    if (e.parts.size() == 1 && e.parts[0].first == 1 && e.parts[0].second.variable) return &e.parts[0].second;
    return nullptr;
  }

  // Orders goals so that comparisons and negations run as soon as their
  // variables are bound. `bound` is updated with every variable bound here.
  std::vector<CGoal> plan(const std::vector<Goal>& goals, std::set<std::string>& bound) {
    std::set<std::string> positive;
    for (const auto& g : goals) {
      if (g.kind == Goal::Kind::kAtom) collect_vars(g, positive);
      if (g.kind == Goal::Kind::kCompare && g.op == CompareOp::kEq) {
        if (auto* t = lone_variable(g.lhs)) positive.insert(t->name);
        if (auto* t = lone_variable(g.rhs)) positive.insert(t->name);
      }
    }

    std::vector<const Goal*> pending;
    for (const auto& g : goals) pending.push_back(&g);
    std::vector<CGoal> out;

    auto schedule_ready = [&]() {
      bool progress = true;
      while (progress) {
        progress = false;
        for (auto it = pending.begin(); it != pending.end();) {
          const Goal& g = **it;
          std::optional<CGoal> c;
          if (g.kind == Goal::Kind::kCompare) c = compare_if_ready(g, bound);
          else if (g.kind == Goal::Kind::kNot) c = negation_if_ready(g, bound, positive);
          if (c) {
            out.push_back(std::move(*c));
            it = pending.erase(it);
            progress = true;
          } else {
            ++it;
          }
        }
      }
    };

    schedule_ready();
    while (true) {
      auto atom = std::find_if(pending.begin(), pending.end(),
                               [](const Goal* g) { return g->kind == Goal::Kind::kAtom; });
      if (atom == pending.end()) break;
      CGoal c;
      c.predicate = (*atom)->atom.predicate;
      for (const auto& t : (*atom)->atom.args) {
        c.args.push_back(term(t));
        if (t.variable) bound.insert(t.name);
      }
      out.push_back(std::move(c));
      pending.erase(atom);
      schedule_ready();
    }
    for (const Goal* g : pending) {
      if (g->kind == Goal::Kind::kNot) {
        std::set<std::string> inner = bound;
        CGoal c;
        c.kind = Goal::Kind::kNot;
        c.negated = plan(g->negated, inner);
        out.push_back(std::move(c));
        continue;
      }
      std::set<std::string> vars;
      collect_vars(*g, vars);
      for (const auto& v : vars) {
        if (!bound.count(v)) {
          throw SafetyError("rule " + rule_.id + ": variable " + v + " in a comparison is not bound by a positive atom");
        }
      }
    }
    return out;
  }

  std::optional<CGoal> compare_if_ready(const Goal& g, std::set<std::string>& bound) {
    std::set<std::string> lv, rv;
    collect_vars(g.lhs, lv);
    collect_vars(g.rhs, rv);
    CGoal c;
    c.kind = Goal::Kind::kCompare;
    c.op = g.op;
    if (subset(lv, bound) && subset(rv, bound)) {
      c.lhs = expr(g.lhs);
      c.rhs = expr(g.rhs);
      return c;
    }
    if (g.op != CompareOp::kEq) return std::nullopt;
    const Term* target = nullptr;
    const Expr* source = nullptr;
    if (auto* t = lone_variable(g.lhs); t && !bound.count(t->name) && subset(rv, bound)) {
      target = t;
      source = &g.rhs;
    } else if (auto* t2 = lone_variable(g.rhs); t2 && !bound.count(t2->name) && subset(lv, bound)) {
      target = t2;
      source = &g.lhs;
    }
    if (!target) return std::nullopt;
    c.bind = var(target->name);
    c.rhs = expr(*source);
    bound.insert(target->name);
    return c;
  }

  std::optional<CGoal> negation_if_ready(const Goal& g, const std::set<std::string>& bound,
                                         const std::set<std::string>& positive) {
    std::set<std::string> vars;
    collect_vars(g, vars);
    for (const auto& v : vars)
      if (positive.count(v) && !bound.count(v)) return std::nullopt;
    std::set<std::string> inner = bound;
    CGoal c;
    c.kind = Goal::Kind::kNot;
    c.negated = plan(g.negated, inner);
    return c;
  }

  const Rule& rule_;
  std::map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// Value arithmetic and comparison

[[noreturn]] void type_error(const std::string& what, const Value& a, const Value& b) {
  throw TypeError("cannot " + what + " '" + to_string(a) + "' and '" + to_string(b) + "'");
}

Value add(const Value& a, const Value& b, int sign) {
  using K = Value::Kind;
  if (a.kind == K::kNumber && b.kind == K::kNumber) return Value::num(a.number + sign * b.number);
  if (a.kind == K::kDuration && b.kind == K::kDuration) return Value::duration(a.seconds + sign * b.seconds);
  if (a.kind == K::kTime && b.kind == K::kDuration) return Value::time(a.seconds + sign * b.seconds);
  if (a.kind == K::kTime && b.kind == K::kTime && sign < 0) return Value::duration(a.seconds - b.seconds);
  type_error(sign > 0 ? "add" : "subtract", a, b);
}

// Negative, zero or positive; nullopt when the kinds do not order.
std::optional<int> temporal_compare(const Value& a, const Value& b) {
  using K = Value::Kind;
  if (a.kind != b.kind) return std::nullopt;
  switch (a.kind) {
    case K::kTime:
      if (a.seconds != b.seconds) return a.seconds < b.seconds ? -1 : 1;
      if (a.tick && b.tick && *a.tick != *b.tick) return *a.tick < *b.tick ? -1 : 1;
      return 0;
    case K::kDuration: return a.seconds < b.seconds ? -1 : (a.seconds > b.seconds ? 1 : 0);
    case K::kNumber: return a.number < b.number ? -1 : (a.number > b.number ? 1 : 0);
    case K::kSymbol: return a.symbol < b.symbol ? -1 : (a.symbol > b.symbol ? 1 : 0);
    case K::kNull: return 0;
  }
  return std::nullopt;
}

bool compare(const Value& a, CompareOp op, const Value& b) {
  auto c = temporal_compare(a, b);
  if (op == CompareOp::kEq) return c && *c == 0;
  if (op == CompareOp::kNeq) return !c || *c != 0;
  if (a.is_null() || b.is_null()) return false;
  if (!c) type_error("compare", a, b);
  switch (op) {
    case CompareOp::kLess: return *c < 0;
    case CompareOp::kLessEq: return *c <= 0;
    case CompareOp::kGreater: return *c > 0;
    case CompareOp::kGreaterEq: return *c >= 0;
    default: return false;
  }
}

// ---------------------------------------------------------------------------
// Evaluation

struct Binding {
  std::vector<Value> values;
  std::vector<char> set;
};

const Value& resolve(const CTerm& t, const Binding& b) { return t.var < 0 ? t.value : b.values[t.var]; }

Value eval(const CExpr& e, const Binding& b) {
  Value acc = resolve(e.parts[0].second, b);
  if (e.parts[0].first < 0) {
    if (acc.kind == Value::Kind::kNumber) acc.number = -acc.number;
    else if (acc.kind == Value::Kind::kDuration) acc.seconds = -acc.seconds;
    else throw TypeError("cannot negate '" + to_string(acc) + "'");
  }
  for (std::size_t i = 1; i < e.parts.size(); ++i) acc = add(acc, resolve(e.parts[i].second, b), e.parts[i].first);
  return acc;
}

const Relation kEmpty;

class Solver {
 public:
  Solver(const Database& full, const Database* delta, std::size_t delta_goal)
      : full_(full), delta_(delta), delta_goal_(delta_goal) {}

  // Calls `emit` for every solution of `goals`; returns early when `emit`
  // returns false.
  bool solve(const std::vector<CGoal>& goals, std::size_t i, Binding& b, bool top,
             const std::function<bool(const Binding&)>& emit) const {
    if (i == goals.size()) return emit(b);
    const CGoal& g = goals[i];
    switch (g.kind) {
      case Goal::Kind::kCompare: {
        if (g.bind >= 0) {
          b.values[g.bind] = eval(g.rhs, b);
          b.set[g.bind] = 1;
          bool go = solve(goals, i + 1, b, top, emit);
          b.set[g.bind] = 0;
          return go;
        }
        if (!compare(eval(g.lhs, b), g.op, eval(g.rhs, b))) return true;
        return solve(goals, i + 1, b, top, emit);
      }
      case Goal::Kind::kNot: {
        bool found = false;
        solve(g.negated, 0, b, false, [&](const Binding&) {
          found = true;
          return false;
        });
        if (found) return true;
        return solve(goals, i + 1, b, top, emit);
      }
      case Goal::Kind::kAtom: {
        const Relation& rel = relation(g.predicate, top && delta_ && i == delta_goal_);
        for (const auto& row : rel) {
          if (row.size() != g.args.size()) continue;
          std::vector<int> newly;
          bool ok = true;
          for (std::size_t k = 0; k < row.size() && ok; ++k) {
            const CTerm& t = g.args[k];
            if (t.var < 0) {
              ok = t.value == row[k];
            } else if (b.set[t.var]) {
              ok = b.values[t.var] == row[k];
            } else {
              b.values[t.var] = row[k];
              b.set[t.var] = 1;
              newly.push_back(t.var);
            }
          }
          bool go = !ok || solve(goals, i + 1, b, top, emit);
          for (int v : newly) b.set[v] = 0;
          if (!go) return false;
        }
        return true;
      }
    }
    return true;
  }

 private:
  const Relation& relation(const std::string& pred, bool use_delta) const {
    const Database& db = use_delta ? *delta_ : full_;
    auto it = db.find(pred);
    return it == db.end() ? kEmpty : it->second;
  }

  const Database& full_;
  const Database* delta_;
  std::size_t delta_goal_;
};

void body_predicates(const std::vector<CGoal>& goals, bool negated,
                     std::vector<std::pair<std::string, bool>>& out) {
  for (const auto& g : goals) {
    if (g.kind == Goal::Kind::kAtom) out.emplace_back(g.predicate, negated);
    else if (g.kind == Goal::Kind::kNot) body_predicates(g.negated, true, out);
  }
}

struct Stratum {
  std::set<std::string> predicates;
  std::vector<std::size_t> rules;
};

std::vector<Stratum> stratify(const std::vector<CRule>& rules) {
  // Edges head -> body predicate, flagged when the dependency is negative.
  std::map<std::string, std::map<std::string, bool>> edges;
  std::map<std::string, std::string> witness;  // "p->q" to rule id
  std::set<std::string> nodes;
  for (const auto& r : rules) {
    nodes.insert(r.head);
    std::vector<std::pair<std::string, bool>> deps;
    body_predicates(r.plan, false, deps);
    for (const auto& [q, neg] : deps) {
      nodes.insert(q);
      bool& flag = edges[r.head][q];
      if (neg && !flag) witness[r.head + "->" + q] = r.id;
      flag = flag || neg;
    }
  }

  // Tarjan; components come out dependencies first.
  std::map<std::string, int> index, low;
  std::set<std::string> on_stack;
  std::vector<std::string> stack;
  std::vector<std::set<std::string>> components;
  int counter = 0;
  std::function<void(const std::string&)> visit = [&](const std::string& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack.insert(v);
    for (const auto& [w, neg] : edges[v]) {
      if (!index.count(w)) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack.count(w)) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::set<std::string> comp;
      std::string w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack.erase(w);
        comp.insert(w);
      } while (w != v);
      components.push_back(std::move(comp));
    }
  };
  for (const auto& n : nodes)
    if (!index.count(n)) visit(n);

  std::vector<Stratum> strata;
  for (auto& comp : components) {
    for (const auto& p : comp) {
      for (const auto& [q, neg] : edges[p]) {
        if (neg && comp.count(q)) {
          std::string cycle;
          for (const auto& member : comp) cycle += (cycle.empty() ? "" : ", ") + member;
          throw StratificationError("negation inside a recursive cycle {" + cycle + "}: rule " +
                                    witness[p + "->" + q] + " derives " + p + " from not " + q);
        }
      }
    }
    Stratum s;
    s.predicates = std::move(comp);
    for (std::size_t r = 0; r < rules.size(); ++r)
      if (s.predicates.count(rules[r].head)) s.rules.push_back(r);
    if (!s.rules.empty()) strata.push_back(std::move(s));
  }
  return strata;
}

struct Derived {
  std::string rule;
  Row row;
  friend auto operator<=>(const Derived&, const Derived&) = default;
};

struct Result {
  Database db;
  std::set<Derived> anomalies;
};

Result run(const std::vector<Rule>& rules, const FactSet& facts) {
  std::vector<CRule> compiled;
  compiled.reserve(rules.size());
  for (const auto& r : rules) compiled.push_back(Compiler(r).compile());
  auto strata = stratify(compiled);

  Result res;
  for (const auto& f : facts) res.db[f.predicate].insert(f.args);

  auto fire = [&](const CRule& r, const Database* delta, std::size_t delta_goal, Database& out) {
    Binding b{std::vector<Value>(r.vars), std::vector<char>(r.vars, 0)};
    Solver solver(res.db, delta, delta_goal);
    solver.solve(r.plan, 0, b, true, [&](const Binding& sol) {
      Row row;
      row.reserve(r.head_args.size());
      for (const auto& t : r.head_args) row.push_back(resolve(t, sol));
      if (r.head == "anomaly") res.anomalies.insert({r.id, row});
      auto it = res.db.find(r.head);
      if (it == res.db.end() || !it->second.count(row)) out[r.head].insert(std::move(row));
      return true;
    });
  };
  auto merge = [&](const Database& delta) {
    bool any = false;
    for (const auto& [p, rows] : delta) {
      for (const auto& row : rows) any = res.db[p].insert(row).second || any;
    }
    return any;
  };

  for (const auto& s : strata) {
    Database delta;
    for (auto r : s.rules) fire(compiled[r], nullptr, 0, delta);
    // Semi-naive rounds: each recursive atom in turn reads only the last delta.
    while (merge(delta)) {
      Database next;
      for (auto r : s.rules) {
        const auto& plan = compiled[r].plan;
        for (std::size_t i = 0; i < plan.size(); ++i) {
          if (plan[i].kind == Goal::Kind::kAtom && s.predicates.count(plan[i].predicate)) {
            fire(compiled[r], &delta, i, next);
          }
        }
      }
      delta = std::move(next);
    }
  }
  return res;
}

}  // namespace

FactSet saturate(const std::vector<Rule>& rules, const FactSet& facts) {
  auto res = run(rules, facts);
  FactSet out;
  for (auto& [p, rows] : res.db)
    for (const auto& row : rows) out.insert({p, row});
  return out;
}

std::vector<Anomaly> evaluate(const std::vector<Rule>& rules, const FactSet& facts, const std::string& day_id) {
  auto res = run(rules, facts);
  std::vector<Anomaly> out;
  for (const auto& d : res.anomalies) {
    const Value& cat = d.row[0];
    if (cat.kind != Value::Kind::kSymbol || category_name(cat.symbol).empty()) {
      throw TypeError("rule " + d.rule + " derived an anomaly with unknown category '" + to_string(cat) + "'");
    }
    out.push_back({day_id, d.rule, cat.symbol, d.row[1], d.row[2]});
  }
  std::stable_sort(out.begin(), out.end(), [](const Anomaly& a, const Anomaly& b) {
    if (a.rule_id != b.rule_id) return detail::natural_less(a.rule_id, b.rule_id);
    if (a.time.is_null() != b.time.is_null()) return a.time.is_null();
    if (auto c = temporal_compare(a.time, b.time); c && *c != 0) return *c < 0;
    return to_string(a.object) < to_string(b.object);
  });
  return out;
}

}  // namespace faber::anomaly
