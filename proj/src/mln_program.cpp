#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "faber/errors.hpp"
#include "faber/event_model.hpp"
#include "faber/mln.hpp"
#include "text_util.hpp"

namespace faber::mln {

// ---------------------------------------------------------------------------
// Signature

void Signature::declare_type(const std::string& type) {
  if (constants_.find(type) != constants_.end()) return;
  type_order_.push_back(type);
  constants_[type];
}

void Signature::add_constant(const std::string& type, const std::string& constant) {
  if (!has_type(type)) throw TypeError("unknown type '" + type + "'");
  auto it = constant_type_.find(constant);
  if (it != constant_type_.end()) {
    if (it->second != type) {
      throw TypeError("constant '" + constant + "' already has type '" + it->second + "', cannot add to '" + type +
                      "'");
    }
    return;
  }
  constant_type_.emplace(constant, type);
  constants_.find(type)->second.push_back(constant);
}

void Signature::declare_predicate(PredicateDecl decl) {
  if (predicate(decl.name)) throw TypeError("predicate '" + decl.name + "' declared twice");
  for (const auto& t : decl.arg_types) {
    if (!has_type(t)) throw TypeError("predicate '" + decl.name + "' uses undeclared type '" + t + "'");
  }
  predicates_.push_back(std::move(decl));
}

bool Signature::has_type(std::string_view type) const { return constants_.find(type) != constants_.end(); }

const PredicateDecl* Signature::predicate(std::string_view name) const {
  for (const auto& p : predicates_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const std::vector<std::string>& Signature::constants(std::string_view type) const {
  static const std::vector<std::string> empty;
  auto it = constants_.find(type);
  return it == constants_.end() ? empty : it->second;
}

std::optional<std::string> Signature::type_of(std::string_view constant) const {
  auto it = constant_type_.find(constant);
  if (it == constant_type_.end()) return std::nullopt;
  return it->second;
}

double SoftFormula::weight(const std::vector<std::string>& binding) const {
  auto it = weights.find(binding);
  return it == weights.end() ? 0.0 : it->second;
}

// ---------------------------------------------------------------------------
// Lexer / parser

namespace {

enum class Tok {
  kIdent,
  kNumber,
  kLParen,
  kRParen,
  kLBrace,
  kRBrace,
  kComma,
  kColon,
  kPlus,
  kNot,
  kAnd,
  kOr,
  kImplies,
  kCmp,
  kPipe,
  kEnd
};

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  int column = 0;
};

class LineLexer {
 public:
  LineLexer(std::string_view line, int line_no) : line_no_(line_no) { lex(line); }

  const Token& peek(std::size_t ahead = 0) const {
    return pos_ + ahead < tokens_.size() ? tokens_[pos_ + ahead] : tokens_.back();
  }
  Token take() {
    auto t = peek();
    if (pos_ < tokens_.size() - 1) ++pos_;
    return t;
  }
  bool accept(Tok kind) {
    if (peek().kind != kind) return false;
    take();
    return true;
  }
  Token expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(std::string("expected ") + what);
    return take();
  }
  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(message + (peek().kind == Tok::kEnd ? " at end of line" : " near '" + peek().text + "'"),
                     line_no_, peek().column);
  }
  int line() const { return line_no_; }

 private:
  void lex(std::string_view s) {
    std::size_t i = 0;
    auto push = [&](Tok k, std::size_t start, std::size_t len) {
      tokens_.push_back({k, std::string(s.substr(start, len)), static_cast<int>(start) + 1});
      i = start + len;
    };
    while (i < s.size()) {
      char c = s[i];
      if (c == ' ' || c == '\t' || c == '\r') {
        ++i;
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        auto j = i;
        while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
        push(Tok::kIdent, i, j - i);
        continue;
      }
      bool negative_number = c == '-' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]));
      if (std::isdigit(static_cast<unsigned char>(c)) || negative_number) {
        auto j = i + 1;
        while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.' || s[j] == 'e' ||
                                s[j] == 'E' || ((s[j] == '-' || s[j] == '+') && (s[j - 1] == 'e' || s[j - 1] == 'E')))) {
          ++j;
        }
        push(Tok::kNumber, i, j - i);
        continue;
      }
      auto rest = s.substr(i);
      if (detail::starts_with(rest, "=>")) { push(Tok::kImplies, i, 2); continue; }
      if (detail::starts_with(rest, "->")) { push(Tok::kImplies, i, 2); continue; }
      if (detail::starts_with(rest, "\xE2\x86\x92")) { push(Tok::kImplies, i, 3); continue; }  // →
      if (detail::starts_with(rest, "\xC2\xAC")) { push(Tok::kNot, i, 2); continue; }          // ¬
      if (detail::starts_with(rest, "\xE2\x88\xA7")) { push(Tok::kAnd, i, 3); continue; }      // ∧
      if (detail::starts_with(rest, "\xE2\x88\xA8")) { push(Tok::kOr, i, 3); continue; }       // ∨
      if (detail::starts_with(rest, "\xE2\x89\xA0")) { push(Tok::kCmp, i, 3); tokens_.back().text = "!="; continue; }
      if (detail::starts_with(rest, "!=") || detail::starts_with(rest, "<=") || detail::starts_with(rest, ">=")) {
        push(Tok::kCmp, i, 2);
        continue;
      }
      switch (c) {
        case '(': push(Tok::kLParen, i, 1); continue;
        case ')': push(Tok::kRParen, i, 1); continue;
        case '{': push(Tok::kLBrace, i, 1); continue;
        case '}': push(Tok::kRBrace, i, 1); continue;
        case ',': push(Tok::kComma, i, 1); continue;
        case ':': push(Tok::kColon, i, 1); continue;
        case '+': push(Tok::kPlus, i, 1); continue;
        case '!': push(Tok::kNot, i, 1); continue;
        case '&': push(Tok::kAnd, i, 1); continue;
        case '|': push(Tok::kPipe, i, 1); continue;
        case '=': case '<': case '>': push(Tok::kCmp, i, 1); continue;
        default:
          throw ParseError(std::string("unexpected character '") + c + "'", line_no_, static_cast<int>(i) + 1);
      }
    }
    tokens_.push_back({Tok::kEnd, "", static_cast<int>(s.size()) + 1});
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  int line_no_;
};

bool is_variable_name(std::string_view name) {
  return !name.empty() && std::islower(static_cast<unsigned char>(name.front()));
}

std::optional<Comparison> comparison_of(std::string_view op) {
  if (op == "=") return Comparison::kEq;
  if (op == "!=") return Comparison::kNeq;
  if (op == "<") return Comparison::kLess;
  if (op == "<=") return Comparison::kLessEq;
  if (op == ">") return Comparison::kGreater;
  if (op == ">=") return Comparison::kGreaterEq;
  return std::nullopt;
}

const char* comparison_text(Comparison c) {
  switch (c) {
    case Comparison::kEq: return "=";
    case Comparison::kNeq: return "!=";
    case Comparison::kLess: return "<";
    case Comparison::kLessEq: return "<=";
    case Comparison::kGreater: return ">";
    case Comparison::kGreaterEq: return ">=";
  }
  return "?";
}

Comparison negate(Comparison c) {
  switch (c) {
    case Comparison::kEq: return Comparison::kNeq;
    case Comparison::kNeq: return Comparison::kEq;
    case Comparison::kLess: return Comparison::kGreaterEq;
    case Comparison::kLessEq: return Comparison::kGreater;
    case Comparison::kGreater: return Comparison::kLessEq;
    case Comparison::kGreaterEq: return Comparison::kLess;
  }
  return c;
}

class FormulaParser {
 public:
  explicit FormulaParser(LineLexer& lex) : lex_(lex) {}

  // implication binds loosest and is right-associative
  Expr parse_formula() {
    auto lhs = parse_or();
    if (lex_.accept(Tok::kImplies)) {
      Expr e;
      e.kind = Expr::Kind::kImplies;
      e.children.push_back(std::move(lhs));
      e.children.push_back(parse_formula());
      return e;
    }
    return lhs;
  }

 private:
  Expr parse_or() {
    auto first = parse_and();
    if (lex_.peek().kind != Tok::kOr && lex_.peek().kind != Tok::kPipe) return first;
    Expr e;
    e.kind = Expr::Kind::kOr;
    e.children.push_back(std::move(first));
    while (lex_.accept(Tok::kOr) || lex_.accept(Tok::kPipe)) e.children.push_back(parse_and());
    return e;
  }

  Expr parse_and() {
    auto first = parse_unary();
    if (lex_.peek().kind != Tok::kAnd) return first;
    Expr e;
    e.kind = Expr::Kind::kAnd;
    e.children.push_back(std::move(first));
    while (lex_.accept(Tok::kAnd)) e.children.push_back(parse_unary());
    return e;
  }

  Expr parse_unary() {
    if (lex_.accept(Tok::kNot)) {
      Expr e;
      e.kind = Expr::Kind::kNot;
      e.children.push_back(parse_unary());
      return e;
    }
    if (lex_.accept(Tok::kLParen)) {
      auto inner = parse_formula();
      lex_.expect(Tok::kRParen, "')'");
      return inner;
    }
    // builtin: term cmp term
    if (lex_.peek(1).kind == Tok::kCmp ||
        (lex_.peek().kind == Tok::kPlus && lex_.peek(2).kind == Tok::kCmp)) {
      Expr e;
      e.kind = Expr::Kind::kBuiltin;
      e.builtin.lhs = parse_term();
      e.builtin.op = *comparison_of(lex_.take().text);
      e.builtin.rhs = parse_term();
      return e;
    }
    Expr e;
    e.kind = Expr::Kind::kAtom;
    e.atom.predicate = lex_.expect(Tok::kIdent, "predicate name").text;
    lex_.expect(Tok::kLParen, "'('");
    if (!lex_.accept(Tok::kRParen)) {
      do {
        e.atom.args.push_back(parse_term());
      } while (lex_.accept(Tok::kComma));
      lex_.expect(Tok::kRParen, "')'");
    }
    return e;
  }

  Term parse_term() {
    Term t;
    t.plus = lex_.accept(Tok::kPlus);
    auto tok = lex_.take();
    if (tok.kind == Tok::kIdent) {
      t.variable = is_variable_name(tok.text);
      t.name = tok.text;
    } else if (tok.kind == Tok::kNumber) {
      t.variable = false;
      t.name = tok.text;
    } else {
      throw ParseError("expected a term", lex_.line(), tok.column);
    }
    if (t.plus && !t.variable) throw ParseError("'+' marks variables only", lex_.line(), tok.column);
    return t;
  }

  LineLexer& lex_;
};

// NNF with negations only on atoms / builtins.
Expr to_nnf(const Expr& e, bool negated) {
  switch (e.kind) {
    case Expr::Kind::kAtom: {
      if (!negated) return e;
      Expr n;
      n.kind = Expr::Kind::kNot;
      n.children.push_back(e);
      return n;
    }
    case Expr::Kind::kBuiltin: {
      Expr b = e;
      if (negated) b.builtin.op = negate(b.builtin.op);
      return b;
    }
    case Expr::Kind::kNot:
      return to_nnf(e.children[0], !negated);
    case Expr::Kind::kImplies: {
      Expr as_or;
      as_or.kind = Expr::Kind::kOr;
      Expr neg_lhs;
      neg_lhs.kind = Expr::Kind::kNot;
      neg_lhs.children.push_back(e.children[0]);
      as_or.children.push_back(std::move(neg_lhs));
      as_or.children.push_back(e.children[1]);
      return to_nnf(as_or, negated);
    }
    case Expr::Kind::kAnd:
    case Expr::Kind::kOr: {
      Expr out;
      bool is_and = (e.kind == Expr::Kind::kAnd) != negated;
      out.kind = is_and ? Expr::Kind::kAnd : Expr::Kind::kOr;
      for (const auto& c : e.children) out.children.push_back(to_nnf(c, negated));
      return out;
    }
  }
  return e;
}

std::vector<Clause> nnf_to_cnf(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::kAtom:
      return {{Literal{true, false, e.atom, {}}}};
    case Expr::Kind::kNot:
      return {{Literal{false, false, e.children[0].atom, {}}}};
    case Expr::Kind::kBuiltin:
      return {{Literal{true, true, {}, e.builtin}}};
    case Expr::Kind::kAnd: {
      std::vector<Clause> out;
      for (const auto& c : e.children) {
        auto sub = nnf_to_cnf(c);
        out.insert(out.end(), sub.begin(), sub.end());
      }
      return out;
    }
    case Expr::Kind::kOr: {
      std::vector<Clause> acc = {{}};
      for (const auto& c : e.children) {
        auto sub = nnf_to_cnf(c);
        std::vector<Clause> next;
        for (const auto& a : acc) {
          for (const auto& b : sub) {
            Clause merged = a;
            merged.insert(merged.end(), b.begin(), b.end());
            next.push_back(std::move(merged));
          }
        }
        acc = std::move(next);
      }
      return acc;
    }
    case Expr::Kind::kImplies:
      break;
  }
  throw std::logic_error("implication left in NNF");
}

void collect_terms(const Expr& e, std::vector<const Term*>& out) {
  if (e.kind == Expr::Kind::kAtom) {
    for (const auto& t : e.atom.args) out.push_back(&t);
  } else if (e.kind == Expr::Kind::kBuiltin) {
    out.push_back(&e.builtin.lhs);
    out.push_back(&e.builtin.rhs);
  }
  for (const auto& c : e.children) collect_terms(c, out);
}

void type_atoms(const Expr& e, Signature& sig, Formula& f, int line) {
  if (e.kind == Expr::Kind::kAtom) {
    const auto* decl = sig.predicate(e.atom.predicate);
    if (!decl) throw TypeError("line " + std::to_string(line) + ": unknown predicate '" + e.atom.predicate + "'");
    if (decl->arg_types.size() != e.atom.args.size()) {
      throw TypeError("line " + std::to_string(line) + ": predicate '" + decl->name + "' expects " +
                      std::to_string(decl->arg_types.size()) + " arguments, got " +
                      std::to_string(e.atom.args.size()));
    }
    for (std::size_t i = 0; i < e.atom.args.size(); ++i) {
      const auto& term = e.atom.args[i];
      const auto& type = decl->arg_types[i];
      if (term.variable) {
        auto [it, inserted] = f.variable_types.emplace(term.name, type);
        if (!inserted && it->second != type) {
          throw TypeError("line " + std::to_string(line) + ": variable '" + term.name + "' has type '" + it->second +
                          "' but predicate '" + decl->name + "' argument " + std::to_string(i + 1) + " expects '" +
                          type + "'");
        }
      } else {
        auto existing = sig.type_of(term.name);
        if (existing && *existing != type) {
          throw TypeError("line " + std::to_string(line) + ": constant '" + term.name + "' has type '" + *existing +
                          "' but predicate '" + decl->name + "' argument " + std::to_string(i + 1) + " expects '" +
                          type + "'");
        }
        sig.add_constant(type, term.name);
      }
    }
  }
  for (const auto& c : e.children) type_atoms(c, sig, f, line);
}

void type_builtins(const Expr& e, const Signature& sig, Formula& f, int line) {
  if (e.kind == Expr::Kind::kBuiltin) {
    auto type_of = [&](const Term& t) -> std::optional<std::string> {
      if (t.variable) {
        auto it = f.variable_types.find(t.name);
        if (it == f.variable_types.end()) {
          throw TypeError("line " + std::to_string(line) + ": variable '" + t.name +
                          "' appears only in a built-in comparison");
        }
        return it->second;
      }
      return sig.type_of(t.name);
    };
    auto l = type_of(e.builtin.lhs);
    auto r = type_of(e.builtin.rhs);
    if (l && r && *l != *r) {
      throw TypeError("line " + std::to_string(line) + ": comparison between '" + *l + "' and '" + *r + "'");
    }
  }
  for (const auto& c : e.children) type_builtins(c, sig, f, line);
}

Formula make_formula(std::string id, Expr expr, Signature& sig, int line) {
  Formula f;
  f.id = std::move(id);
  f.expr = std::move(expr);
  type_atoms(f.expr, sig, f, line);
  type_builtins(f.expr, sig, f, line);
  std::vector<const Term*> terms;
  collect_terms(f.expr, terms);
  for (const auto* t : terms) {
    if (!t->variable) continue;
    if (std::find(f.variables.begin(), f.variables.end(), t->name) == f.variables.end()) {
      f.variables.push_back(t->name);
    }
    if (t->plus && std::find(f.plus_variables.begin(), f.plus_variables.end(), t->name) == f.plus_variables.end()) {
      f.plus_variables.push_back(t->name);
    }
  }
  f.clauses = nnf_to_cnf(to_nnf(f.expr, false));
  return f;
}

enum class Section { kNone, kTypes, kPredicates, kSoft, kHard, kWeights };

std::optional<Section> section_keyword(std::string_view word) {
  if (word == "types") return Section::kTypes;
  if (word == "predicates") return Section::kPredicates;
  if (word == "soft") return Section::kSoft;
  if (word == "hard") return Section::kHard;
  if (word == "weights") return Section::kWeights;
  return std::nullopt;
}

double parse_weight(std::string_view text, int line) {
  double w = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), w);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(w)) {
    throw ParseError("invalid weight '" + std::string(text) + "'", line);
  }
  return w;
}

struct PendingWeight {
  std::string formula;
  std::string binding;
  double value;
  int line;
};

}  // namespace

MlnProgram parse_program(std::string_view text) {
  MlnProgram program;
  Section section = Section::kNone;
  std::vector<PendingWeight> pending;
  std::map<std::string, int> ids;
  int line_no = 0;

  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    auto stripped = detail::trim(raw);
    if (auto hash = stripped.find("//"); hash != std::string_view::npos) stripped = detail::trim(stripped.substr(0, hash));
    if (stripped.empty() || stripped.front() == '#') continue;

    // Section header, possibly followed by inline content.
    if (auto colon = stripped.find(':'); colon != std::string_view::npos) {
      if (auto s = section_keyword(detail::trim(stripped.substr(0, colon)))) {
        section = *s;
        stripped = detail::trim(stripped.substr(colon + 1));
        if (stripped.empty()) continue;
      }
    }
    if (section == Section::kNone) throw ParseError("content outside of a section", line_no, 1);
    if (section == Section::kWeights) {
      auto fields = detail::split(stripped, '|');
      if (fields.size() != 3) throw ParseError("weight line must be 'formula | binding | value'", line_no);
      pending.push_back({std::string(detail::trim(fields[0])), std::string(detail::trim(fields[1])),
                         parse_weight(detail::trim(fields[2]), line_no), line_no});
      continue;
    }
    LineLexer lex(stripped, line_no);

    switch (section) {
      case Section::kTypes: {
        auto name = lex.expect(Tok::kIdent, "type name").text;
        program.signature.declare_type(name);
        if (lex.peek().kind == Tok::kCmp && lex.peek().text == "=") {
          lex.take();
          lex.expect(Tok::kLBrace, "'{'");
          if (!lex.accept(Tok::kRBrace)) {
            do {
              auto c = lex.take();
              if (c.kind != Tok::kIdent && c.kind != Tok::kNumber) lex.fail("expected constant");
              program.signature.add_constant(name, c.text);
            } while (lex.accept(Tok::kComma));
            lex.expect(Tok::kRBrace, "'}'");
          }
        }
        break;
      }
      case Section::kPredicates: {
        auto tag = lex.expect(Tok::kIdent, "'observable' or 'hidden'").text;
        if (tag != "observable" && tag != "hidden") lex.fail("expected 'observable' or 'hidden'");
        PredicateDecl decl;
        decl.observable = tag == "observable";
        decl.name = lex.expect(Tok::kIdent, "predicate name").text;
        lex.expect(Tok::kLParen, "'('");
        if (!lex.accept(Tok::kRParen)) {
          do {
            auto type = lex.expect(Tok::kIdent, "type name").text;
            if (!program.signature.has_type(type)) {
              throw TypeError("line " + std::to_string(line_no) + ": undeclared type '" + type + "'");
            }
            decl.arg_types.push_back(type);
          } while (lex.accept(Tok::kComma));
          lex.expect(Tok::kRParen, "')'");
        }
        program.signature.declare_predicate(std::move(decl));
        break;
      }
      case Section::kSoft:
      case Section::kHard: {
        bool soft = section == Section::kSoft;
        std::string id;
        if (lex.peek().kind == Tok::kIdent && lex.peek(1).kind == Tok::kColon) {
          id = lex.take().text;
          lex.take();
        } else {
          id = (soft ? "s" : "h") + std::to_string((soft ? program.soft.size() : program.hard.size()) + 1);
        }
        if (!ids.emplace(id, line_no).second) throw ParseError("duplicate formula id '" + id + "'", line_no);
        std::optional<double> weight;
        if (soft && lex.peek().kind == Tok::kNumber && lex.peek(1).kind != Tok::kCmp) {
          weight = parse_weight(lex.take().text, line_no);
        }
        FormulaParser parser(lex);
        auto expr = parser.parse_formula();
        if (lex.peek().kind != Tok::kEnd) lex.fail("unexpected trailing input");
        auto formula = make_formula(id, std::move(expr), program.signature, line_no);
        if (soft) {
          SoftFormula sf{std::move(formula), {}};
          if (weight) {
            if (!sf.formula.plus_variables.empty()) {
              throw ParseError("inline weight on a formula with '+' variables; use the weights block", line_no);
            }
            sf.weights[{}] = *weight;
          }
          program.soft.push_back(std::move(sf));
        } else {
          if (!formula.plus_variables.empty()) throw ParseError("hard formulae cannot carry '+' variables", line_no);
          program.hard.push_back(std::move(formula));
        }
        break;
      }
      case Section::kWeights:
      case Section::kNone:
        break;
    }
  }

  for (const auto& w : pending) {
    auto it = std::find_if(program.soft.begin(), program.soft.end(),
                           [&](const SoftFormula& sf) { return sf.formula.id == w.formula; });
    if (it == program.soft.end()) throw ParseError("weight for unknown soft formula '" + w.formula + "'", w.line);
    const auto& plus = it->formula.plus_variables;
    std::vector<std::string> key(plus.size());
    std::vector<bool> seen(plus.size(), false);
    if (w.binding != "-") {
      for (auto part : detail::split(w.binding, ',')) {
        auto kv = detail::split(part, '=');
        if (kv.size() != 2) throw ParseError("binding entries must be var=Constant", w.line);
        auto var = std::string(detail::trim(kv[0]));
        auto pos = std::find(plus.begin(), plus.end(), var);
        if (pos == plus.end()) throw ParseError("'" + var + "' is not a '+' variable of " + w.formula, w.line);
        auto idx = static_cast<std::size_t>(pos - plus.begin());
        key[idx] = std::string(detail::trim(kv[1]));
        seen[idx] = true;
      }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw ParseError("binding for " + w.formula + " does not cover every '+' variable", w.line);
    }
    it->weights[key] = w.value;
  }
  return program;
}

// ---------------------------------------------------------------------------
// Writer

namespace {

std::string term_text(const Term& t) { return (t.plus ? "+" : "") + t.name; }

int precedence(Expr::Kind k) {
  switch (k) {
    case Expr::Kind::kImplies: return 0;
    case Expr::Kind::kOr: return 1;
    case Expr::Kind::kAnd: return 2;
    default: return 3;
  }
}

void write_expr(const Expr& e, std::ostream& out, int parent_prec) {
  int prec = precedence(e.kind);
  bool paren = prec < parent_prec;
  if (paren) out << '(';
  switch (e.kind) {
    case Expr::Kind::kAtom: {
      out << e.atom.predicate << '(';
      for (std::size_t i = 0; i < e.atom.args.size(); ++i) out << (i ? "," : "") << term_text(e.atom.args[i]);
      out << ')';
      break;
    }
    case Expr::Kind::kBuiltin:
      out << term_text(e.builtin.lhs) << ' ' << comparison_text(e.builtin.op) << ' ' << term_text(e.builtin.rhs);
      break;
    case Expr::Kind::kNot:
      out << '!';
      write_expr(e.children[0], out, 3);
      break;
    case Expr::Kind::kAnd:
    case Expr::Kind::kOr:
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out << (e.kind == Expr::Kind::kAnd ? " & " : " | ");
        write_expr(e.children[i], out, prec + 1);
      }
      break;
    case Expr::Kind::kImplies:
      write_expr(e.children[0], out, 1);
      out << " => ";
      write_expr(e.children[1], out, 0);
      break;
  }
  if (paren) out << ')';
}

}  // namespace

std::string to_string(const Expr& expr) {
  std::ostringstream out;
  write_expr(expr, out, 0);
  return out.str();
}

std::string write_program(const MlnProgram& program) {
  std::ostringstream out;
  const auto& sig = program.signature;
  out << "types:\n";
  // Constants introduced only through formulas are re-derived on parse.
  for (const auto& type : sig.types()) {
    out << "  " << type;
    const auto& cs = sig.constants(type);
    if (!cs.empty()) {
      out << " = {";
      for (std::size_t i = 0; i < cs.size(); ++i) out << (i ? ", " : "") << cs[i];
      out << '}';
    }
    out << '\n';
  }
  out << "predicates:\n";
  for (const auto& p : sig.predicates()) {
    out << "  " << (p.observable ? "observable " : "hidden ") << p.name << '(';
    for (std::size_t i = 0; i < p.arg_types.size(); ++i) out << (i ? ", " : "") << p.arg_types[i];
    out << ")\n";
  }
  out << "soft:\n";
  for (const auto& sf : program.soft) out << "  " << sf.formula.id << ": " << to_string(sf.formula.expr) << '\n';
  out << "hard:\n";
  for (const auto& f : program.hard) out << "  " << f.id << ": " << to_string(f.expr) << '\n';
  out << "weights:\n";
  for (const auto& sf : program.soft) {
    for (const auto& [key, value] : sf.weights) {
      out << "  " << sf.formula.id << " | ";
      if (key.empty()) {
        out << '-';
      } else {
        for (std::size_t i = 0; i < key.size(); ++i) {
          out << (i ? "," : "") << sf.formula.plus_variables[i] << '=' << key[i];
        }
      }
      out << " | " << format_number(value) << '\n';
    }
  }
  return out.str();
}

std::string to_string(const GroundFact& fact) {
  std::string s = fact.predicate + "(";
  for (std::size_t i = 0; i < fact.args.size(); ++i) s += (i ? "," : "") + fact.args[i];
  return s + ")";
}

}  // namespace faber::mln
