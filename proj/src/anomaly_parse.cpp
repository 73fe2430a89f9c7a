#include <cctype>
#include <cmath>
#include <string>

#include "faber/anomaly.hpp"
#include "faber/errors.hpp"

namespace faber::anomaly {

Value Value::sym(std::string s) {
  Value v;
  v.kind = Kind::kSymbol;
  v.symbol = std::move(s);
  return v;
}

Value Value::num(double x) {
  Value v;
  v.kind = Kind::kNumber;
  v.number = x;
  return v;
}

Value Value::time(std::int64_t seconds_of_day, std::optional<std::uint64_t> tick) {
  Value v;
  v.kind = Kind::kTime;
  v.seconds = seconds_of_day;
  v.tick = tick;
  return v;
}

Value Value::duration(std::int64_t seconds) {
  Value v;
  v.kind = Kind::kDuration;
  v.seconds = seconds;
  return v;
}

std::strong_ordering operator<=>(const Value& a, const Value& b) {
  if (a.kind != b.kind) return a.kind <=> b.kind;
  if (auto c = a.symbol <=> b.symbol; c != 0) return c;
  if (a.number < b.number) return std::strong_ordering::less;
  if (b.number < a.number) return std::strong_ordering::greater;
  if (auto c = a.seconds <=> b.seconds; c != 0) return c;
  return a.tick <=> b.tick;
}

std::string to_string(const Value& v) {
  switch (v.kind) {
    case Value::Kind::kNull: return "null";
    case Value::Kind::kSymbol: return v.symbol;
    case Value::Kind::kNumber: return format_number(v.number);
    case Value::Kind::kTime:
      return v.tick ? "@" + std::to_string(*v.tick) + "/" + format_clock(v.seconds) : format_clock(v.seconds);
    case Value::Kind::kDuration: return std::to_string(v.seconds) + "s";
  }
  return {};
}

std::string to_string(const Fact& f) {
  std::string out = f.predicate + "(";
  for (std::size_t i = 0; i < f.args.size(); ++i) {
    if (i) out += ", ";
    out += to_string(f.args[i]);
  }
  return out + ")";
}

namespace {

enum class Tok { kIdent, kValue, kPunct, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;  // identifier or punctuation
  Value value;       // literal
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::kIdent;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          t.text += src_[pos_];
          advance();
        }
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        t.kind = Tok::kValue;
        t.value = number_literal(t);
      } else if (c == '@') {
        advance();
        t.kind = Tok::kValue;
        t.value = tick_literal(t);
      } else if (c == '\'') {
        advance();
        std::string s;
        while (pos_ < src_.size() && src_[pos_] != '\'') {
          s += src_[pos_];
          advance();
        }
        if (pos_ >= src_.size()) throw ParseError("unterminated quoted constant", t.line, t.col);
        advance();
        t.kind = Tok::kValue;
        t.value = Value::sym(std::move(s));
      } else {
        t.kind = Tok::kPunct;
        t.text = punct(t);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i, ++pos_) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else if ((static_cast<unsigned char>(src_[pos_]) & 0xC0) != 0x80) {
        ++col_;
      }
    }
  }

  bool at(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '%' || c == '#' || at("//")) {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        return;
      }
    }
  }

  std::string digits() {
    std::string s;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      s += src_[pos_];
      advance();
    }
    return s;
  }

  std::int64_t clock_rest(std::string first, const Token& t) {
    // `first` holds the hour digits; the cursor sits on ':'.
    std::string text = first;
    while (pos_ + 1 < src_.size() && src_[pos_] == ':' && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
      text += ':';
      advance();
      text += digits();
    }
    auto secs = parse_clock(text);
    if (!secs) throw ParseError("malformed clock literal '" + text + "'", t.line, t.col);
    return *secs;
  }

  Value number_literal(const Token& t) {
    std::string whole = digits();
    if (pos_ + 1 < src_.size() && src_[pos_] == ':' && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
      return Value::time(clock_rest(whole, t));
    }
    std::string text = whole;
    if (pos_ + 1 < src_.size() && src_[pos_] == '.' && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
      text += '.';
      advance();
      text += digits();
    }
    double x = std::stod(text);
    std::string unit;
    while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) {
      unit += src_[pos_];
      advance();
    }
    if (unit.empty()) return Value::num(x);
    double scale = 0;
    if (unit == "s" || unit == "sec") scale = 1;
    else if (unit == "m" || unit == "min") scale = 60;
    else if (unit == "h") scale = 3600;
    else throw ParseError("unknown duration unit '" + unit + "'", t.line, t.col);
    return Value::duration(static_cast<std::int64_t>(std::llround(x * scale)));
  }

  Value tick_literal(const Token& t) {
    std::string d = digits();
    if (d.empty()) throw ParseError("expected tick after '@'", t.line, t.col);
    std::uint64_t tick = std::stoull(d);
    if (pos_ < src_.size() && src_[pos_] == '/') {
      advance();
      std::string hour = digits();
      if (hour.empty() || pos_ >= src_.size() || src_[pos_] != ':') {
        throw ParseError("expected clock after '/'", t.line, t.col);
      }
      return Value::time(clock_rest(hour, t), tick);
    }
    // Without a clock the tick stands in for time at the default 30 s base.
    return Value::time(static_cast<std::int64_t>(tick) * 30, tick);
  }

  std::string punct(const Token& t) {
    static const std::pair<std::string_view, std::string_view> table[] = {
        {":-", ":-"}, {"\xE2\x86\x90", ":-"}, {"<=", "<="}, {">=", ">="}, {"!=", "!="}, {"==", "="},
        {"\xE2\x89\xA4", "<="}, {"\xE2\x89\xA5", ">="}, {"\xE2\x89\xA0", "!="}, {"\xE2\x88\xA7", ","},
        {"\xE2\x88\x92", "-"}, {"\xC2\xAC", "not"}, {"&", ","}, {",", ","}, {":", ":"}, {"(", "("},
        {")", ")"}, {".", "."}, {"<", "<"}, {">", ">"}, {"=", "="}, {"+", "+"}, {"-", "-"}, {"!", "not"},
    };
    for (const auto& [src, canon] : table) {
      if (at(src)) {
        advance(src.size());
        return std::string(canon);
      }
    }
    throw ParseError(std::string("unexpected character '") + src_[pos_] + "'", t.line, t.col);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

bool is_variable_name(const std::string& s) {
  return !s.empty() && (s[0] == '_' || std::isupper(static_cast<unsigned char>(s[0])));
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::vector<Rule> rules() {
    std::vector<Rule> out;
    while (peek().kind != Tok::kEnd) {
      Rule r = rule();
      if (r.id.empty()) r.id = "R" + std::to_string(out.size() + 1);
      out.push_back(std::move(r));
    }
    return out;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool is_punct(std::string_view p, std::size_t k = 0) const {
    return peek(k).kind == Tok::kPunct && peek(k).text == p;
  }
  [[noreturn]] void fail(const std::string& msg, const Token& t) const { throw ParseError(msg, t.line, t.col); }
  void expect(std::string_view p) {
    if (!is_punct(p)) fail("expected '" + std::string(p) + "' but found '" + describe(peek()) + "'", peek());
    ++pos_;
  }
  static std::string describe(const Token& t) {
    if (t.kind == Tok::kEnd) return "end of input";
    if (t.kind == Tok::kValue) return to_string(t.value);
    return t.text;
  }

  Rule rule() {
    Rule r;
    r.line = peek().line;
    bool numeric_label = peek().kind == Tok::kValue && peek().value.kind == Value::Kind::kNumber;
    if ((peek().kind == Tok::kIdent || numeric_label) && is_punct(":", 1)) {
      const Token& t = next();
      r.id = numeric_label ? format_number(t.value.number) : t.text;
      ++pos_;
    }
    const Token& head_tok = peek();
    r.head = atom();
    if (r.head.predicate == "anomaly") check_anomaly_head(r.head, head_tok);
    if (is_punct(":-")) {
      ++pos_;
      r.body = conjunction();
    }
    expect(".");
    return r;
  }

  void check_anomaly_head(const Atom& head, const Token& t) const {
    if (head.args.size() != 3) fail("anomaly head needs (category, object, time)", t);
    const auto& cat = head.args[0];
    if (!cat.variable) {
      if (cat.value.kind != Value::Kind::kSymbol || category_name(cat.value.symbol).empty()) {
        fail("unknown anomaly category '" + to_string(cat.value) + "'", t);
      }
    }
  }

  std::vector<Goal> conjunction() {
    std::vector<Goal> goals;
    while (true) {
      goal(goals);
      if (!is_punct(",")) return goals;
      ++pos_;
    }
  }

  void goal(std::vector<Goal>& goals) {
    if ((peek().kind == Tok::kIdent && peek().text == "not" && is_punct("(", 1)) || is_punct("not")) {
      bool symbol_form = is_punct("not");
      ++pos_;
      Goal g;
      g.kind = Goal::Kind::kNot;
      if (symbol_form && !is_punct("(")) {
        Goal inner;
        inner.atom = atom();
        g.negated.push_back(std::move(inner));
      } else {
        expect("(");
        g.negated = conjunction();
        expect(")");
      }
      goals.push_back(std::move(g));
      return;
    }
    if (peek().kind == Tok::kIdent && is_punct("(", 1)) {
      Goal g;
      g.atom = atom();
      goals.push_back(std::move(g));
      return;
    }
    // Comparison chain: e1 op e2 [op e3 ...]
    const Token& start = peek();
    Expr left = expr();
    bool any = false;
    while (auto op = compare_op()) {
      Goal g;
      g.kind = Goal::Kind::kCompare;
      g.op = *op;
      g.lhs = left;
      g.rhs = expr();
      left = g.rhs;
      goals.push_back(std::move(g));
      any = true;
    }
    if (!any) fail("expected an atom or a comparison", start);
  }

  std::optional<CompareOp> compare_op() {
    if (peek().kind != Tok::kPunct) return std::nullopt;
    const auto& p = peek().text;
    std::optional<CompareOp> op;
    if (p == "<") op = CompareOp::kLess;
    else if (p == "<=") op = CompareOp::kLessEq;
    else if (p == ">") op = CompareOp::kGreater;
    else if (p == ">=") op = CompareOp::kGreaterEq;
    else if (p == "=") op = CompareOp::kEq;
    else if (p == "!=") op = CompareOp::kNeq;
    if (op) ++pos_;
    return op;
  }

  Expr expr() {
    Expr e;
    int sign = 1;
    if (is_punct("-")) {
      ++pos_;
      sign = -1;
    }
    e.parts.emplace_back(sign, term());
    while (is_punct("+") || is_punct("-")) {
      sign = next().text == "+" ? 1 : -1;
      e.parts.emplace_back(sign, term());
    }
    return e;
  }

  Atom atom() {
    const Token& t = peek();
    if (t.kind != Tok::kIdent || !is_punct("(", 1)) fail("expected a predicate but found '" + describe(t) + "'", t);
    Atom a;
    a.predicate = next().text;
    a.predicate[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(a.predicate[0])));
    expect("(");
    if (!is_punct(")")) {
      while (true) {
        a.args.push_back(term());
        if (!is_punct(",")) break;
        ++pos_;
      }
    }
    expect(")");
    return a;
  }

  Term term() {
    const Token& t = next();
    Term term;
    if (t.kind == Tok::kValue) {
      term.value = t.value;
    } else if (t.kind == Tok::kIdent) {
      if (t.text == "_") {
        term.variable = true;
        term.name = "_#" + std::to_string(anonymous_++);
      } else if (is_variable_name(t.text)) {
        term.variable = true;
        term.name = t.text;
      } else if (t.text == "null") {
        term.value = Value::null();
      } else {
        term.value = Value::sym(t.text);
      }
    } else {
      fail("expected a term but found '" + describe(t) + "'", t);
    }
    return term;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int anonymous_ = 0;
};

bool ground_term(const Term& t) { return !t.variable; }

}  // namespace

std::string category_name(std::string_view code) {
  if (code == "nca") return "non-critical";
  if (code == "co") return "critical-omission";
  if (code == "cr") return "critical-replacement";
  if (code == "wa") return "wrong-activity";
  if (code == "rep") return "repetition";
  return {};
}

std::vector<Rule> parse_rules(std::string_view text) { return Parser(Lexer(text).run()).rules(); }

FactSet parse_facts(std::string_view text) {
  FactSet out;
  for (const auto& r : parse_rules(text)) {
    if (!r.body.empty()) throw ParseError("facts cannot have a body", r.line);
    Fact f{r.head.predicate, {}};
    for (const auto& t : r.head.args) {
      if (!ground_term(t)) throw ParseError("fact argument '" + t.name + "' is a variable", r.line);
      f.args.push_back(t.value);
    }
    out.insert(std::move(f));
  }
  return out;
}

}  // namespace faber::anomaly
