#pragma once

// Markov logic engine: typed weighted-formula programs, grounding against
// evidence, MAP inference and weight learning.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace faber::mln {

// ---------------------------------------------------------------------------
// Signature

struct PredicateDecl {
  std::string name;
  std::vector<std::string> arg_types;
  bool observable = false;
};

class Signature {
 public:
  void declare_type(const std::string& type);
  /// Adds `constant` to `type`. A constant may belong to one type only.
  void add_constant(const std::string& type, const std::string& constant);
  void declare_predicate(PredicateDecl decl);

  bool has_type(std::string_view type) const;
  const PredicateDecl* predicate(std::string_view name) const;
  const std::vector<PredicateDecl>& predicates() const { return predicates_; }
  const std::vector<std::string>& types() const { return type_order_; }
  /// Constants of `type` in insertion order.
  const std::vector<std::string>& constants(std::string_view type) const;
  std::optional<std::string> type_of(std::string_view constant) const;

 private:
  std::vector<std::string> type_order_;
  std::map<std::string, std::vector<std::string>, std::less<>> constants_;
  std::map<std::string, std::string, std::less<>> constant_type_;
  std::vector<PredicateDecl> predicates_;
};

// ---------------------------------------------------------------------------
// Formulae

struct Term {
  bool variable = true;
  std::string name;
  bool plus = false;  // per-grounding weight marker

  friend bool operator==(const Term&, const Term&) = default;
};

struct Atom {
  std::string predicate;
  std::vector<Term> args;
};

enum class Comparison { kEq, kNeq, kLess, kLessEq, kGreater, kGreaterEq };

struct Builtin {
  Comparison op = Comparison::kEq;
  Term lhs;
  Term rhs;
};

/// Quantifier-free formula tree as written in the source.
struct Expr {
  enum class Kind { kAtom, kBuiltin, kNot, kAnd, kOr, kImplies };
  Kind kind = Kind::kAtom;
  Atom atom;
  Builtin builtin;
  std::vector<Expr> children;
};

struct Literal {
  bool positive = true;
  bool is_builtin = false;
  Atom atom;
  Builtin builtin;
};

using Clause = std::vector<Literal>;

struct Formula {
  std::string id;
  Expr expr;
  std::vector<Clause> clauses;  // CNF of expr
  std::vector<std::string> variables;
  std::map<std::string, std::string> variable_types;
  std::vector<std::string> plus_variables;  // in order of first occurrence
};

/// Weight table keyed by the constants bound to the plus variables. A
/// formula without plus variables has a single entry under the empty key.
using WeightTable = std::map<std::vector<std::string>, double>;

struct SoftFormula {
  Formula formula;
  WeightTable weights;

  double weight(const std::vector<std::string>& binding) const;
};

struct MlnProgram {
  Signature signature;
  std::vector<SoftFormula> soft;
  std::vector<Formula> hard;
};

/// Parses the DSL with sections `types:`, `predicates:`, `soft:`, `hard:`
/// and `weights:`.
MlnProgram parse_program(std::string_view text);
/// Serializes back into the DSL, including the weights block.
std::string write_program(const MlnProgram& program);
std::string to_string(const Expr& expr);

// ---------------------------------------------------------------------------
// Grounding

struct GroundFact {
  std::string predicate;
  std::vector<std::string> args;

  friend bool operator==(const GroundFact&, const GroundFact&) = default;
  friend auto operator<=>(const GroundFact&, const GroundFact&) = default;
};

std::string to_string(const GroundFact& fact);

struct GroundLiteral {
  std::uint32_t atom = 0;
  bool positive = true;

  friend bool operator==(const GroundLiteral&, const GroundLiteral&) = default;
};

struct GroundClause {
  std::vector<GroundLiteral> literals;
  std::uint32_t formula = 0;  // index into soft or hard set
};

struct WeightedClause {
  GroundClause clause;
  double weight = 0.0;
  std::uint32_t key = 0;  // index into GroundNetwork::weight_keys
  double share = 1.0;     // 1/k when the formula expands to k CNF clauses
};

struct WeightKey {
  std::uint32_t formula = 0;
  std::vector<std::string> binding;

  friend auto operator<=>(const WeightKey&, const WeightKey&) = default;
};

/// Propositionalized program. Atoms are the hidden ground atoms, ordered by
/// predicate name and then by argument constants in domain order.
struct GroundNetwork {
  std::vector<GroundFact> atoms;
  std::vector<GroundFact> evidence;
  std::vector<WeightedClause> soft;
  std::vector<GroundClause> hard;
  std::vector<WeightKey> weight_keys;
  std::vector<std::string> hard_ids;  // formula ids, indexed by GroundClause::formula
  std::vector<std::string> soft_ids;

  std::optional<std::uint32_t> find_atom(const GroundFact& fact) const;
};

struct GroundingOptions {
  std::size_t max_clauses = 1'000'000;
};

/// Expands every formula over type-consistent bindings. Bodies falsified by
/// evidence are dropped, built-ins are evaluated during expansion, and the
/// evidence constants join their types.
GroundNetwork ground(const MlnProgram& program, std::span<const GroundFact> evidence,
                     const GroundingOptions& options = {});

/// Writes the weights of `program` into the soft clauses of `net`.
void apply_weights(GroundNetwork& net, const MlnProgram& program);

// ---------------------------------------------------------------------------
// MAP inference

using Assignment = std::vector<char>;

struct MapState {
  Assignment assignment;
  double objective = 0.0;

  friend bool operator==(const MapState&, const MapState&) = default;
};

bool clause_satisfied(const GroundClause& clause, const Assignment& assignment);
/// Sum of weights of satisfied soft clauses, in clause order.
double soft_objective(const GroundNetwork& net, const Assignment& assignment);
/// Index of the first violated hard clause, if any.
std::optional<std::size_t> first_violated_hard(const GroundNetwork& net, const Assignment& assignment);
std::string describe(const GroundNetwork& net, const GroundClause& clause);

struct ExactOptions {
  std::size_t max_atoms = 24;
};

/// Branch and bound with unit propagation over hard clauses. Among optimal
/// assignments returns the lexicographically smallest (false < true).
MapState map_exact(const GroundNetwork& net, const ExactOptions& options = {});

struct SearchParams {
  std::uint64_t max_flips = 100'000;
  unsigned restarts = 10;
  double noise = 0.1;
};

/// MaxWalkSAT with hard clauses at infinite weight. Deterministic in `seed`.
MapState map_search(const GroundNetwork& net, std::uint64_t seed, const SearchParams& params = {});

using MapSolver = std::function<MapState(const GroundNetwork&)>;

// ---------------------------------------------------------------------------
// Weight learning

struct TrainingExample {
  GroundNetwork network;
  Assignment truth;
};

struct LearnOptions {
  unsigned epochs = 10;
  double learning_rate = 0.1;
  double l2 = 0.01;
  MapSolver solver;  // defaults to map_exact
};

struct EpochStats {
  double truth_objective = 0.0;      // summed over examples, end-of-epoch weights
  double predicted_objective = 0.0;  // summed MAP objectives during the epoch
  std::size_t mistakes = 0;          // examples whose MAP state differs from truth
};

struct LearnResult {
  MlnProgram program;
  std::vector<EpochStats> epochs;
};

/// Truth assignment for `net` from the hidden atoms listed as true.
Assignment truth_assignment(const GroundNetwork& net, std::span<const GroundFact> true_atoms);

/// Averaged structured perceptron with L2 shrinkage toward 0. Throws
/// LabelError when a truth assignment violates a hard clause.
LearnResult learn_weights(const MlnProgram& program, std::span<const TrainingExample> training,
                          const LearnOptions& options = {});

/// Convenience overload: grounds each (evidence, true hidden atoms) pair.
LearnResult learn_weights(const MlnProgram& program,
                          std::span<const std::pair<std::vector<GroundFact>, std::vector<GroundFact>>> training,
                          const LearnOptions& options = {});

}  // namespace faber::mln
