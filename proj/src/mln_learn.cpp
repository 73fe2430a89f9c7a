#include <map>
#include <unordered_map>

#include "faber/errors.hpp"
#include "faber/mln.hpp"

namespace faber::mln {

namespace {

struct FactHash {
  std::size_t operator()(const GroundFact& f) const noexcept {
    std::size_t h = std::hash<std::string>{}(f.predicate);
    for (const auto& a : f.args) h = h * 1000003u ^ std::hash<std::string>{}(a);
    return h;
  }
};

// Satisfied share per global weight index.
void accumulate_counts(const GroundNetwork& net, const Assignment& a, const std::vector<std::size_t>& global,
                       std::vector<double>& counts) {
  for (const auto& wc : net.soft) {
    if (clause_satisfied(wc.clause, a)) counts[global[wc.key]] += wc.share;
  }
}

}  // namespace

Assignment truth_assignment(const GroundNetwork& net, std::span<const GroundFact> true_atoms) {
  std::unordered_map<GroundFact, std::uint32_t, FactHash> index;
  index.reserve(net.atoms.size());
  for (std::uint32_t i = 0; i < net.atoms.size(); ++i) index.emplace(net.atoms[i], i);
  Assignment a(net.atoms.size(), 0);
  for (const auto& fact : true_atoms) {
    // Atoms outside the grounding cannot influence any clause.
    if (auto it = index.find(fact); it != index.end()) a[it->second] = 1;
  }
  return a;
}

LearnResult learn_weights(const MlnProgram& program, std::span<const TrainingExample> training,
                          const LearnOptions& options) {
  LearnResult result{program, {}};
  if (program.soft.empty()) return result;
  if (training.empty()) throw ParameterError("weight learning needs at least one training example");

  for (const auto& ex : training) {
    if (ex.truth.size() != ex.network.atoms.size()) {
      throw LabelError("truth assignment covers " + std::to_string(ex.truth.size()) + " atoms, network has " +
                       std::to_string(ex.network.atoms.size()));
    }
    if (auto bad = first_violated_hard(ex.network, ex.truth)) {
      const auto& clause = ex.network.hard[*bad];
      throw LabelError("training labels violate hard formula '" + ex.network.hard_ids.at(clause.formula) +
                       "' at " + describe(ex.network, clause));
    }
  }

  // Global parameter vector over every weight key seen in training.
  std::map<WeightKey, std::size_t> key_index;
  std::vector<WeightKey> keys;
  std::vector<std::vector<std::size_t>> global(training.size());
  for (std::size_t e = 0; e < training.size(); ++e) {
    for (const auto& key : training[e].network.weight_keys) {
      auto [it, inserted] = key_index.emplace(key, keys.size());
      if (inserted) keys.push_back(key);
      global[e].push_back(it->second);
    }
  }
  std::vector<double> w(keys.size()), sum(keys.size(), 0.0);
  for (std::size_t k = 0; k < keys.size(); ++k) w[k] = program.soft.at(keys[k].formula).weight(keys[k].binding);

  MapSolver solver = options.solver ? options.solver : [](const GroundNetwork& n) { return map_exact(n); };
  auto with_weights = [&](std::size_t e) {
    GroundNetwork net = training[e].network;
    for (auto& wc : net.soft) wc.weight = w[global[e][wc.key]] * wc.share;
    return net;
  };

  std::vector<double> truth_counts(keys.size()), predicted_counts(keys.size());
  std::size_t steps = 0;
  for (unsigned epoch = 0; epoch < options.epochs; ++epoch) {
    EpochStats stats;
    for (std::size_t e = 0; e < training.size(); ++e) {
      auto net = with_weights(e);
      auto predicted = solver(net);
      stats.predicted_objective += predicted.objective;
      if (predicted.assignment != training[e].truth) ++stats.mistakes;

      std::fill(truth_counts.begin(), truth_counts.end(), 0.0);
      std::fill(predicted_counts.begin(), predicted_counts.end(), 0.0);
      accumulate_counts(net, training[e].truth, global[e], truth_counts);
      accumulate_counts(net, predicted.assignment, global[e], predicted_counts);
      for (std::size_t k = 0; k < keys.size(); ++k) {
        w[k] += options.learning_rate * (truth_counts[k] - predicted_counts[k]);
        w[k] -= options.learning_rate * options.l2 * w[k];
        sum[k] += w[k];
      }
      ++steps;
    }
    for (std::size_t e = 0; e < training.size(); ++e) {
      stats.truth_objective += soft_objective(with_weights(e), training[e].truth);
    }
    result.epochs.push_back(stats);
  }

  for (std::size_t k = 0; k < keys.size(); ++k) {
    double averaged = steps ? sum[k] / static_cast<double>(steps) : w[k];
    result.program.soft[keys[k].formula].weights[keys[k].binding] = averaged;
  }
  return result;
}

LearnResult learn_weights(const MlnProgram& program,
                          std::span<const std::pair<std::vector<GroundFact>, std::vector<GroundFact>>> training,
                          const LearnOptions& options) {
  std::vector<TrainingExample> examples;
  examples.reserve(training.size());
  for (const auto& [evidence, hidden] : training) {
    auto net = ground(program, evidence);
    auto truth = truth_assignment(net, hidden);
    examples.push_back({std::move(net), std::move(truth)});
  }
  return learn_weights(program, std::span<const TrainingExample>(examples), options);
}

}  // namespace faber::mln
