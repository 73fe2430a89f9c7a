// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Usage: faber_acceptance --cli <path to faber executable>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "faber/anomaly.hpp"
#include "faber/boundary.hpp"
#include "faber/errors.hpp"
#include "faber/evaluation.hpp"
#include "faber/mln.hpp"
#include "faber/synthetic_home.hpp"

namespace fs = std::filesystem;
using namespace faber;

namespace {

int failures = 0;

void verdict(int id, bool ok, const std::string& title, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string f3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

// ---------------------------------------------------------------------------
// 1. Metric arithmetic

void metric_arithmetic() {
  Counts c{53, 6, 2};
  // Hand-computed: 53/59, 53/55 and their harmonic mean.
  const double p = 53.0 / 59.0, r = 53.0 / 55.0, f = 2 * p * r / (p + r);
  bool ok = round3(c.precision()) == 0.898 && round3(c.recall()) == 0.964 && round3(c.f1()) == 0.930 &&
            std::abs(c.precision() - p) < 1e-12 && std::abs(c.recall() - r) < 1e-12 && std::abs(c.f1() - f) < 1e-12;
  verdict(1, ok, "metric arithmetic",
          "TP=53 FP=6 FN=2 -> P=" + f3(c.precision()) + " R=" + f3(c.recall()) + " F1=" + f3(c.f1()));
}

// ---------------------------------------------------------------------------
// 2. Exact MAP against exhaustive enumeration

mln::GroundNetwork random_network(std::mt19937_64& rng, std::size_t atoms, std::size_t soft, std::size_t hard) {
  mln::GroundNetwork net;
  for (std::size_t i = 0; i < atoms; ++i) net.atoms.push_back({"p", {std::to_string(i)}});
  net.hard_ids = {"h"};
  net.soft_ids = {"s"};
  net.weight_keys.push_back({0, {}});
  auto clause = [&]() {
    mln::GroundClause c;
    std::size_t len = 1 + rng() % 3;
    for (std::size_t k = 0; k < len; ++k) c.literals.push_back({static_cast<std::uint32_t>(rng() % atoms), (rng() & 1u) != 0});
    return c;
  };
  // Multiples of 0.25 keep every sum exact.
  for (std::size_t i = 0; i < soft; ++i)
    net.soft.push_back({clause(), static_cast<double>(static_cast<int>(rng() % 33) - 8) * 0.25, 0, 1.0});
  for (std::size_t i = 0; i < hard; ++i) net.hard.push_back(clause());
  return net;
}

struct Enumerated {
  std::uint64_t bits = 0;
  double objective = 0.0;
};

// Gray-code enumeration with incremental clause bookkeeping. Ties go to the
// lexicographically smallest vector with atom 0 most significant.
std::optional<Enumerated> enumerate(const mln::GroundNetwork& net) {
  const std::size_t n = net.atoms.size();
  struct Occ {
    std::uint32_t clause;  // hard clauses first, then soft
    bool positive;
  };
  std::vector<std::vector<Occ>> occ(n);
  std::vector<const mln::GroundClause*> clauses;
  for (const auto& h : net.hard) clauses.push_back(&h);
  for (const auto& s : net.soft) clauses.push_back(&s.clause);
  const std::size_t n_hard = net.hard.size();
  std::vector<int> true_lits(clauses.size(), 0);
  for (std::uint32_t c = 0; c < clauses.size(); ++c) {
    for (const auto& l : clauses[c]->literals) {
      occ[l.atom].push_back({c, l.positive});
      if (!l.positive) ++true_lits[c];  // all atoms start false
    }
  }
  std::size_t violated = 0;
  double objective = 0.0;
  for (std::size_t c = 0; c < clauses.size(); ++c) {
    if (true_lits[c] > 0) {
      if (c >= n_hard) objective += net.soft[c - n_hard].weight;
    } else if (c < n_hard) {
      ++violated;
    }
  }
  std::optional<Enumerated> best;
  auto lex_less = [](std::uint64_t a, std::uint64_t b) {
    std::uint64_t diff = a ^ b;
    return diff != 0 && ((a >> std::countr_zero(diff)) & 1u) == 0;
  };
  std::uint64_t bits = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t k = 0;; ++k) {
    if (violated == 0 &&
        (!best || objective > best->objective || (objective == best->objective && lex_less(bits, best->bits))))
      best = Enumerated{bits, objective};
    if (k + 1 == total) break;
    const auto atom = static_cast<std::size_t>(std::countr_zero(k + 1));
    const bool now_true = ((bits >> atom) & 1u) == 0;
    bits ^= std::uint64_t{1} << atom;
    for (const auto& o : occ[atom]) {
      const bool was_sat = true_lits[o.clause] > 0;
      true_lits[o.clause] += (o.positive == now_true) ? 1 : -1;
      const bool is_sat = true_lits[o.clause] > 0;
      if (was_sat == is_sat) continue;
      if (o.clause < n_hard) {
        violated += is_sat ? -1 : 1;
      } else {
        double w = net.soft[o.clause - n_hard].weight;
        objective += is_sat ? w : -w;
      }
    }
  }
  return best;
}

void exact_map() {
  std::mt19937_64 rng(20240304);
  int feasible = 0, exact_ok = 0, search_ok = 0, infeasible_ok = 0, infeasible = 0;
  std::vector<std::string> misses;
  const int trials = 126;  // six networks per size 4..24
  for (int t = 0; t < trials; ++t) {
    const std::size_t atoms = 4 + static_cast<std::size_t>(t % 21);
    auto net = random_network(rng, atoms, 2 * atoms, atoms / 4);
    auto truth = enumerate(net);
    if (!truth) {
      ++infeasible;
      try {
        mln::map_exact(net);
      } catch (const InfeasibleError&) {
        ++infeasible_ok;
      }
      continue;
    }
    ++feasible;
    auto s = mln::map_exact(net);
    mln::Assignment expected(atoms);
    for (std::size_t i = 0; i < atoms; ++i) expected[i] = (truth->bits >> i) & 1u;
    if (s.objective == truth->objective && s.assignment == expected && !mln::first_violated_hard(net, s.assignment))
      ++exact_ok;
    auto w = mln::map_search(net, static_cast<std::uint64_t>(t) + 1);
    if (!mln::first_violated_hard(net, w.assignment) && w.objective == truth->objective) {
      ++search_ok;
    } else {
      misses.push_back("#" + std::to_string(t) + " (" + std::to_string(atoms) + " atoms: " + f3(w.objective) +
                       " vs " + f3(truth->objective) + ")");
    }
  }
  const double agree = feasible ? static_cast<double>(search_ok) / feasible : 0.0;
  std::string detail = "exact " + std::to_string(exact_ok) + "/" + std::to_string(feasible) + " feasible networks, " +
                       "infeasible reported " + std::to_string(infeasible_ok) + "/" + std::to_string(infeasible) +
                       ", search agrees " + std::to_string(search_ok) + "/" + std::to_string(feasible) + " (" +
                       f3(100.0 * agree) + "%)";
  for (const auto& m : misses) detail += "; miss " + m;
  verdict(2, feasible + infeasible >= 100 && feasible >= 100 && exact_ok == feasible && infeasible_ok == infeasible &&
                 agree >= 0.99,
          "exact MAP vs enumeration (4..24 atoms)", detail);
}

// ---------------------------------------------------------------------------
// 3. Hard constraints on randomized days

EventLog random_log(std::mt19937_64& rng, const std::vector<std::string>& kinds, std::size_t length, int id) {
  EventLog log;
  log.day_id = "r" + std::to_string(id);
  for (std::size_t i = 0; i < length; ++i)
    log.events.push_back({Timestamp{i, std::nullopt}, "s", kinds[rng() % kinds.size()], std::nullopt});
  return log;
}

void randomize_weights(boundary::BoundaryProgram& bp, std::mt19937_64& rng, const std::vector<std::string>& kinds) {
  for (auto& sf : bp.program.soft) {
    const auto arity = sf.formula.plus_variables.size();
    for (const auto& act : iadl_labels()) {
      for (const auto& a : kinds)
        for (const auto& b : kinds)
          for (const auto& c : kinds) {
            std::vector<std::string> key;
            if (arity >= 2) key.push_back(a);
            if (arity >= 3) key.push_back(b);
            if (arity >= 4) key.push_back(c);
            key.push_back(act);
            sf.weights[key] = static_cast<double>(static_cast<int>(rng() % 41) - 20) * 0.25;
          }
    }
  }
}

void hard_constraints() {
  const std::vector<std::string> kinds = {"OpeningFridge", "ClosingFridge", "StoveOn", "StoveOff",
                                          "OpeningMedicineCabinet", "PresenceTable"};
  std::mt19937_64 rng(77);
  int runs = 0, violations = 0, objective_mismatch = 0, search_runs = 0;
  std::string first;
  for (int day = 0; day < 1000; ++day) {
    const int n = 1 + day % 3;
    auto bp = boundary::build_program(n, Vocabulary::kitchen(), iadl_labels());
    randomize_weights(bp, rng, kinds);
    auto log = random_log(rng, kinds, 4 + rng() % 37, day);
    auto soft = boundary::ground_soft(bp, log);
    auto chain = boundary::solve_chain(soft);
    auto b = boundary::boundaries_of(soft, chain.assignment);
    auto full = boundary::ground_full(bp, log);
    auto closed = boundary::closure_assignment(full, log, b);
    ++runs;
    auto bad = mln::first_violated_hard(full, closed);
    auto family = boundary::violated_family(log, b);
    if (bad || !family.empty()) {
      ++violations;
      if (first.empty()) first = log.day_id + ": " + (bad ? mln::describe(full, full.hard[*bad]) : family);
    }
    if (mln::soft_objective(full, closed) != chain.objective) ++objective_mismatch;
  }
  // Exact MAP on the full network of tiny single-activity days.
  for (int day = 0; day < 200; ++day) {
    auto bp = boundary::build_program(1 + day % 3, Vocabulary::kitchen(), {"PrepareMeal"});
    randomize_weights(bp, rng, kinds);
    auto log = random_log(rng, kinds, 3 + rng() % 2, 1000 + day);
    auto full = boundary::ground_full(bp, log);
    if (full.atoms.size() > 24) continue;
    auto soft = boundary::ground_soft(bp, log);
    auto chain = boundary::solve_chain(soft);
    auto exact = mln::map_exact(full);
    ++search_runs;
    if (mln::first_violated_hard(full, exact.assignment) ||
        !boundary::violated_family(log, boundary::boundaries_of(full, exact.assignment)).empty())
      ++violations;
    if (exact.objective != chain.objective) ++objective_mismatch;
  }
  std::string detail = std::to_string(runs) + " chain MAP states on random days, " + std::to_string(search_runs) +
                       " exact cross-checks, " + std::to_string(violations) + " hard violations, " +
                       std::to_string(objective_mismatch) + " objective mismatches";
  if (!first.empty()) detail += "; first: " + first;
  verdict(3, violations == 0 && objective_mismatch == 0 && runs >= 1000, "hard constraints hold in every MAP state",
          detail);
}

// ---------------------------------------------------------------------------
// 4-7. Pipeline on the synthetic corpus

std::vector<LabeledAnomaly> closed_loop(const synth::GeneratedDay& d) {
  auto facts = anomaly::build_facts(d.log, anomaly::gold_intervals(d.log, d.gold), d.gold.prescriptions,
                                    anomaly::HomeModel::kitchen(), TimeBase{});
  std::vector<LabeledAnomaly> out;
  for (const auto& a : anomaly::evaluate(anomaly::builtin_rule_set(anomaly::default_rule_config()), facts))
    out.push_back(anomaly::to_labeled(a));
  std::sort(out.begin(), out.end());
  return out;
}

eval::CrossValidation run_cv(const std::vector<synth::GeneratedDay>& days, int n) {
  eval::CrossValidationConfig cfg;
  cfg.n_window = n;
  return eval::crossvalidate(days, cfg);
}

void window_sweep(const eval::CrossValidation& cv1, const eval::CrossValidation& cv3) {
  const double f1 = cv1.aggregate.boundary.f1(), f3v = cv3.aggregate.boundary.f1();
  verdict(4, f3v - f1 >= 0.05 && f3v >= 0.85, "window size improves boundary detection",
          "boundary F1 n=1 " + f3(f1) + ", n=3 " + f3(f3v) + ", gain " + f3(f3v - f1) + " (need >= 0.050, n=3 >= 0.850)");
}

void closed_loop_recovery(const std::vector<synth::GeneratedDay>& profile) {
  std::size_t days = 0, ok = 0, anomalies = 0;
  std::string first;
  auto check = [&](const std::vector<synth::GeneratedDay>& corpus, const std::string& tag) {
    for (const auto& d : corpus) {
      ++days;
      anomalies += d.gold.anomalies.size();
      if (closed_loop(d) == d.gold.anomalies) ++ok;
      else if (first.empty()) first = tag + "/" + d.log.day_id;
    }
  };
  check(profile, "profile");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto spec = synth::ScenarioSpec::paper_profile_spec();
    spec.seed = seed;
    check(synth::generate(spec), "seed" + std::to_string(seed));
  }
  std::string detail = std::to_string(ok) + "/" + std::to_string(days) + " days reproduce their " +
                       std::to_string(anomalies) + " injected anomalies exactly on gold boundaries";
  if (!first.empty()) detail += "; first mismatch " + first;
  verdict(5, ok == days, "closed-loop anomaly recovery", detail);
}

void end_to_end(const eval::CrossValidation& cv) {
  const auto& a = cv.aggregate;
  std::string detail = "total P=" + f3(a.total.precision()) + " R=" + f3(a.total.recall()) + " F1=" +
                       f3(a.total.f1()) + " (reference 0.930, gap " + f3(a.total.f1() - 0.93) +
                       "); critical recall " + f3(a.critical.recall()) + " (reference 1.000, gap " +
                       f3(a.critical.recall() - 1.0) + "); TP/FP/FN " + std::to_string(a.total.tp) + "/" +
                       std::to_string(a.total.fp) + "/" + std::to_string(a.total.fn);
  verdict(6, a.total.f1() >= 0.85 && a.critical.recall() >= 0.95, "end-to-end anomaly recognition", detail);
}

void sensor_failure(const std::vector<synth::GeneratedDay>& days, const eval::CrossValidation& baseline) {
  synth::FailureSpec spec;
  spec.seed = 3;
  std::vector<std::pair<std::string, LabeledAnomaly>> targets;
  for (const auto& d : days) {
    if (d.group != "g1" || targets.size() == 2) continue;
    for (const auto& a : d.gold.anomalies) {
      if (a.code != "NC1" || !a.tick) continue;
      for (std::size_t i = 0; i < d.log.events.size(); ++i) {
        const auto& e = d.log.events[i];
        if (e.timestamp.tick == *a.tick && e.sensor_id == "mag." + a.object) {
          spec.failures.push_back({d.log.day_id, e.sensor_id, std::nullopt, {i}});
          targets.push_back({d.log.day_id, a});
        }
      }
      break;
    }
  }
  if (targets.size() != 2) {
    verdict(7, false, "sensor failure", "fewer than two g1 days carry an NC1 opening event");
    return;
  }
  auto broken = synth::inject_sensor_failures(days, spec);

  // Gold boundaries: each corrupted day loses exactly its target.
  bool gold_ok = true;
  for (std::size_t i = 0; i < broken.size(); ++i) {
    auto expected = days[i].gold.anomalies;
    for (const auto& [id, a] : targets)
      if (id == days[i].log.day_id) expected.erase(std::find(expected.begin(), expected.end(), a));
    if (closed_loop(broken[i]) != expected) gold_ok = false;
  }

  // Detected boundaries: the NC1/g1 cell moves two TP to FN, nothing else.
  auto cv = run_cv(broken, 3);
  bool e2e_ok = true;
  std::string diffs;
  std::set<std::string> groups;
  for (const auto& [code, by_group] : baseline.aggregate.by_code)
    for (const auto& [g, c] : by_group) groups.insert(g);
  for (const auto& code : synth::anomaly_codes()) {
    for (const auto& g : groups) {
      auto get = [&](const eval::Aggregate& a) {
        auto it = a.by_code.find(code);
        if (it == a.by_code.end()) return Counts{};
        auto jt = it->second.find(g);
        return jt == it->second.end() ? Counts{} : jt->second;
      };
      Counts before = get(baseline.aggregate), after = get(cv.aggregate);
      Counts expected = before;
      if (code == "NC1" && g == "g1") {
        expected.tp -= std::min<std::size_t>(expected.tp, 2);
        expected.fn += 2;
      }
      if (after != expected) {
        e2e_ok = false;
        diffs += " " + code + "/" + g + " " + std::to_string(after.tp) + "/" + std::to_string(after.fp) + "/" +
                 std::to_string(after.fn);
      }
    }
  }
  std::string detail = "dropped openings in " + targets[0].first + "@" + std::to_string(*targets[0].second.tick) +
                       " and " + targets[1].first + "@" + std::to_string(*targets[1].second.tick) +
                       "; gold-boundary check " + (gold_ok ? "exact" : "MISMATCH") + "; end-to-end NC1/g1 FN " +
                       std::to_string(baseline.aggregate.by_code.at("NC1").at("g1").fn) + " -> " +
                       std::to_string(cv.aggregate.by_code.at("NC1").at("g1").fn) +
                       (e2e_ok ? ", all other cells unchanged" : ", unexpected cells:" + diffs);
  verdict(7, gold_ok && e2e_ok, "sensor failure turns exactly the affected NC1 into FN", detail);
}

// ---------------------------------------------------------------------------
// 8. CLI determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

void cli_determinism(const std::string& cli) {
  if (cli.empty() || !fs::exists(cli)) {
    verdict(8, false, "CLI determinism", "CLI executable not found: '" + cli + "'");
    return;
  }
  const auto base = fs::temp_directory_path() / ("faber_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(base);
  std::vector<std::string> failed;
  auto run_all = [&](const fs::path& dir) {
    fs::create_directories(dir);
    const std::string d = dir.string();
    const std::string q = "\"" + cli + "\"";
    const std::vector<std::pair<std::string, std::string>> steps = {
        {"generate", q + " generate --seed 42 --out " + d + "/data > " + d + "/generate.txt"},
        {"train", q + " train --data " + d + "/data --n-window 3 --out " + d + "/model.mln"},
        {"detect", q + " detect --model " + d + "/model.mln --data " + d + "/data --out " + d + "/detected"},
        {"anomalies", q + " anomalies --log " + d + "/data/g2-s01.log --annotation " + d +
                          "/data/g2-s01.ann --intervals " + d + "/detected/g2-s01.intervals --out " + d +
                          "/anomalies.jsonl"},
        {"crossvalidate", q + " crossvalidate --data " + d + "/data --n-window 3 --format json --out " + d +
                              "/cv.json"},
        {"report", q + " report --input " + d + "/cv.json --format text --out " + d + "/report.txt"},
        {"report csv", q + " report --input " + d + "/cv.json --format csv --out " + d + "/report.csv"},
    };
    for (const auto& [name, cmd] : steps)
      if (std::system((cmd + " 2> " + d + "/stderr.txt").c_str()) != 0) failed.push_back(name + " in " + d);
    fs::remove(dir / "stderr.txt");
  };
  run_all(base / "a");
  run_all(base / "b");
  auto a = tree(base / "a"), b = tree(base / "b");
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != bytes) differing.push_back(name);
  }
  if (a.size() != b.size()) differing.push_back("(file sets differ)");
  std::string detail = std::to_string(a.size()) + " output files from generate, train, detect, anomalies, "
                       "crossvalidate and report compared byte for byte";
  for (const auto& f : failed) detail += "; command failed: " + f;
  for (const auto& f : differing) detail += "; differs: " + f;
  verdict(8, failed.empty() && differing.empty() && !a.empty(), "CLI determinism", detail);
  fs::remove_all(base);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string cli;
  app.add_option("--cli", cli, "Path to the faber executable");
  CLI11_PARSE(app, argc, argv);

  try {
    metric_arithmetic();
    exact_map();
    hard_constraints();

    const auto days = synth::generate(synth::ScenarioSpec::paper_profile_spec());
    const auto cv1 = run_cv(days, 1);
    const auto cv3 = run_cv(days, 3);
    window_sweep(cv1, cv3);
    closed_loop_recovery(days);
    end_to_end(cv3);
    sensor_failure(days, cv3);
    cli_determinism(cli);
  } catch (const std::exception& e) {
    std::printf("FAIL aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%s: %d failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
