#include "faber/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include "faber/errors.hpp"
#include "json.hpp"

namespace faber::eval {

std::map<std::string, Counts> match_anomalies(const std::vector<LabeledAnomaly>& predicted,
                                              const std::vector<LabeledAnomaly>& gold, std::uint64_t slack) {
  std::map<std::string, Counts> out;
  std::vector<char> used(predicted.size(), 0);
  auto sorted_gold = gold;
  std::sort(sorted_gold.begin(), sorted_gold.end());
  for (const auto& g : sorted_gold) {
    std::optional<std::size_t> best;
    std::uint64_t best_gap = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      const auto& p = predicted[i];
      if (used[i] || p.code != g.code || p.object != g.object || p.tick.has_value() != g.tick.has_value()) continue;
      std::uint64_t gap = 0;
      if (g.tick) {
        gap = *p.tick > *g.tick ? *p.tick - *g.tick : *g.tick - *p.tick;
        if (gap > slack) continue;
      }
      if (!best || gap < best_gap) {
        best = i;
        best_gap = gap;
      }
    }
    if (best) {
      used[*best] = 1;
      ++out[g.code].tp;
    } else {
      ++out[g.code].fn;
    }
  }
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (!used[i]) ++out[predicted[i].code].fp;
  return out;
}

FoldResult evaluate_day(const synth::GeneratedDay& day, const boundary::BoundaryProgram& trained,
                        const CrossValidationConfig& config) {
  FoldResult r;
  r.fold_id = day.log.day_id;
  r.group = day.group;
  auto intervals = boundary::detect(day.log, trained, config.detect);
  r.boundary = boundary::match_boundaries(intervals, day.gold, config.slack);
  auto facts = anomaly::build_facts(day.log, intervals, day.gold.prescriptions, config.home, config.detect.time_base);
  r.predicted = anomaly::evaluate(anomaly::builtin_rule_set(config.rules), facts, day.log.day_id);
  std::vector<LabeledAnomaly> labeled;
  for (const auto& a : r.predicted) labeled.push_back(anomaly::to_labeled(a));
  r.anomalies = match_anomalies(labeled, day.gold.anomalies, config.anomaly_slack);
  return r;
}

Aggregate aggregate(const std::vector<FoldResult>& folds) {
  Aggregate a;
  for (const auto& f : folds) {
    a.boundary += f.boundary;
    for (const auto& [code, c] : f.anomalies) {
      a.by_code[code][f.group] += c;
      a.total += c;
      (synth::is_critical(code) ? a.critical : a.non_critical) += c;
    }
  }
  return a;
}

CrossValidation crossvalidate(const std::vector<synth::GeneratedDay>& days, const CrossValidationConfig& config) {
  if (days.size() < 2) throw ParameterError("cross-validation needs at least two days");
  auto vocab = Vocabulary::kitchen();
  for (const auto& d : days)
    for (const auto& e : d.log.events) vocab.add(e.kind);
  const auto untrained = boundary::build_program(config.n_window, vocab, iadl_labels());

  std::vector<FoldResult> results(days.size());
  std::vector<std::exception_ptr> errors(days.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < days.size(); i = next++) {
      try {
        std::vector<EventLog> logs;
        std::vector<Annotation> gold;
        for (std::size_t k = 0; k < days.size(); ++k) {
          if (k == i) continue;
          logs.push_back(days[k].log);
          gold.push_back(days[k].gold);
        }
        auto trained = boundary::train(untrained, logs, gold, config.train);
        results[i] = evaluate_day(days[i], trained, config);
      } catch (const Error& e) {
        errors[i] = std::make_exception_ptr(Error(e.category(), "fold " + days[i].log.day_id + ": " + e.what()));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(days.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  CrossValidation cv;
  cv.folds = std::move(results);
  cv.aggregate = aggregate(cv.folds);
  return cv;
}

Format parse_format(std::string_view name) {
  if (name == "json") return Format::kJson;
  if (name == "csv") return Format::kCsv;
  if (name == "text") return Format::kText;
  throw ParameterError("unknown report format '" + std::string(name) + "' (expected json, csv or text)");
}

namespace {

std::string fixed(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

nlohmann::ordered_json counts_json(const Counts& c) {
  nlohmann::ordered_json j;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["fn"] = c.fn;
  j["precision"] = c.precision();
  j["recall"] = c.recall();
  j["f1"] = c.f1();
  return j;
}

std::vector<std::string> groups_of(const CrossValidation& cv) {
  std::vector<std::string> out;
  for (const auto& f : cv.folds)
    if (std::find(out.begin(), out.end(), f.group) == out.end()) out.push_back(f.group);
  return out;
}

Counts lookup(const Aggregate& a, const std::string& code, const std::string& group) {
  auto it = a.by_code.find(code);
  if (it == a.by_code.end()) return {};
  auto jt = it->second.find(group);
  return jt == it->second.end() ? Counts{} : jt->second;
}

std::string json_report(const CrossValidation& cv) {
  nlohmann::ordered_json root;
  root["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : cv.folds) {
    nlohmann::ordered_json j;
    j["fold"] = f.fold_id;
    j["group"] = f.group;
    j["boundary"] = counts_json(f.boundary);
    j["anomalies"] = nlohmann::ordered_json::object();
    for (const auto& [code, c] : f.anomalies) j["anomalies"][code] = counts_json(c);
    root["folds"].push_back(std::move(j));
  }
  nlohmann::ordered_json agg;
  agg["boundary"] = counts_json(cv.aggregate.boundary);
  agg["anomalies"] = nlohmann::ordered_json::object();
  for (const auto& code : synth::anomaly_codes()) {
    for (const auto& g : groups_of(cv)) agg["anomalies"][code][g] = counts_json(lookup(cv.aggregate, code, g));
  }
  agg["non_critical"] = counts_json(cv.aggregate.non_critical);
  agg["critical"] = counts_json(cv.aggregate.critical);
  agg["total"] = counts_json(cv.aggregate.total);
  root["aggregate"] = std::move(agg);
  return root.dump(2) + "\n";
}

std::string csv_report(const CrossValidation& cv) {
  std::ostringstream out;
  out << "code,group,tp,fp,fn\n";
  for (const auto& code : synth::anomaly_codes()) {
    for (const auto& g : groups_of(cv)) {
      auto c = lookup(cv.aggregate, code, g);
      out << code << ',' << g << ',' << c.tp << ',' << c.fp << ',' << c.fn << '\n';
    }
  }
  return out.str();
}

std::string text_report(const CrossValidation& cv) {
  auto groups = groups_of(cv);
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s", "ANOMALY");
  out << line;
  for (const auto& g : groups) {
    std::snprintf(line, sizeof line, " | %-6s %5s %5s %5s", g.c_str(), "TP", "FP", "FN");
    out << line;
  }
  out << '\n';
  for (const auto& code : synth::anomaly_codes()) {
    std::snprintf(line, sizeof line, "%-8s", code.c_str());
    out << line;
    for (const auto& g : groups) {
      auto c = lookup(cv.aggregate, code, g);
      std::snprintf(line, sizeof line, " | %-6s %5zu %5zu %5zu", "", c.tp, c.fp, c.fn);
      out << line;
    }
    out << '\n';
  }
  out << '\n';
  std::snprintf(line, sizeof line, "%-14s %9s %9s %9s\n", "", "PRECISION", "RECALL", "F1");
  out << line;
  auto row = [&](const char* name, const Counts& c) {
    std::snprintf(line, sizeof line, "%-14s %9s %9s %9s\n", name, fixed(c.precision()).c_str(),
                  fixed(c.recall()).c_str(), fixed(c.f1()).c_str());
    out << line;
  };
  row("Non-critical", cv.aggregate.non_critical);
  row("Critical", cv.aggregate.critical);
  row("TOTAL", cv.aggregate.total);
  row("Boundaries", cv.aggregate.boundary);
  return out.str();
}

}  // namespace

std::string report(const CrossValidation& cv, Format format) {
  if (cv.folds.empty()) throw ParameterError("nothing to report: no folds");
  switch (format) {
    case Format::kJson: return json_report(cv);
    case Format::kCsv: return csv_report(cv);
    case Format::kText: return text_report(cv);
  }
  return {};
}

CrossValidation read_json_report(const std::string& text) {
  CrossValidation cv;
  try {
    auto root = nlohmann::json::parse(text);
    auto counts = [](const nlohmann::json& j) {
      return Counts{j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(), j.at("fn").get<std::size_t>()};
    };
    for (const auto& f : root.at("folds")) {
      FoldResult r;
      r.fold_id = f.at("fold").get<std::string>();
      r.group = f.at("group").get<std::string>();
      r.boundary = counts(f.at("boundary"));
      for (const auto& [code, c] : f.at("anomalies").items()) r.anomalies[code] = counts(c);
      cv.folds.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what(), 0);
  }
  cv.aggregate = aggregate(cv.folds);
  return cv;
}

}  // namespace faber::eval
