// Command-line front end: scenario generation, training, detection, anomaly
// recognition, cross-validation and reporting.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "faber/anomaly.hpp"
#include "faber/boundary.hpp"
#include "faber/errors.hpp"
#include "faber/evaluation.hpp"
#include "faber/synthetic_home.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace faber;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

// Optional JSON config shared by all subcommands. Recognized keys besides the
// scenario fields: thresholds (rule thresholds in seconds),
// activity_thresholds (maximum activity durations in seconds), epochs,
// learning_rate, l2.
struct Settings {
  synth::ScenarioSpec scenario = synth::ScenarioSpec::paper_profile_spec();
  anomaly::RuleConfig rules = anomaly::default_rule_config();
  boundary::Thresholds activity = boundary::default_thresholds();
  mln::LearnOptions learn;
};

Settings load_settings(const std::string& path) {
  Settings s;
  if (path.empty()) return s;
  auto text = read_file(path);
  s.scenario = synth::ScenarioSpec::parse(text);
  try {
    auto j = nlohmann::json::parse(text);
    if (j.contains("thresholds")) {
      for (const auto& [k, v] : j["thresholds"].items()) s.rules.thresholds[k] = v.get<std::int64_t>();
    }
    if (j.contains("activity_thresholds")) {
      for (const auto& [k, v] : j["activity_thresholds"].items()) s.activity[k] = v.get<std::int64_t>();
    }
    if (j.contains("epochs")) s.learn.epochs = j["epochs"].get<unsigned>();
    if (j.contains("learning_rate")) s.learn.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("l2")) s.learn.l2 = j["l2"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return s;
}

Vocabulary vocabulary_for(const std::vector<EventLog>& logs) {
  auto vocab = Vocabulary::kitchen();
  for (const auto& l : logs)
    for (const auto& e : l.events) vocab.add(e.kind);
  return vocab;
}

void save_model(const boundary::BoundaryProgram& bp, const std::string& path) {
  write_output("# window=" + std::to_string(bp.n) + "\n" + mln::write_program(bp.program), path);
}

boundary::BoundaryProgram load_model(const std::string& path) {
  auto text = read_file(path);
  boundary::BoundaryProgram bp;
  bp.program = mln::parse_program(text);
  const std::string marker = "# window=";
  if (text.rfind(marker, 0) == 0) {
    bp.n = std::stoi(text.substr(marker.size(), text.find('\n') - marker.size()));
  } else {
    bp.n = static_cast<int>(bp.program.soft.size() / 2);
  }
  return bp;
}

std::vector<synth::GeneratedDay> days_from(const std::string& data_dir, const Settings& s) {
  if (!data_dir.empty()) return synth::load_days(data_dir);
  return synth::generate(s.scenario);
}

int run(int argc, char** argv) {
  CLI::App app{"Activity boundary detection and anomaly recognition for smart-home sensor logs", "faber"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  int n_window = 3;
  std::uint64_t slack = 1;
  std::string format = "text";
  std::string out_path;
  std::string data_dir;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed (overrides the config)");
  };

  auto* gen = app.add_subcommand("generate", "Generate a labeled synthetic corpus");
  common(gen);
  gen->add_option("--out", out_path, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Learn boundary weights from labeled days");
  common(train);
  train->add_option("--data", data_dir, "Directory of .log/.ann pairs (default: generated corpus)");
  train->add_option("--n-window", n_window, "Window size")->check(CLI::IsMember({1, 2, 3}));
  train->add_option("--out", out_path, "Model file (default: stdout)");

  std::string model_path, log_path, solver = "chain";
  auto* detect = app.add_subcommand("detect", "Detect activity intervals with a trained model");
  common(detect);
  detect->add_option("--model", model_path, "Model file from 'train'")->required()->check(CLI::ExistingFile);
  auto* detect_log = detect->add_option("--log", log_path, "Single event log")->check(CLI::ExistingFile);
  detect->add_option("--data", data_dir, "Directory of logs")->excludes(detect_log);
  detect->add_option("--solver", solver, "MAP solver")->check(CLI::IsMember({"chain", "search"}));
  detect->add_option("--out", out_path, "Output file (single log) or directory (--data)");

  std::string facts_path, rules_path, intervals_path, annotation_path;
  bool gold_intervals = false;
  auto* anom = app.add_subcommand("anomalies", "Evaluate anomaly rules and print JSON lines");
  common(anom);
  auto* facts_opt = anom->add_option("--facts", facts_path, "Facts file")->check(CLI::ExistingFile);
  anom->add_option("--log", log_path, "Event log")->check(CLI::ExistingFile)->excludes(facts_opt);
  anom->add_option("--intervals", intervals_path, "Intervals from 'detect'")->check(CLI::ExistingFile);
  anom->add_option("--annotation", annotation_path, "Annotation with prescriptions")->check(CLI::ExistingFile);
  anom->add_flag("--gold-intervals", gold_intervals, "Use the annotation's intervals");
  anom->add_option("--rules", rules_path, "Rule file (default: builtin rule set)")->check(CLI::ExistingFile);
  anom->add_option("--out", out_path, "Output file (default: stdout)");

  unsigned threads = 0;
  auto* cv = app.add_subcommand("crossvalidate", "Leave-one-day-out evaluation of the full pipeline");
  common(cv);
  cv->add_option("--data", data_dir, "Directory of .log/.ann pairs (default: generated corpus)");
  cv->add_option("--n-window", n_window, "Window size")->check(CLI::IsMember({1, 2, 3}));
  cv->add_option("--slack", slack, "Matching slack in ticks");
  cv->add_option("--format", format, "json, csv or text");
  cv->add_option("--threads", threads, "Worker threads (0: all cores)");
  cv->add_option("--out", out_path, "Output file (default: stdout)");

  std::string input_path;
  auto* rep = app.add_subcommand("report", "Re-render a JSON cross-validation report");
  rep->add_option("--input", input_path, "JSON report from 'crossvalidate'")->required()->check(CLI::ExistingFile);
  rep->add_option("--format", format, "json, csv or text");
  rep->add_option("--out", out_path, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorCategory::kParameter);
  }

  Settings settings = load_settings(config_path);
  if (seed) settings.scenario.seed = *seed;

  if (*gen) {
    auto days = synth::generate(settings.scenario);
    synth::save_days(days, out_path);
    std::size_t anomalies = 0, intervals = 0;
    for (const auto& d : days) {
      anomalies += d.gold.anomalies.size();
      intervals += d.gold.activity_intervals.size();
    }
    std::cout << "generated " << days.size() << " days, " << intervals << " activity instances, " << anomalies
              << " anomalies\n";
  } else if (*train) {
    auto days = days_from(data_dir, settings);
    std::vector<EventLog> logs;
    std::vector<Annotation> gold;
    for (const auto& d : days) {
      logs.push_back(d.log);
      gold.push_back(d.gold);
    }
    auto untrained = boundary::build_program(n_window, vocabulary_for(logs), iadl_labels());
    boundary::TrainOptions opts;
    opts.learn = settings.learn;
    save_model(boundary::train(untrained, logs, gold, opts), out_path);
  } else if (*detect) {
    auto model = load_model(model_path);
    boundary::DetectOptions opts;
    opts.thresholds = settings.activity;
    opts.solver = solver == "search" ? boundary::Solver::kSearch : boundary::Solver::kChain;
    opts.seed = seed.value_or(1);
    auto run_one = [&](const EventLog& log) {
      std::ostringstream buf;
      boundary::write_intervals(log.day_id, boundary::detect(log, model, opts), buf);
      return buf.str();
    };
    if (!log_path.empty()) {
      write_output(run_one(load_log(log_path)), out_path);
    } else {
      if (data_dir.empty()) throw ParameterError("detect needs --log or --data");
      if (out_path.empty()) throw ParameterError("detect --data needs --out DIR");
      for (const auto& d : synth::load_days(data_dir)) {
        write_output(run_one(d.log), (fs::path(out_path) / (d.log.day_id + ".intervals")).string());
      }
    }
  } else if (*anom) {
    auto rules = rules_path.empty() ? anomaly::builtin_rule_set(settings.rules)
                                    : anomaly::parse_rules(read_file(rules_path));
    anomaly::FactSet facts;
    std::string day_id;
    if (!facts_path.empty()) {
      facts = anomaly::parse_facts(read_file(facts_path));
      day_id = fs::path(facts_path).stem().string();
    } else {
      if (log_path.empty()) throw ParameterError("anomalies needs --facts or --log");
      auto log = load_log(log_path);
      day_id = log.day_id;
      Annotation ann;
      if (!annotation_path.empty()) ann = load_annotation(annotation_path);
      std::vector<boundary::ActivityInterval> intervals;
      if (gold_intervals) {
        if (annotation_path.empty()) throw ParameterError("--gold-intervals needs --annotation");
        intervals = anomaly::gold_intervals(log, ann);
      } else if (!intervals_path.empty()) {
        std::ifstream in(intervals_path);
        intervals = boundary::read_intervals(in);
      }
      facts = anomaly::build_facts(log, intervals, ann.prescriptions, settings.scenario.home, TimeBase{});
    }
    std::string text;
    for (const auto& a : anomaly::evaluate(rules, facts, day_id)) text += anomaly::to_json_line(a) + "\n";
    write_output(text, out_path);
  } else if (*cv) {
    auto fmt = eval::parse_format(format);
    auto days = days_from(data_dir, settings);
    eval::CrossValidationConfig cfg;
    cfg.n_window = n_window;
    cfg.slack = slack;
    cfg.anomaly_slack = slack;
    cfg.train.learn = settings.learn;
    cfg.detect.thresholds = settings.activity;
    cfg.detect.seed = settings.scenario.seed;
    cfg.rules = settings.rules;
    cfg.home = settings.scenario.home;
    cfg.threads = threads;
    write_output(eval::report(eval::crossvalidate(days, cfg), fmt), out_path);
  } else if (*rep) {
    auto fmt = eval::parse_format(format);
    write_output(eval::report(eval::read_json_report(read_file(input_path)), fmt), out_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.category()) << "]: " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
