#pragma once

// Leave-one-day-out cross-validation of the full pipeline and its reports.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "faber/anomaly.hpp"
#include "faber/boundary.hpp"
#include "faber/metrics.hpp"
#include "faber/synthetic_home.hpp"

namespace faber::eval {

struct CrossValidationConfig {
  int n_window = 3;
  std::uint64_t slack = 1;          // boundary matching, in ticks
  std::uint64_t anomaly_slack = 1;  // anomaly time matching, in ticks
  boundary::TrainOptions train;
  boundary::DetectOptions detect;
  anomaly::RuleConfig rules = anomaly::default_rule_config();
  anomaly::HomeModel home = anomaly::HomeModel::kitchen();
  unsigned threads = 0;  // 0: hardware concurrency
};

struct FoldResult {
  std::string fold_id;  // held-out day
  std::string group;
  Counts boundary;
  std::map<std::string, Counts> anomalies;  // per code
  std::vector<anomaly::Anomaly> predicted;
};

struct Aggregate {
  Counts boundary;
  std::map<std::string, std::map<std::string, Counts>> by_code;  // code -> group -> counts
  Counts total, critical, non_critical;
};

struct CrossValidation {
  std::vector<FoldResult> folds;
  Aggregate aggregate;
};

/// Per-code counts of predicted against gold anomalies. A match needs the
/// same code and object and either two null times or ticks within `slack`;
/// each gold anomaly matches at most one prediction.
std::map<std::string, Counts> match_anomalies(const std::vector<LabeledAnomaly>& predicted,
                                              const std::vector<LabeledAnomaly>& gold, std::uint64_t slack);

/// Runs the pipeline on one held-out day with an already trained program.
FoldResult evaluate_day(const synth::GeneratedDay& day, const boundary::BoundaryProgram& trained,
                        const CrossValidationConfig& config);

/// Folds run in parallel; results are in day order and independent of the
/// thread count. Errors carry the fold id. Needs at least two days.
CrossValidation crossvalidate(const std::vector<synth::GeneratedDay>& days, const CrossValidationConfig& config);

/// Sums fold counts; metrics are computed from the sums.
Aggregate aggregate(const std::vector<FoldResult>& folds);

enum class Format { kJson, kCsv, kText };

/// Throws ParameterError for anything but json, csv or text.
Format parse_format(std::string_view name);

std::string report(const CrossValidation& cv, Format format);

/// Reads the fold counts back from a JSON report; aggregates are recomputed.
CrossValidation read_json_report(const std::string& text);

}  // namespace faber::eval
