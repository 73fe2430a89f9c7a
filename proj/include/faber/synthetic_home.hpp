#pragma once

// Scripted kitchen routines with injected anomalies, emitted as event logs
// plus gold annotations.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faber/anomaly.hpp"
#include "faber/event_model.hpp"

namespace faber::synth {

/// One scripted step. `item` may be a placeholder in braces (`{cook}`,
/// `{dry}`, `{cold}`, `{medicine}`) resolved once per activity instance.
struct Step {
  std::string kind;
  std::string item;
  std::int64_t gap_min = 5;  // seconds after the previous step
  std::int64_t gap_max = 30;
};

using Script = std::vector<Step>;

struct GroupSpec {
  std::string name;
  unsigned subjects = 0;
  /// Paper-profile mode: exact number of injections per code in the group.
  std::map<std::string, unsigned> totals;
  /// Rate mode: per-day injection probability per code.
  std::map<std::string, double> rates;
};

struct ScenarioSpec {
  std::uint64_t seed = 42;
  bool paper_profile = true;
  std::vector<GroupSpec> groups;
  /// prepare_cold, prepare_cooked, consume, take_medicines, plus noise_*.
  std::map<std::string, Script> scripts;
  anomaly::HomeModel home;
  /// Candidate items per placeholder name (without braces).
  std::map<std::string, std::vector<std::string>> item_pools;
  std::vector<Prescription> prescriptions;
  std::vector<std::string> unprescribed;  // medicines used for C2
  std::map<std::string, double> cooked_probability;  // per meal
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> meal_start;  // earliest prep start range
  unsigned noise_min = 3, noise_max = 6;
  std::string first_date = "2024-03-04";

  /// 7 healthy subjects (7 NC1) and 14 symptomatic subjects (29 NC, 28 C).
  static ScenarioSpec paper_profile_spec();
  /// Reads a JSON config; absent keys keep the reference-profile defaults.
  static ScenarioSpec load(const std::filesystem::path& path);
  static ScenarioSpec parse(const std::string& json_text);

  /// Throws ConfigError: critical rates in group 1, unknown kinds, bad ranges.
  void validate() const;
};

struct Injection {
  std::string code;
  std::string detail;
};

struct GeneratedDay {
  std::string group;
  EventLog log;
  Annotation gold;
  std::vector<Injection> injected;
};

/// Deterministic in the spec (seed included). Throws GenerationError when an
/// injection has no feasible target.
std::vector<GeneratedDay> generate(const ScenarioSpec& spec);

/// Explicit event indices or a drop probability for one sensor of one day.
struct SensorFailure {
  std::string day_id;
  std::string sensor_id;
  std::optional<double> drop_probability;
  std::vector<std::size_t> event_indices;
};

struct FailureSpec {
  std::uint64_t seed = 0;
  std::vector<SensorFailure> failures;
};

/// Removes matching events from the logs; gold annotations are untouched.
/// Throws ConfigError for an unknown day or sensor.
std::vector<GeneratedDay> inject_sensor_failures(std::vector<GeneratedDay> days, const FailureSpec& spec);

/// Writes `<day>.log` and `<day>.ann` per day into `dir`.
void save_days(const std::vector<GeneratedDay>& days, const std::filesystem::path& dir);
/// Reads every `*.log` with its `.ann` sibling, in day-id order.
std::vector<GeneratedDay> load_days(const std::filesystem::path& dir);

/// Critical codes C1-C7 and non-critical NC1-NC4.
bool is_critical(const std::string& code);
const std::vector<std::string>& anomaly_codes();

}  // namespace faber::synth
