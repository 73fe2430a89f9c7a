#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace faber {

using Wallclock = std::chrono::sys_seconds;

/// Gateway-assigned position on the canonical time axis. `tick` orders
/// events; `wallclock` is metadata consumed only by duration rules.
struct Timestamp {
  std::uint64_t tick = 0;
  std::optional<Wallclock> wallclock;

  friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

struct Event {
  Timestamp timestamp;
  std::string sensor_id;
  std::string kind;
  std::optional<double> value;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Set of event labels shared by the integration layer and the reasoner.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::initializer_list<std::string> kinds) : kinds_(kinds.begin(), kinds.end()) {}
  template <typename It>
  Vocabulary(It first, It last) : kinds_(first, last) {}

  /// Kitchen vocabulary used by the synthetic home.
  static Vocabulary kitchen();
  /// One kind per line; blank lines and `#` comments ignored.
  static Vocabulary load(const std::filesystem::path& path);

  bool contains(std::string_view kind) const;
  void add(std::string kind) { kinds_.insert(std::move(kind)); }
  const std::set<std::string, std::less<>>& kinds() const { return kinds_; }

 private:
  std::set<std::string, std::less<>> kinds_;
};

struct EventLog {
  std::string day_id;
  std::vector<Event> events;

  /// Throws OrderError on non-monotone or duplicate ticks, or when the
  /// wallclock runs backwards.
  void validate() const;

  friend bool operator==(const EventLog&, const EventLog&) = default;
};

/// A record as it arrives at the gateway, before timestamping.
struct RawRecord {
  std::string sensor_id;
  std::string kind;
  std::optional<double> value;
  std::uint64_t arrival = 0;
  std::optional<Wallclock> wallclock;
};

/// Assigns ticks 0,1,2,... in arrival order. Unknown kinds raise
/// VocabularyError naming the kind.
EventLog ingest_log(std::string day_id, std::vector<RawRecord> records, const Vocabulary& vocabulary);

EventLog load_log(const std::filesystem::path& path);
EventLog read_log(std::istream& in, std::string day_id_fallback = {});
void save_log(const EventLog& log, const std::filesystem::path& path);
void write_log(const EventLog& log, std::ostream& out);

// ---------------------------------------------------------------------------
// Ground-truth annotations.

inline constexpr std::string_view kPrepareMeal = "PrepareMeal";
inline constexpr std::string_view kConsumeMeal = "ConsumeMeal";
inline constexpr std::string_view kTakeMedicines = "TakeMedicines";

/// The three IADL labels, in canonical order.
const std::vector<std::string>& iadl_labels();

struct LabeledInterval {
  std::string activity;
  std::uint64_t start = 0;
  std::uint64_t end = 0;

  friend bool operator==(const LabeledInterval&, const LabeledInterval&) = default;
};

struct LabeledAnomaly {
  std::string code;  // NC1..NC4, C1..C7
  std::string object;
  std::optional<std::uint64_t> tick;

  friend bool operator==(const LabeledAnomaly&, const LabeledAnomaly&) = default;
  friend auto operator<=>(const LabeledAnomaly&, const LabeledAnomaly&) = default;
};

/// Medicine that must be taken between two times of day (seconds since midnight).
struct Prescription {
  std::string medicine;
  std::int64_t from = 0;
  std::int64_t to = 0;

  friend bool operator==(const Prescription&, const Prescription&) = default;
};

struct Annotation {
  std::string day_id;
  std::vector<LabeledInterval> activity_intervals;
  std::vector<LabeledAnomaly> anomalies;
  std::vector<Prescription> prescriptions;

  void validate() const;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

Annotation load_annotation(const std::filesystem::path& path);
Annotation read_annotation(std::istream& in, std::string day_id_fallback = {});
void save_annotation(const Annotation& annotation, const std::filesystem::path& path);
void write_annotation(const Annotation& annotation, std::ostream& out);

// ---------------------------------------------------------------------------
// Time helpers.

/// Converts ticks to durations when no wallclock is recorded.
struct TimeBase {
  double seconds_per_tick = 30.0;
};

/// Seconds since midnight; falls back to tick * seconds_per_tick.
std::int64_t seconds_of_day(const Timestamp& ts, const TimeBase& base);

std::string format_wallclock(Wallclock wc);
/// Parses `YYYY-MM-DDTHH:MM:SS`; returns nullopt on malformed input.
std::optional<Wallclock> parse_wallclock(std::string_view text);

/// `HH:MM[:SS]` to seconds since midnight.
std::optional<std::int64_t> parse_clock(std::string_view text);
std::string format_clock(std::int64_t seconds_of_day);

std::string format_number(double value);

}  // namespace faber
