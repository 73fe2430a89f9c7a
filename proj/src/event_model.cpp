#include "faber/event_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "faber/errors.hpp"
#include "text_util.hpp"

namespace faber {

namespace {

const char* const kKitchenKinds[] = {
    "OpeningFridge",           "ClosingFridge",
    "OpeningFoodCabinet",      "ClosingFoodCabinet",
    "OpeningMedicineCabinet",  "ClosingMedicineCabinet",
    "OpeningPanCabinet",       "ClosingPanCabinet",
    "OpeningSilverwareDrawer", "ClosingSilverwareDrawer",
    "OpeningGlasswareCabinet", "ClosingGlasswareCabinet",
    "RetrievingFromFridge",    "ReturningToFridge",
    "RetrievingFromFoodCabinet", "ReturningToFoodCabinet",
    "RetrievingFromMedicineCabinet", "ReturningToMedicineCabinet",
    "StoveOn",                 "StoveOff",
    "PresenceNearKitchenTable", "LeavingKitchenTable",
    "SittingAtKitchenChair",   "StandingUpFromKitchenChair",
};

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::uint64_t parse_tick(std::string_view field, int line) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError("invalid tick '" + std::string(field) + "'", line);
  }
  return value;
}

// Reads an optional `# day=<id>` header; other `#` lines are comments.
bool handle_comment(std::string_view line, std::string& day_id) {
  if (line.empty() || line.front() != '#') return false;
  auto body = detail::trim(line.substr(1));
  if (body.rfind("day=", 0) == 0) day_id = std::string(detail::trim(body.substr(4)));
  return true;
}

}  // namespace

Vocabulary Vocabulary::kitchen() {
  return Vocabulary(std::begin(kKitchenKinds), std::end(kKitchenKinds));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    auto kind = detail::trim(line);
    if (kind.empty() || kind.front() == '#') continue;
    vocab.add(std::string(kind));
  }
  return vocab;
}

bool Vocabulary::contains(std::string_view kind) const { return kinds_.find(kind) != kinds_.end(); }

void EventLog::validate() const {
  for (std::size_t i = 1; i < events.size(); ++i) {
    const auto& prev = events[i - 1].timestamp;
    const auto& cur = events[i].timestamp;
    if (cur.tick == prev.tick) {
      throw OrderError("duplicate tick " + std::to_string(cur.tick) + " in log '" + day_id + "'");
    }
    if (cur.tick < prev.tick) {
      throw OrderError("tick " + std::to_string(cur.tick) + " follows " + std::to_string(prev.tick) +
                       " in log '" + day_id + "'");
    }
    if (prev.wallclock && cur.wallclock && *cur.wallclock < *prev.wallclock) {
      throw OrderError("wallclock runs backwards at tick " + std::to_string(cur.tick));
    }
  }
}

EventLog ingest_log(std::string day_id, std::vector<RawRecord> records, const Vocabulary& vocabulary) {
  std::stable_sort(records.begin(), records.end(),
                   [](const RawRecord& a, const RawRecord& b) { return a.arrival < b.arrival; });
  EventLog log;
  log.day_id = std::move(day_id);
  log.events.reserve(records.size());
  std::uint64_t tick = 0;
  for (auto& record : records) {
    if (!vocabulary.contains(record.kind)) {
      throw VocabularyError("unknown event kind '" + record.kind + "'");
    }
    log.events.push_back(
        Event{Timestamp{tick++, record.wallclock}, std::move(record.sensor_id), std::move(record.kind), record.value});
  }
  log.validate();
  return log;
}

EventLog read_log(std::istream& in, std::string day_id_fallback) {
  EventLog log;
  log.day_id = std::move(day_id_fallback);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty() || handle_comment(line, log.day_id)) continue;
    auto fields = detail::split(line, ';');
    if (fields.size() != 5) {
      throw ParseError("expected 5 ';'-separated fields, got " + std::to_string(fields.size()), line_no);
    }
    Event event;
    event.timestamp.tick = parse_tick(fields[0], line_no);
    if (fields[1] != "-") {
      event.timestamp.wallclock = parse_wallclock(fields[1]);
      if (!event.timestamp.wallclock) {
        throw ParseError("invalid wallclock '" + std::string(fields[1]) + "'", line_no);
      }
    }
    if (fields[2].empty()) throw ParseError("empty sensor id", line_no);
    if (fields[3].empty()) throw ParseError("empty event kind", line_no);
    event.sensor_id = std::string(fields[2]);
    event.kind = std::string(fields[3]);
    if (fields[4] != "-") {
      double value = 0;
      auto [ptr, ec] = std::from_chars(fields[4].data(), fields[4].data() + fields[4].size(), value);
      if (ec != std::errc() || ptr != fields[4].data() + fields[4].size()) {
        throw ParseError("invalid value '" + std::string(fields[4]) + "'", line_no);
      }
      event.value = value;
    }
    log.events.push_back(std::move(event));
  }
  log.validate();
  return log;
}

EventLog load_log(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return read_log(in, path.stem().string());
}

void write_log(const EventLog& log, std::ostream& out) {
  if (!log.day_id.empty()) out << "# day=" << log.day_id << '\n';
  for (const auto& e : log.events) {
    out << e.timestamp.tick << ';' << (e.timestamp.wallclock ? format_wallclock(*e.timestamp.wallclock) : "-")
        << ';' << e.sensor_id << ';' << e.kind << ';' << (e.value ? format_number(*e.value) : "-") << '\n';
  }
}

void save_log(const EventLog& log, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  write_log(log, out);
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& iadl_labels() {
  static const std::vector<std::string> labels = {std::string(kPrepareMeal), std::string(kConsumeMeal),
                                                  std::string(kTakeMedicines)};
  return labels;
}

void Annotation::validate() const {
  const auto& labels = iadl_labels();
  for (const auto& interval : activity_intervals) {
    if (std::find(labels.begin(), labels.end(), interval.activity) == labels.end()) {
      throw VocabularyError("unknown activity label '" + interval.activity + "'");
    }
    if (interval.start >= interval.end) {
      throw OrderError("interval " + interval.activity + " [" + std::to_string(interval.start) + "," +
                       std::to_string(interval.end) + "] does not have start < end");
    }
  }
  for (const auto& p : prescriptions) {
    if (p.from > p.to) throw OrderError("prescription window for " + p.medicine + " is reversed");
  }
}

Annotation read_annotation(std::istream& in, std::string day_id_fallback) {
  Annotation ann;
  ann.day_id = std::move(day_id_fallback);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty() || handle_comment(line, ann.day_id)) continue;
    auto fields = detail::split(line, ';');
    if (fields[0] == "A") {
      if (fields.size() != 4) throw ParseError("activity record needs 4 fields", line_no);
      ann.activity_intervals.push_back(
          {std::string(fields[1]), parse_tick(fields[2], line_no), parse_tick(fields[3], line_no)});
    } else if (fields[0] == "X") {
      if (fields.size() != 4) throw ParseError("anomaly record needs 4 fields", line_no);
      LabeledAnomaly anomaly{std::string(fields[1]), std::string(fields[2]), std::nullopt};
      if (fields[3] != "-") anomaly.tick = parse_tick(fields[3], line_no);
      ann.anomalies.push_back(std::move(anomaly));
    } else if (fields[0] == "P") {
      if (fields.size() != 4) throw ParseError("prescription record needs 4 fields", line_no);
      auto from = parse_clock(fields[2]);
      auto to = parse_clock(fields[3]);
      if (!from || !to) throw ParseError("invalid prescription window", line_no);
      ann.prescriptions.push_back({std::string(fields[1]), *from, *to});
    } else {
      throw ParseError("unknown record type '" + std::string(fields[0]) + "'", line_no);
    }
  }
  ann.validate();
  return ann;
}

Annotation load_annotation(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return read_annotation(in, path.stem().string());
}

void write_annotation(const Annotation& ann, std::ostream& out) {
  if (!ann.day_id.empty()) out << "# day=" << ann.day_id << '\n';
  for (const auto& p : ann.prescriptions) {
    out << "P;" << p.medicine << ';' << format_clock(p.from) << ';' << format_clock(p.to) << '\n';
  }
  for (const auto& i : ann.activity_intervals) {
    out << "A;" << i.activity << ';' << i.start << ';' << i.end << '\n';
  }
  for (const auto& a : ann.anomalies) {
    out << "X;" << a.code << ';' << a.object << ';' << (a.tick ? std::to_string(*a.tick) : "-") << '\n';
  }
}

void save_annotation(const Annotation& annotation, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  write_annotation(annotation, out);
}

// ---------------------------------------------------------------------------

std::int64_t seconds_of_day(const Timestamp& ts, const TimeBase& base) {
  if (ts.wallclock) {
    auto since_epoch = ts.wallclock->time_since_epoch().count();
    auto s = since_epoch % 86400;
    return s < 0 ? s + 86400 : s;
  }
  return static_cast<std::int64_t>(std::llround(static_cast<double>(ts.tick) * base.seconds_per_tick));
}

std::string format_wallclock(Wallclock wc) {
  using namespace std::chrono;
  auto day = floor<days>(wc);
  year_month_day ymd{day};
  hh_mm_ss hms{wc - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

std::optional<Wallclock> parse_wallclock(std::string_view text) {
  using namespace std::chrono;
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
      text[16] != ':') {
    return std::nullopt;
  }
  auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc() || ptr != text.data() + pos + len) return std::nullopt;
    return v;
  };
  auto y = num(0, 4), mo = num(5, 2), d = num(8, 2), h = num(11, 2), mi = num(14, 2), s = num(17, 2);
  if (!y || !mo || !d || !h || !mi || !s) return std::nullopt;
  year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)}, day{static_cast<unsigned>(*d)}};
  if (!ymd.ok() || *h > 23 || *mi > 59 || *s > 59) return std::nullopt;
  return sys_days{ymd} + hours{*h} + minutes{*mi} + seconds{*s};
}

std::optional<std::int64_t> parse_clock(std::string_view text) {
  auto parts = detail::split(text, ':');
  if (parts.size() < 2 || parts.size() > 3) return std::nullopt;
  std::int64_t total = 0;
  const std::int64_t scale[] = {3600, 60, 1};
  for (std::size_t i = 0; i < parts.size(); ++i) {
    int v = 0;
    auto p = parts[i];
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v);
    if (ec != std::errc() || ptr != p.data() + p.size() || p.empty() || v < 0) return std::nullopt;
    if ((i > 0 && v > 59) || (i == 0 && v > 23)) return std::nullopt;
    total += v * scale[i];
  }
  return total;
}

std::string format_clock(std::int64_t s) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", static_cast<long long>(s / 3600),
                static_cast<long long>((s / 60) % 60), static_cast<long long>(s % 60));
  return buf;
}

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace faber
