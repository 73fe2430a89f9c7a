#include "faber/synthetic_home.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "faber/errors.hpp"
#include "json.hpp"
#include "text_util.hpp"

namespace faber::synth {

namespace {

using Rng = std::mt19937_64;

// Portable draws: the standard distributions are implementation-defined.
std::int64_t uniform(Rng& rng, std::int64_t lo, std::int64_t hi) {
  if (hi <= lo) return lo;
  return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

double unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& xs) {
  return xs[static_cast<std::size_t>(uniform(rng, 0, static_cast<std::int64_t>(xs.size()) - 1))];
}

constexpr std::int64_t kMinute = 60;

std::int64_t clock(const char* text) { return *parse_clock(text); }

Script script(std::initializer_list<Step> steps) { return Script(steps); }

std::string sensor_for(const std::string& kind, const std::string& item) {
  for (const char* prefix : {"Opening", "Closing"}) {
    if (detail::starts_with(kind, prefix)) return "mag." + anomaly::constant_name(kind.substr(7));
  }
  if (detail::starts_with(kind, "RetrievingFrom") || detail::starts_with(kind, "ReturningTo")) return "rfid." + item;
  if (detail::starts_with(kind, "Stove")) return "stove";
  if (kind == "PresenceNearKitchenTable" || kind == "LeavingKitchenTable") return "pir.table";
  return "chair";
}

std::string repository_of(const std::string& kind) {
  if (detail::starts_with(kind, "Opening") || detail::starts_with(kind, "Closing")) {
    return anomaly::constant_name(kind.substr(7));
  }
  return {};
}

}  // namespace

const std::vector<std::string>& anomaly_codes() {
  static const std::vector<std::string> codes = {"NC1", "NC2", "NC3", "NC4", "C1", "C2",
                                                 "C3",  "C4",  "C5",  "C6",  "C7"};
  return codes;
}

bool is_critical(const std::string& code) { return detail::starts_with(code, "C"); }

// ---------------------------------------------------------------------------
// Spec

ScenarioSpec ScenarioSpec::paper_profile_spec() {
  ScenarioSpec s;
  s.groups = {
      {"g1", 7, {{"NC1", 7}}, {}},
      // Group totals 29 NC and 28 C; the per-code split follows the reference
      // per-code counts, rescaled to those totals.
      {"g2",
       14,
       {{"NC1", 17}, {"NC2", 6}, {"NC3", 3}, {"NC4", 3}, {"C1", 8}, {"C2", 5}, {"C3", 3}, {"C4", 1}, {"C5", 5},
        {"C6", 1}, {"C7", 5}},
       {}},
  };
  s.scripts["prepare_cold"] = script({{"OpeningFoodCabinet", "", 0, 0},
                                      {"RetrievingFromFoodCabinet", "{dry}", 5, 20},
                                      {"ClosingFoodCabinet", "", 5, 20},
                                      {"OpeningFridge", "", 10, 40},
                                      {"RetrievingFromFridge", "{cold}", 5, 20},
                                      {"ClosingFridge", "", 5, 20},
                                      {"OpeningGlasswareCabinet", "", 20, 60},
                                      {"ClosingGlasswareCabinet", "", 5, 15},
                                      {"OpeningFridge", "", 60, 180},
                                      {"ReturningToFridge", "{cold}", 5, 15},
                                      {"ClosingFridge", "", 5, 15}});
  s.scripts["prepare_cooked"] = script({{"OpeningFridge", "", 0, 0},
                                        {"RetrievingFromFridge", "{cook}", 5, 20},
                                        {"ClosingFridge", "", 5, 20},
                                        {"OpeningPanCabinet", "", 20, 60},
                                        {"ClosingPanCabinet", "", 5, 15},
                                        {"StoveOn", "", 20, 60},
                                        {"StoveOff", "", 6 * kMinute, 15 * kMinute},
                                        {"OpeningFridge", "", 30, 120},
                                        {"ReturningToFridge", "{cook}", 5, 15},
                                        {"ClosingFridge", "", 5, 15}});
  s.scripts["consume"] = script({{"OpeningSilverwareDrawer", "", 0, 0},
                                 {"ClosingSilverwareDrawer", "", 5, 15},
                                 {"PresenceNearKitchenTable", "", 10, 40},
                                 {"SittingAtKitchenChair", "", 5, 20},
                                 {"StandingUpFromKitchenChair", "", 10 * kMinute, 25 * kMinute},
                                 {"LeavingKitchenTable", "", 5, 30}});
  s.scripts["take_medicines"] = script({{"OpeningGlasswareCabinet", "", 0, 0},
                                        {"ClosingGlasswareCabinet", "", 5, 15},
                                        {"OpeningMedicineCabinet", "", 10, 30},
                                        {"RetrievingFromMedicineCabinet", "{medicine}", 5, 15},
                                        {"ReturningToMedicineCabinet", "{medicine}", 10, 40},
                                        {"ClosingMedicineCabinet", "", 5, 15}});
  s.scripts["noise_fridge"] = script({{"OpeningFridge", "", 0, 0}, {"ClosingFridge", "", 5, 30}});
  s.scripts["noise_water"] = script({{"OpeningGlasswareCabinet", "", 0, 0}, {"ClosingGlasswareCabinet", "", 5, 20}});
  s.scripts["noise_passby"] = script({{"PresenceNearKitchenTable", "", 0, 0}, {"LeavingKitchenTable", "", 10, 60}});
  s.home = anomaly::HomeModel::kitchen();
  s.item_pools = {{"dry", {"bread", "cereals", "biscuits"}},
                  {"cold", {"milk", "yogurt", "cheese"}},
                  {"cook", {"eggs", "meat"}}};
  s.prescriptions = {{"aspirin", clock("08:00"), clock("10:00")},
                     {"metformin", clock("13:00"), clock("15:00")},
                     {"simvastatin", clock("20:30"), clock("22:30")}};
  s.unprescribed = {"ibuprofen", "warfarin"};
  s.cooked_probability = {{"breakfast", 0.2}, {"lunch", 0.85}, {"dinner", 0.85}};
  s.meal_start = {{"breakfast", {clock("07:00"), clock("07:45")}},
                  {"lunch", {clock("12:00"), clock("12:45")}},
                  {"dinner", {clock("18:45"), clock("19:30")}}};
  return s;
}

namespace {

std::int64_t json_clock(const nlohmann::json& j, const std::string& what) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  auto v = j.is_string() ? parse_clock(j.get<std::string>()) : std::nullopt;
  if (!v) throw ConfigError("expected a clock value for " + what);
  return *v;
}

}  // namespace

ScenarioSpec ScenarioSpec::parse(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("scenario config is not valid JSON: ") + e.what());
  }
  ScenarioSpec s = paper_profile_spec();
  try {
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("mode")) {
      auto mode = j["mode"].get<std::string>();
      if (mode != "paper" && mode != "rates") throw ConfigError("mode must be 'paper' or 'rates'");
      s.paper_profile = mode == "paper";
    }
    if (j.contains("groups")) {
      s.groups.clear();
      for (const auto& g : j["groups"]) {
        GroupSpec gs;
        gs.name = g.at("name").get<std::string>();
        gs.subjects = g.at("subjects").get<unsigned>();
        if (g.contains("totals")) gs.totals = g["totals"].get<std::map<std::string, unsigned>>();
        if (g.contains("rates")) gs.rates = g["rates"].get<std::map<std::string, double>>();
        s.groups.push_back(std::move(gs));
      }
    }
    if (j.contains("scripts")) {
      for (const auto& [name, steps] : j["scripts"].items()) {
        Script sc;
        for (const auto& st : steps) {
          Step step;
          step.kind = st.at("kind").get<std::string>();
          step.item = st.value("item", "");
          if (st.contains("gap")) {
            step.gap_min = st["gap"].at(0).get<std::int64_t>();
            step.gap_max = st["gap"].at(1).get<std::int64_t>();
          }
          sc.push_back(std::move(step));
        }
        s.scripts[name] = std::move(sc);
      }
    }
    if (j.contains("item_pools")) s.item_pools = j["item_pools"].get<std::map<std::string, std::vector<std::string>>>();
    if (j.contains("prescriptions")) {
      s.prescriptions.clear();
      for (const auto& p : j["prescriptions"]) {
        s.prescriptions.push_back({p.at("medicine").get<std::string>(), json_clock(p.at("from"), "prescription"),
                                   json_clock(p.at("to"), "prescription")});
      }
    }
    if (j.contains("unprescribed")) s.unprescribed = j["unprescribed"].get<std::vector<std::string>>();
    if (j.contains("cooked_probability")) {
      s.cooked_probability = j["cooked_probability"].get<std::map<std::string, double>>();
    }
    if (j.contains("meal_start")) {
      s.meal_start.clear();
      for (const auto& [meal, range] : j["meal_start"].items()) {
        s.meal_start[meal] = {json_clock(range.at(0), meal), json_clock(range.at(1), meal)};
      }
    }
    if (j.contains("noise")) {
      s.noise_min = j["noise"].at(0).get<unsigned>();
      s.noise_max = j["noise"].at(1).get<unsigned>();
    }
    if (j.contains("first_date")) s.first_date = j["first_date"].get<std::string>();
    if (j.contains("medicines")) s.home.medicines = j["medicines"].get<std::set<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario config: ") + e.what());
  }
  for (const auto& m : s.unprescribed) s.home.medicines.insert(m);
  for (const auto& p : s.prescriptions) s.home.medicines.insert(p.medicine);
  s.validate();
  return s;
}

ScenarioSpec ScenarioSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void ScenarioSpec::validate() const {
  const auto& codes = anomaly_codes();
  auto known = [&](const std::string& c) { return std::find(codes.begin(), codes.end(), c) != codes.end(); };
  if (groups.empty()) throw ConfigError("scenario needs at least one group");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& [code, n] : groups[g].totals) {
      if (!known(code)) throw ConfigError("unknown anomaly code '" + code + "'");
      if (g == 0 && is_critical(code) && n > 0) {
        throw ConfigError("group " + groups[g].name + " is healthy and cannot receive critical anomaly " + code);
      }
    }
    for (const auto& [code, r] : groups[g].rates) {
      if (!known(code)) throw ConfigError("unknown anomaly code '" + code + "'");
      if (r < 0 || r > 1) throw ConfigError("rate for " + code + " must lie in [0,1]");
      if (g == 0 && is_critical(code) && r > 0) {
        throw ConfigError("group " + groups[g].name + " is healthy and cannot receive critical anomaly " + code);
      }
    }
  }
  auto vocab = Vocabulary::kitchen();
  for (const char* required : {"prepare_cold", "prepare_cooked", "consume", "take_medicines"}) {
    if (!scripts.count(required)) throw ConfigError(std::string("missing script '") + required + "'");
  }
  for (const auto& [name, sc] : scripts) {
    if (sc.empty()) throw ConfigError("script '" + name + "' is empty");
    for (const auto& st : sc) {
      if (!vocab.contains(st.kind)) throw ConfigError("script '" + name + "' uses unknown event kind '" + st.kind + "'");
      if (st.gap_min < 0 || st.gap_min > st.gap_max) throw ConfigError("script '" + name + "' has a bad gap range");
      if (st.item.size() > 2 && st.item.front() == '{') {
        auto pool = st.item.substr(1, st.item.size() - 2);
        if (pool != "medicine" && !item_pools.count(pool)) {
          throw ConfigError("script '" + name + "' uses unknown item pool '" + pool + "'");
        }
      }
    }
  }
  for (const auto& [meal, range] : meal_start) {
    if (range.first > range.second) throw ConfigError("meal start range for " + meal + " is reversed");
  }
  if (noise_min > noise_max) throw ConfigError("noise range is reversed");
  if (!parse_wallclock(first_date + "T00:00:00")) throw ConfigError("first_date must be YYYY-MM-DD");
}

// ---------------------------------------------------------------------------
// Generation

namespace {

struct Instance {
  std::string activity;
  std::string script;
  std::string meal;      // meals only
  std::string medicine;  // medicine activities only
  std::int64_t earliest = 0;
  std::string code;      // injected anomaly, empty if none
  int closing_step = -1;  // NC1 target
  bool extra = false;     // C2 or C3 addition
};

struct DayPlan {
  std::string day_id;
  std::string group;
  std::size_t index = 0;
  std::vector<Instance> instances;
  std::vector<std::pair<std::size_t, Instance>> additions;  // inserted after instance i
};

struct Emitted {
  std::int64_t secs;
  std::string kind;
  std::string sensor;
  int instance;  // -1 for noise
};

struct GoldRef {
  std::string code, object;
  std::optional<std::size_t> event;  // index into the emitted list before sorting
};

bool free_instance(const Instance& in) { return in.code.empty(); }

std::vector<int> closing_steps(const Script& sc) {
  std::vector<int> out;
  for (std::size_t i = 0; i < sc.size(); ++i)
    if (detail::starts_with(sc[i].kind, "Closing")) out.push_back(static_cast<int>(i));
  return out;
}

bool script_has(const Script& sc, const std::string& kind) {
  return std::any_of(sc.begin(), sc.end(), [&](const Step& s) { return s.kind == kind; });
}

class Generator {
 public:
  explicit Generator(const ScenarioSpec& spec) : spec_(spec), rng_(spec.seed) {}

  std::vector<GeneratedDay> run() {
    spec_.validate();
    std::vector<DayPlan> plans;
    std::size_t index = 0;
    for (const auto& g : spec_.groups) {
      std::vector<std::size_t> members;
      for (unsigned s = 1; s <= g.subjects; ++s) {
        char id[32];
        std::snprintf(id, sizeof id, "%s-s%02u", g.name.c_str(), s);
        members.push_back(plans.size());
        plans.push_back(plan_day(id, g.name, index++));
      }
      if (spec_.paper_profile) allocate_totals(g, plans, members);
      else allocate_rates(g, plans, members);
    }
    std::vector<GeneratedDay> days;
    for (auto& p : plans) days.push_back(render(p));
    return days;
  }

 private:
  DayPlan plan_day(const std::string& id, const std::string& group, std::size_t index) {
    DayPlan p{id, group, index, {}, {}};
    struct Anchor {
      std::int64_t earliest;
      std::vector<Instance> items;
    };
    std::vector<Anchor> anchors;
    for (const auto& [meal, range] : spec_.meal_start) {
      double pc = spec_.cooked_probability.count(meal) ? spec_.cooked_probability.at(meal) : 0.5;
      bool cooked = unit(rng_) < pc;
      std::int64_t t = uniform(rng_, range.first, range.second);
      Instance prep{std::string(kPrepareMeal), cooked ? "prepare_cooked" : "prepare_cold", meal, "", t, "", -1, false};
      Instance eat{std::string(kConsumeMeal), "consume", meal, "", t, "", -1, false};
      anchors.push_back({t, {prep, eat}});
    }
    for (const auto& rx : spec_.prescriptions) {
      std::int64_t t = rx.from + uniform(rng_, 5 * kMinute, 20 * kMinute);
      anchors.push_back({t, {Instance{std::string(kTakeMedicines), "take_medicines", "", rx.medicine, t, "", -1,
                                      false}}});
    }
    std::stable_sort(anchors.begin(), anchors.end(),
                     [](const Anchor& a, const Anchor& b) { return a.earliest < b.earliest; });
    for (auto& a : anchors)
      for (auto& in : a.items) p.instances.push_back(std::move(in));
    return p;
  }

  // A target is one or more instances of a plan that an injection consumes.
  struct Target {
    std::size_t plan;
    std::vector<std::size_t> instances;
  };

  std::vector<Target> candidates(const std::string& code, const DayPlan& p, std::size_t plan_index) const {
    std::vector<Target> out;
    const auto& ins = p.instances;
    auto add = [&](std::vector<std::size_t> xs) { out.push_back({plan_index, std::move(xs)}); };
    if (code == "C2") {
      // One addition per day keeps the medicine schedule readable.
      bool used = std::any_of(p.additions.begin(), p.additions.end(),
                              [](const auto& a) { return a.second.code == "C2"; });
      if (!used) add({});
      return out;
    }
    for (std::size_t i = 0; i < ins.size(); ++i) {
      const auto& in = ins[i];
      if (!free_instance(in)) continue;
      const Script& sc = spec_.scripts.at(in.script);
      bool meds = in.activity == kTakeMedicines;
      bool prep = in.activity == kPrepareMeal;
      bool cooked = prep && script_has(sc, "StoveOn");
      if (code == "NC1" && !closing_steps(sc).empty()) add({i});
      if ((code == "NC2" && script_has(sc, "ReturningToMedicineCabinet")) && meds) add({i});
      if ((code == "C1" || code == "C3") && meds) add({i});
      if (code == "NC3" && cooked && script_has(sc, "StoveOff")) add({i});
      if (code == "C7" && cooked && script_has(sc, "OpeningPanCabinet")) add({i});
      if (code == "C4" && cooked && script_has(sc, "StoveOff")) {
        bool last = true;
        for (std::size_t k = i + 1; k < ins.size(); ++k) {
          if (ins[k].activity == kPrepareMeal && ins[k].code != "NC4" &&
              script_has(spec_.scripts.at(ins[k].script), "StoveOn")) {
            last = false;
          }
        }
        if (last) add({i});
      }
      if (in.activity == kConsumeMeal) {
        if (code == "C6") add({i});
        if (code == "C5" && script_has(sc, "OpeningSilverwareDrawer")) add({i});
        if (code == "NC4" && i > 0 && ins[i - 1].activity == kPrepareMeal && ins[i - 1].meal == in.meal &&
            free_instance(ins[i - 1])) {
          add({i - 1, i});
        }
      }
    }
    return out;
  }

  void apply(const std::string& code, const Target& t, std::vector<DayPlan>& plans) {
    DayPlan& p = plans[t.plan];
    if (code == "C2") {
      Instance extra{std::string(kTakeMedicines), "take_medicines", "", pick(rng_, spec_.unprescribed), 0, "C2", -1,
                     true};
      auto after = static_cast<std::size_t>(uniform(rng_, 0, static_cast<std::int64_t>(p.instances.size()) - 1));
      // Stay clear of the gap between preparing and eating a meal.
      if (p.instances[after].activity == kPrepareMeal) ++after;
      p.additions.emplace_back(after, extra);
      return;
    }
    for (auto i : t.instances) p.instances[i].code = code;
    if (code == "NC1") {
      auto& in = p.instances[t.instances[0]];
      in.closing_step = pick(rng_, closing_steps(spec_.scripts.at(in.script)));
    }
    if (code == "C3") {
      Instance dup = p.instances[t.instances[0]];
      dup.extra = true;
      p.additions.emplace_back(t.instances[0], dup);
    }
  }

  // Most constrained codes first so that scarce targets are not taken.
  static std::vector<std::string> allocation_order() {
    return {"C4", "NC3", "C7", "NC4", "C6", "C5", "NC2", "C1", "C3", "NC1", "C2"};
  }

  void allocate_totals(const GroupSpec& g, std::vector<DayPlan>& plans, const std::vector<std::size_t>& members) {
    for (const auto& code : allocation_order()) {
      auto it = g.totals.find(code);
      if (it == g.totals.end()) continue;
      for (unsigned n = 0; n < it->second; ++n) {
        std::vector<Target> pool;
        for (auto m : members)
          for (auto& t : candidates(code, plans[m], m)) pool.push_back(std::move(t));
        if (pool.empty()) {
          throw GenerationError("group " + g.name + ": no feasible target left for " + code + " (placed " +
                                std::to_string(n) + " of " + std::to_string(it->second) + ")");
        }
        apply(code, pick(rng_, pool), plans);
      }
    }
  }

  void allocate_rates(const GroupSpec& g, std::vector<DayPlan>& plans, const std::vector<std::size_t>& members) {
    for (auto m : members) {
      for (const auto& code : allocation_order()) {
        auto it = g.rates.find(code);
        if (it == g.rates.end() || unit(rng_) >= it->second) continue;
        auto pool = candidates(code, plans[m], m);
        if (pool.empty()) throw GenerationError("subject " + plans[m].day_id + ": cannot inject " + code);
        apply(code, pick(rng_, pool), plans);
      }
    }
  }

  std::string resolve_item(const std::string& placeholder, const Instance& in, std::map<std::string, std::string>& chosen) {
    if (placeholder.size() < 2 || placeholder.front() != '{') return placeholder;
    auto pool = placeholder.substr(1, placeholder.size() - 2);
    if (pool == "medicine") return in.medicine;
    auto [it, inserted] = chosen.emplace(pool, "");
    if (inserted) it->second = pick(rng_, spec_.item_pools.at(pool));
    return it->second;
  }

  GeneratedDay render(DayPlan& p) {
    // Final order: planned instances with additions spliced in after their anchor.
    std::vector<Instance> order;
    for (std::size_t i = 0; i < p.instances.size(); ++i) {
      order.push_back(p.instances[i]);
      for (const auto& [after, extra] : p.additions)
        if (after == i) order.push_back(extra);
    }

    std::vector<Emitted> events;
    std::vector<GoldRef> gold;
    std::vector<Injection> injected;
    std::vector<std::pair<std::int64_t, std::int64_t>> busy;
    std::int64_t cursor = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Instance& in = order[k];
      const Script& sc = spec_.scripts.at(in.script);
      bool follows_prep = in.activity == kConsumeMeal && k > 0 && order[k - 1].activity == kPrepareMeal;
      std::int64_t start = follows_prep ? cursor + uniform(rng_, 30, 3 * kMinute)
                                        : std::max(in.earliest, cursor + uniform(rng_, 3 * kMinute, 12 * kMinute));
      if (in.extra) start = cursor + uniform(rng_, 3 * kMinute, 8 * kMinute);

      std::string object = in.meal.empty() ? in.medicine : in.meal;
      // C3 is recorded on the repeated intake, NC4 once per meal.
      bool record = !in.code.empty() && !(in.code == "C3" && !in.extra) &&
                    !(in.code == "NC4" && in.activity == kConsumeMeal);
      if (record) injected.push_back({in.code, in.activity + ":" + object});
      // Omitted activities leave no trace and take no time.
      if ((in.code == "NC4") || in.code == "C1" || (in.code == "C6" && in.activity == kConsumeMeal)) {
        if (in.code == "NC4" && in.activity == kConsumeMeal) continue;
        gold.push_back({in.code, object, std::nullopt});
        continue;
      }

      std::map<std::string, std::string> chosen;
      std::int64_t t = start;
      std::map<std::string, std::size_t> last_open;  // repository -> emitted index
      std::optional<std::size_t> stove_on, retrieve_cook, retrieve_med;
      for (std::size_t s = 0; s < sc.size(); ++s) {
        const Step& st = sc[s];
        t += std::max<std::int64_t>(1, uniform(rng_, st.gap_min, st.gap_max));
        bool drop = false;
        if (in.code == "NC1" && static_cast<int>(s) == in.closing_step) {
          auto repo = repository_of(st.kind);
          auto open = last_open.find(repo);
          if (open == last_open.end()) {
            throw GenerationError("subject " + p.day_id + ": NC1 target " + st.kind + " has no preceding opening");
          }
          gold.push_back({"NC1", repo, open->second});
          drop = true;
        }
        if (in.code == "NC2" && st.kind == "ReturningToMedicineCabinet") drop = true;
        if (in.code == "NC3" && (st.kind == "StoveOn" || st.kind == "StoveOff")) drop = true;
        if (in.code == "C4" && st.kind == "StoveOff") drop = true;
        if (in.code == "C5" && (st.kind == "OpeningSilverwareDrawer" || st.kind == "ClosingSilverwareDrawer")) {
          drop = true;
        }
        if (in.code == "C7" && (st.kind == "OpeningPanCabinet" || st.kind == "ClosingPanCabinet")) drop = true;
        if (drop) continue;

        std::string item = resolve_item(st.item, in, chosen);
        events.push_back({t, st.kind, sensor_for(st.kind, item), static_cast<int>(k)});
        std::size_t idx = events.size() - 1;
        if (detail::starts_with(st.kind, "Opening")) last_open[repository_of(st.kind)] = idx;
        if (st.kind == "StoveOn") stove_on = idx;
        if (st.kind == "RetrievingFromMedicineCabinet") retrieve_med = idx;
        if (detail::starts_with(st.kind, "RetrievingFrom") && spec_.home.cook_foods.count(item)) retrieve_cook = idx;
      }
      busy.emplace_back(start, t);
      cursor = t;

      if (in.code == "NC2") gold.push_back({"NC2", in.medicine, retrieve_med});
      if (in.code == "NC3") gold.push_back({"NC3", events[*retrieve_cook].sensor.substr(5), retrieve_cook});
      if (in.code == "C4" || in.code == "C7") gold.push_back({in.code, "stove", stove_on});
      if (in.code == "C5") gold.push_back({"C5", in.meal, std::nullopt});
      if (in.code == "C2") gold.push_back({"C2", in.medicine, std::nullopt});
      if (in.code == "C3" && in.extra) gold.push_back({"C3", in.medicine, retrieve_med});
    }

    add_noise(events, busy);

    // Ticks follow time order; ties keep emission order.
    std::vector<std::size_t> perm(events.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a, std::size_t b) { return events[a].secs < events[b].secs; });
    std::vector<std::uint64_t> tick_of(events.size());
    for (std::size_t k = 0; k < perm.size(); ++k) tick_of[perm[k]] = k;

    GeneratedDay day;
    day.group = p.group;
    day.log.day_id = p.day_id;
    day.gold.day_id = p.day_id;
    day.injected = std::move(injected);
    auto date = *parse_wallclock(spec_.first_date + "T00:00:00") + std::chrono::days(p.index);
    std::int64_t previous = -1;
    for (std::size_t k = 0; k < perm.size(); ++k) {
      const auto& e = events[perm[k]];
      std::int64_t secs = std::max(e.secs, previous + 1);  // strictly increasing clock
      previous = secs;
      if (secs >= 24 * 3600) throw GenerationError("subject " + p.day_id + ": routine runs past midnight");
      day.log.events.push_back({Timestamp{k, date + std::chrono::seconds(secs)}, e.sensor, e.kind, std::nullopt});
    }

    std::map<int, std::pair<std::uint64_t, std::uint64_t>> spans;
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (events[i].instance < 0) continue;
      auto [it, inserted] = spans.emplace(events[i].instance, std::make_pair(tick_of[i], tick_of[i]));
      if (!inserted) {
        it->second.first = std::min(it->second.first, tick_of[i]);
        it->second.second = std::max(it->second.second, tick_of[i]);
      }
    }
    for (const auto& [k, span] : spans) {
      if (span.first >= span.second) continue;
      day.gold.activity_intervals.push_back({order[static_cast<std::size_t>(k)].activity, span.first, span.second});
    }
    std::sort(day.gold.activity_intervals.begin(), day.gold.activity_intervals.end(),
              [](const LabeledInterval& a, const LabeledInterval& b) { return a.start < b.start; });
    for (const auto& g : gold) {
      std::optional<std::uint64_t> tick;
      if (g.event) tick = tick_of[*g.event];
      day.gold.anomalies.push_back({g.code, g.object, tick});
    }
    std::sort(day.gold.anomalies.begin(), day.gold.anomalies.end());
    day.gold.prescriptions = spec_.prescriptions;
    check_prescription_windows(day);
    day.log.validate();
    day.gold.validate();
    return day;
  }

  void check_prescription_windows(const GeneratedDay& day) const {
    TimeBase base;
    for (const auto& e : day.log.events) {
      if (e.kind != "RetrievingFromMedicineCabinet") continue;
      auto med = e.sensor_id.substr(5);
      auto secs = seconds_of_day(e.timestamp, base);
      for (const auto& rx : spec_.prescriptions) {
        if (rx.medicine == med && (secs <= rx.from || secs >= rx.to)) {
          throw GenerationError("subject " + day.log.day_id + ": " + med + " scheduled outside its window");
        }
      }
    }
  }

  void add_noise(std::vector<Emitted>& events, const std::vector<std::pair<std::int64_t, std::int64_t>>& busy) {
    std::vector<const Script*> noise;
    for (const auto& [name, sc] : spec_.scripts)
      if (detail::starts_with(name, "noise")) noise.push_back(&sc);
    if (noise.empty()) return;
    auto count = uniform(rng_, spec_.noise_min, spec_.noise_max);
    auto taken = busy;
    for (std::int64_t n = 0; n < count; ++n) {
      const Script& sc = *pick(rng_, noise);
      for (int attempt = 0; attempt < 100; ++attempt) {
        std::int64_t start = uniform(rng_, clock("06:30"), clock("22:45"));
        std::vector<std::int64_t> times;
        std::int64_t t = start;
        for (const auto& st : sc) {
          t += std::max<std::int64_t>(1, uniform(rng_, st.gap_min, st.gap_max));
          times.push_back(t);
        }
        std::int64_t lo = times.front() - 3 * kMinute, hi = times.back() + 3 * kMinute;
        bool clash = std::any_of(taken.begin(), taken.end(),
                                 [&](const auto& b) { return lo <= b.second && b.first <= hi; });
        if (clash) continue;
        for (std::size_t s = 0; s < sc.size(); ++s) events.push_back({times[s], sc[s].kind, sensor_for(sc[s].kind, ""), -1});
        taken.emplace_back(times.front(), times.back());
        break;
      }
    }
  }

  ScenarioSpec spec_;
  Rng rng_;
};

}  // namespace

std::vector<GeneratedDay> generate(const ScenarioSpec& spec) { return Generator(spec).run(); }

std::vector<GeneratedDay> inject_sensor_failures(std::vector<GeneratedDay> days, const FailureSpec& spec) {
  Rng rng(spec.seed);
  for (const auto& f : spec.failures) {
    auto day = std::find_if(days.begin(), days.end(), [&](const GeneratedDay& d) { return d.log.day_id == f.day_id; });
    if (day == days.end()) throw ConfigError("sensor failure names unknown subject '" + f.day_id + "'");
    auto& evs = day->log.events;
    bool seen = std::any_of(evs.begin(), evs.end(), [&](const Event& e) { return e.sensor_id == f.sensor_id; });
    if (!seen) throw ConfigError("subject " + f.day_id + " has no sensor '" + f.sensor_id + "'");
    std::set<std::size_t> explicit_drop(f.event_indices.begin(), f.event_indices.end());
    for (auto i : explicit_drop) {
      if (i >= evs.size() || evs[i].sensor_id != f.sensor_id) {
        throw ConfigError("event " + std::to_string(i) + " of " + f.day_id + " is not from sensor " + f.sensor_id);
      }
    }
    std::vector<Event> kept;
    for (std::size_t i = 0; i < evs.size(); ++i) {
      bool drop = false;
      if (evs[i].sensor_id == f.sensor_id) {
        drop = explicit_drop.count(i) > 0;
        if (f.drop_probability) drop = drop || unit(rng) < *f.drop_probability;
      }
      if (!drop) kept.push_back(evs[i]);
    }
    evs = std::move(kept);
  }
  return days;
}

void save_days(const std::vector<GeneratedDay>& days, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& d : days) {
    save_log(d.log, dir / (d.log.day_id + ".log"));
    save_annotation(d.gold, dir / (d.log.day_id + ".ann"));
  }
}

std::vector<GeneratedDay> load_days(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> logs;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".log") logs.push_back(entry.path());
  std::sort(logs.begin(), logs.end());
  std::vector<GeneratedDay> days;
  for (const auto& path : logs) {
    GeneratedDay d;
    d.log = load_log(path);
    auto ann = path;
    ann.replace_extension(".ann");
    if (std::filesystem::exists(ann)) d.gold = load_annotation(ann);
    if (d.log.day_id.empty()) d.log.day_id = path.stem().string();
    if (d.gold.day_id.empty()) d.gold.day_id = d.log.day_id;
    d.group = d.log.day_id.substr(0, d.log.day_id.find('-'));
    days.push_back(std::move(d));
  }
  return days;
}

}  // namespace faber::synth
