#include <cmath>
#include <fstream>
#include <limits>

#include "stlf/cli.hpp"
#include "stlf/error.hpp"

namespace stlf::cli {

using features::ConditionKind;
using features::TemperatureCondition;

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"ingest", "sweep",  "train",      "evaluate",     "step1", "step2",
                                              "step3",  "step4",  "robustness", "cost-benefit", "synth"};
  return names;
}

json default_config() {
  const experiments::SynthSpec s;
  return json{
      {"output_dir", nullptr},
      {"stations", json::array()},
      {"station_meta", nullptr},
      {"calendar", {{"holidays", json::array()}, {"week_start", "monday"}}},
      {"window", {{"n_points", 32}, {"scheme", "eight"}, {"conditions", json::array()}}},
      {"model", {{"cell", "gru"}, {"layers", {64, 64, 64}}, {"dense", {16, 1}}, {"seed", 1}}},
      {"train",
       {{"epochs", 100},
        {"batch_size", 64},
        {"learning_rate", 1e-3},
        {"beta1", 0.9},
        {"beta2", 0.999},
        {"epsilon", 1e-8},
        {"clip_norm", 5.0},
        {"shuffle_seed", 7},
        {"stride", 1},
        {"station", nullptr}}},
      {"split", {{"train", {"15-16", "16-17", "17-18"}}, {"test", {"18-19", "19-20"}}}},
      {"evaluation", {{"exclusion", nullptr}}},
      {"step1", {{"lengths", {4, 8, 16, 24, 32, 48}}, {"cells", {"gru", "lstm"}}}},
      {"step2", {{"schemes", {"none", "three", "eight"}}}},
      {"step3", {{"conditions", "auto"}}},
      {"rotation", {{"presets", true}, {"plans", json::array()}}},
      {"cost_benefit",
       {{"annual_consumption_twh", 44.3},
        {"tariff_per_kwh", 0.298},
        {"significant_figures", 2},
        {"mape_baseline", 3.86},
        {"methods", {{{"name", "three_temps"}, {"mape", 3.42}}, {{"name", "best_correl"}, {"mape", 3.24}}}}}},
      {"synth",
       {{"station_id", s.station_id},
        {"lat", s.lat},
        {"lon", s.lon},
        {"start_year", s.start_year},
        {"seasons", s.seasons},
        {"days", s.days},
        {"base_mw", s.base_mw},
        {"morning_peak_amp", s.morning_peak_amp},
        {"evening_peak_amp", s.evening_peak_amp},
        {"morning_peak_hour", s.morning_peak_hour},
        {"evening_peak_hour", s.evening_peak_hour},
        {"peak_width_hours", s.peak_width_hours},
        {"weekend_factor", s.weekend_factor},
        {"uptick_fraction", s.uptick_fraction},
        {"uptick_variability", s.uptick_variability},
        {"uptick", {{"start", "22:30"}, {"end", "01:30"}}},
        {"temp_mean_c", s.temp_mean_c},
        {"temp_annual_amp_c", s.temp_annual_amp_c},
        {"temp_diurnal_amp_c", s.temp_diurnal_amp_c},
        {"temp_anomaly_sd_c", s.temp_anomaly_sd_c},
        {"temp_anomaly_corr_hours", s.temp_anomaly_corr_hours},
        {"lag_hours", s.lag_hours},
        {"coupling", s.coupling},
        {"noise_sd_mw", s.noise_sd_mw},
        {"seed", s.seed},
        {"stations", json::array()}}},
      {"ingest", {{"grid", nullptr}, {"step_minutes", 30}}},
      {"evaluate", {{"checkpoint", nullptr}, {"station", nullptr}}},
  };
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError((path.empty() ? std::string("config") : path) + ": " + msg);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

bool is_index(const std::string& s) {
  return !s.empty() && s.size() < 10 && s.find_first_not_of("0123456789") == std::string::npos;
}

void merge_into(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string p = join(path, key);
    if (!base.contains(key)) fail(p, "unknown key");
    json& slot = base[key];
    if (slot.is_object() && value.is_object()) {
      merge_into(slot, value, p);
    } else {
      slot = value;
    }
  }
}

void check_known(const json& node, const json& schema, const std::string& path) {
  if (!schema.is_object() || !node.is_object()) return;
  for (const auto& [key, value] : node.items()) {
    const std::string p = join(path, key);
    if (!schema.contains(key)) fail(p, "unknown key");
    check_known(value, schema[key], p);
  }
}

// ---- typed accessors; each names the field it reads

const json& at(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  if (!obj.contains(key)) fail(join(path, key), "missing");
  return obj.at(key);
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(path, "must be finite");
  return d;
}

long long as_integer(const json& v, const std::string& path) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && std::floor(d) == d && std::abs(d) < 9e15) return static_cast<long long>(d);
  }
  fail(path, "expected an integer");
}

int as_int(const json& v, const std::string& path, long long lo, long long hi = std::numeric_limits<int>::max()) {
  const long long x = as_integer(v, path);
  if (x < lo || x > hi) fail(path, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(x);
}

std::uint64_t as_seed(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const long long x = as_integer(v, path);
  if (x < 0) fail(path, "must be >= 0");
  return static_cast<std::uint64_t>(x);
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

const json& as_array(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  return v;
}

template <typename F>
auto wrap(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    fail(path, e.what());
  } catch (const DataError& e) {
    fail(path, e.what());
  }
}

std::optional<fs::path> as_opt_path(const json& v, const std::string& path, const fs::path& base) {
  if (v.is_null()) return std::nullopt;
  const std::string s = as_string(v, path);
  if (s.empty()) fail(path, "must not be empty");
  fs::path p(s);
  return p.is_absolute() ? p : base / p;
}

std::set<features::Season> as_seasons(const json& v, const std::string& path) {
  std::set<features::Season> out;
  const auto& arr = as_array(v, path);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + "." + std::to_string(i);
    const auto s = wrap(p, [&] { return features::parse_season(as_string(arr[i], p)); });
    if (!out.insert(s).second) fail(p, "season " + s.label() + " listed twice");
  }
  return out;
}

experiments::TimeOfDayWindow as_tod_window(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object with start and end");
  check_known(v, json{{"start", 0}, {"end", 0}}, path);
  experiments::TimeOfDayWindow w;
  w.start_minute = wrap(join(path, "start"),
                        [&] { return parse_time_of_day(as_string(at(v, "start", path), join(path, "start"))); });
  w.end_minute =
      wrap(join(path, "end"), [&] { return parse_time_of_day(as_string(at(v, "end", path), join(path, "end"))); });
  return w;
}

ConditionEntry as_condition(const json& v, const std::string& path, bool allow_best) {
  ConditionEntry e;
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "best") {
      if (!allow_best) fail(path, "'best' is not allowed here");
      e.best = true;
      return e;
    }
    const auto at_sign = s.find('@');
    e.condition.kind = wrap(path, [&] { return features::parse_condition_kind(s.substr(0, at_sign)); });
    if (at_sign != std::string::npos) {
      std::string lead = s.substr(at_sign + 1);
      if (!lead.empty() && lead.back() == 'h') lead.pop_back();
      std::size_t used = 0;
      double h = 0.0;
      try {
        h = std::stod(lead, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (lead.empty() || used != lead.size()) fail(path, "bad lead in '" + s + "'");
      e.condition.lead_hours = h;
    }
  } else if (v.is_object()) {
    check_known(v, json{{"kind", 0}, {"lead_hours", 0}}, path);
    const std::string kp = join(path, "kind");
    e.condition.kind = wrap(kp, [&] { return features::parse_condition_kind(as_string(at(v, "kind", path), kp)); });
    if (v.contains("lead_hours")) e.condition.lead_hours = as_number(v.at("lead_hours"), join(path, "lead_hours"));
  } else {
    fail(path, "expected a condition string such as 'instantaneous@5' or an object");
  }
  wrap(path, [&] { e.condition.validate(); });
  return e;
}

std::vector<int> as_sizes(const json& v, const std::string& path) {
  std::vector<int> out;
  const auto& arr = as_array(v, path);
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(as_int(arr[i], path + "." + std::to_string(i), 1, 4096));
  return out;
}

void read_synth_fields(const json& obj, const std::string& path, experiments::SynthSpec& s, bool allow_stations) {
  if (!obj.is_object()) fail(path, "expected an object");
  static const std::vector<std::pair<const char*, double experiments::SynthSpec::*>> reals{
      {"lat", &experiments::SynthSpec::lat},
      {"lon", &experiments::SynthSpec::lon},
      {"base_mw", &experiments::SynthSpec::base_mw},
      {"morning_peak_amp", &experiments::SynthSpec::morning_peak_amp},
      {"evening_peak_amp", &experiments::SynthSpec::evening_peak_amp},
      {"morning_peak_hour", &experiments::SynthSpec::morning_peak_hour},
      {"evening_peak_hour", &experiments::SynthSpec::evening_peak_hour},
      {"peak_width_hours", &experiments::SynthSpec::peak_width_hours},
      {"weekend_factor", &experiments::SynthSpec::weekend_factor},
      {"uptick_fraction", &experiments::SynthSpec::uptick_fraction},
      {"uptick_variability", &experiments::SynthSpec::uptick_variability},
      {"temp_mean_c", &experiments::SynthSpec::temp_mean_c},
      {"temp_annual_amp_c", &experiments::SynthSpec::temp_annual_amp_c},
      {"temp_diurnal_amp_c", &experiments::SynthSpec::temp_diurnal_amp_c},
      {"temp_anomaly_sd_c", &experiments::SynthSpec::temp_anomaly_sd_c},
      {"temp_anomaly_corr_hours", &experiments::SynthSpec::temp_anomaly_corr_hours},
      {"lag_hours", &experiments::SynthSpec::lag_hours},
      {"coupling", &experiments::SynthSpec::coupling},
      {"noise_sd_mw", &experiments::SynthSpec::noise_sd_mw},
  };
  for (const auto& [key, value] : obj.items()) {
    const std::string p = join(path, key);
    bool done = false;
    for (const auto& [name, member] : reals) {
      if (key == name) {
        s.*member = as_number(value, p);
        done = true;
        break;
      }
    }
    if (done) continue;
    if (key == "station_id") {
      s.station_id = as_string(value, p);
      if (s.station_id.empty()) fail(p, "must not be empty");
    } else if (key == "start_year") {
      s.start_year = as_int(value, p, 1900, 2200);
    } else if (key == "seasons") {
      s.seasons = as_int(value, p, 0, 100);
    } else if (key == "days") {
      s.days = as_int(value, p, 0, 36500);
    } else if (key == "seed") {
      s.seed = as_seed(value, p);
    } else if (key == "uptick") {
      s.uptick = as_tod_window(value, p);
    } else if (key == "stations" && allow_stations) {
      // handled by the caller
    } else {
      fail(p, "unknown key");
    }
  }
}

}  // namespace

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key.path=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json* node = &config;
  std::string path;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& part = parts[i];
    if (part.empty()) throw ConfigError("override '" + assignment + "': empty path segment");
    path = join(path, part);
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      if (!is_index(part)) fail(path, "expected an array index");
      const auto idx = static_cast<std::size_t>(std::stoul(part));
      if (idx > node->size()) fail(path, "index past the end of the array");
      if (idx == node->size()) node->push_back(last ? json() : json::object());
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) fail(path, "cannot descend into a non-object value");
      if (!last && !node->contains(part)) (*node)[part] = json::object();
      node = &(*node)[part];
    }
  }
  *node = std::move(value);
}

json resolve_config(const json& user, const std::vector<std::string>& overrides) {
  const json schema = default_config();
  json merged = schema;
  if (!user.is_null()) merge_into(merged, user, "");
  for (const auto& o : overrides) apply_override(merged, o);
  check_known(merged, schema, "");
  return merged;
}

Config parse_config(const json& r, const fs::path& base_dir) {
  Config c;
  c.resolved = r;
  c.base_dir = base_dir;

  c.output_dir = as_opt_path(at(r, "output_dir", ""), "output_dir", base_dir);
  c.station_meta = as_opt_path(at(r, "station_meta", ""), "station_meta", base_dir);

  {
    const auto& arr = as_array(at(r, "stations", ""), "stations");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "stations." + std::to_string(i);
      const json& s = arr[i];
      if (!s.is_object()) fail(p, "expected an object");
      check_known(s, json{{"id", 0}, {"load", 0}, {"temp", 0}, {"lat", 0}, {"lon", 0}, {"factors", 0}}, p);
      StationEntry e;
      e.id = as_string(at(s, "id", p), join(p, "id"));
      if (e.id.empty()) fail(join(p, "id"), "must not be empty");
      if (!ids.insert(e.id).second) fail(join(p, "id"), "duplicate station id '" + e.id + "'");
      if (s.contains("load")) e.load = as_opt_path(s.at("load"), join(p, "load"), base_dir);
      if (s.contains("temp")) e.temp = as_opt_path(s.at("temp"), join(p, "temp"), base_dir);
      if (s.contains("lat") && !s.at("lat").is_null()) e.lat = as_number(s.at("lat"), join(p, "lat"));
      if (s.contains("lon") && !s.at("lon").is_null()) e.lon = as_number(s.at("lon"), join(p, "lon"));
      if (s.contains("factors")) {
        const std::string fp = join(p, "factors");
        if (!s.at("factors").is_object()) fail(fp, "expected an object of name: number");
        for (const auto& [k, v] : s.at("factors").items()) e.factors[k] = as_number(v, join(fp, k));
      }
      c.stations.push_back(std::move(e));
    }
  }

  {
    const json& cal = at(r, "calendar", "");
    const auto& hol = as_array(at(cal, "holidays", "calendar"), "calendar.holidays");
    for (std::size_t i = 0; i < hol.size(); ++i) {
      const std::string p = "calendar.holidays." + std::to_string(i);
      c.calendar.holidays.insert(wrap(p, [&] { return parse_date(as_string(hol[i], p)); }));
    }
    const std::string ws = as_string(at(cal, "week_start", "calendar"), "calendar.week_start");
    if (ws == "monday") {
      c.calendar.week_start = features::WeekStart::Monday;
    } else if (ws == "sunday") {
      c.calendar.week_start = features::WeekStart::Sunday;
    } else {
      fail("calendar.week_start", "expected monday or sunday, got '" + ws + "'");
    }
  }

  {
    const json& w = at(r, "window", "");
    c.n_points = as_int(at(w, "n_points", "window"), "window.n_points", 1, 2016);
    c.scheme = wrap("window.scheme",
                    [&] { return features::parse_scheme(as_string(at(w, "scheme", "window"), "window.scheme")); });
    const auto& conds = as_array(at(w, "conditions", "window"), "window.conditions");
    for (std::size_t i = 0; i < conds.size(); ++i) {
      c.window_conditions.push_back(as_condition(conds[i], "window.conditions." + std::to_string(i), true));
    }
  }

  {
    const json& m = at(r, "model", "");
    c.model.cell =
        wrap("model.cell", [&] { return neural::parse_cell_kind(as_string(at(m, "cell", "model"), "model.cell")); });
    c.model.layer_sizes = as_sizes(at(m, "layers", "model"), "model.layers");
    c.model.dense_sizes = as_sizes(at(m, "dense", "model"), "model.dense");
    c.model.seed = as_seed(at(m, "seed", "model"), "model.seed");
    wrap("model", [&] { c.model.validate(); });
  }

  {
    const json& t = at(r, "train", "");
    c.train.epochs = as_int(at(t, "epochs", "train"), "train.epochs", 1, 1000000);
    c.train.batch_size = as_int(at(t, "batch_size", "train"), "train.batch_size", 1, 1000000);
    c.train.adam.learning_rate = as_number(at(t, "learning_rate", "train"), "train.learning_rate");
    c.train.adam.beta1 = as_number(at(t, "beta1", "train"), "train.beta1");
    c.train.adam.beta2 = as_number(at(t, "beta2", "train"), "train.beta2");
    c.train.adam.epsilon = as_number(at(t, "epsilon", "train"), "train.epsilon");
    c.train.adam.clip_norm = as_number(at(t, "clip_norm", "train"), "train.clip_norm");
    c.train.shuffle_seed = as_seed(at(t, "shuffle_seed", "train"), "train.shuffle_seed");
    c.train_stride = as_int(at(t, "stride", "train"), "train.stride", 1, 1000000);
    const json& st = at(t, "station", "train");
    if (!st.is_null()) c.train_station = as_string(st, "train.station");
    wrap("train", [&] { c.train.validate(); });
  }

  {
    const json& s = at(r, "split", "");
    c.train_seasons = as_seasons(at(s, "train", "split"), "split.train");
    c.test_seasons = as_seasons(at(s, "test", "split"), "split.test");
    if (c.train_seasons.empty()) fail("split.train", "at least one season is required");
    if (c.test_seasons.empty()) fail("split.test", "at least one season is required");
    for (const auto& season : c.train_seasons) {
      if (c.test_seasons.contains(season)) fail("split.test", "season " + season.label() + " is also a training season");
    }
  }

  {
    const json& e = at(at(r, "evaluation", ""), "exclusion", "evaluation");
    if (!e.is_null()) c.exclusion = as_tod_window(e, "evaluation.exclusion");
  }

  {
    const json& s1 = at(r, "step1", "");
    const auto& lens = as_array(at(s1, "lengths", "step1"), "step1.lengths");
    if (lens.empty()) fail("step1.lengths", "must not be empty");
    for (std::size_t i = 0; i < lens.size(); ++i) {
      c.step1_lengths.push_back(as_int(lens[i], "step1.lengths." + std::to_string(i), 1, 2016));
    }
    const auto& cells = as_array(at(s1, "cells", "step1"), "step1.cells");
    if (cells.empty()) fail("step1.cells", "must not be empty");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string p = "step1.cells." + std::to_string(i);
      c.step1_cells.push_back(wrap(p, [&] { return neural::parse_cell_kind(as_string(cells[i], p)); }));
    }
  }

  {
    const auto& schemes = as_array(at(at(r, "step2", ""), "schemes", "step2"), "step2.schemes");
    if (schemes.empty()) fail("step2.schemes", "must not be empty");
    for (std::size_t i = 0; i < schemes.size(); ++i) {
      const std::string p = "step2.schemes." + std::to_string(i);
      c.step2_schemes.push_back(wrap(p, [&] { return features::parse_scheme(as_string(schemes[i], p)); }));
    }
  }

  {
    const json& conds = at(at(r, "step3", ""), "conditions", "step3");
    if (conds.is_string() && conds.get<std::string>() == "auto") {
      c.step3_auto = true;
    } else if (conds.is_array()) {
      c.step3_auto = false;
      for (std::size_t i = 0; i < conds.size(); ++i) {
        c.step3_conditions.push_back(as_condition(conds[i], "step3.conditions." + std::to_string(i), false).condition);
      }
      const auto has = [&](ConditionKind k) {
        for (const auto& x : c.step3_conditions) {
          if (x.kind == k) return true;
        }
        return false;
      };
      if (!has(ConditionKind::None)) fail("step3.conditions", "must include the 'none' baseline");
      if (!has(ConditionKind::Simultaneous)) fail("step3.conditions", "must include the 'simultaneous' baseline");
    } else {
      fail("step3.conditions", "expected \"auto\" or an array of conditions");
    }
  }

  {
    const json& rot = at(r, "rotation", "");
    if (as_bool(at(rot, "presets", "rotation"), "rotation.presets")) c.rotation_plans = experiments::rotation_presets();
    const auto& plans = as_array(at(rot, "plans", "rotation"), "rotation.plans");
    for (std::size_t i = 0; i < plans.size(); ++i) {
      const std::string p = "rotation.plans." + std::to_string(i);
      const json& pl = plans[i];
      if (!pl.is_object()) fail(p, "expected an object");
      check_known(pl, json{{"name", 0}, {"train", 0}, {"test", 0}}, p);
      experiments::RotationPlan plan;
      plan.name = as_string(at(pl, "name", p), join(p, "name"));
      plan.train = as_seasons(at(pl, "train", p), join(p, "train"));
      plan.test = as_seasons(at(pl, "test", p), join(p, "test"));
      wrap(p, [&] { plan.validate(); });
      c.rotation_plans.push_back(std::move(plan));
    }
    std::set<std::string> names;
    for (const auto& plan : c.rotation_plans) {
      if (!names.insert(plan.name).second) fail("rotation.plans", "duplicate plan name '" + plan.name + "'");
    }
  }

  {
    const json& cb = at(r, "cost_benefit", "");
    c.cb_annual_twh = as_number(at(cb, "annual_consumption_twh", "cost_benefit"), "cost_benefit.annual_consumption_twh");
    c.cb_tariff = as_number(at(cb, "tariff_per_kwh", "cost_benefit"), "cost_benefit.tariff_per_kwh");
    c.cb_baseline = as_number(at(cb, "mape_baseline", "cost_benefit"), "cost_benefit.mape_baseline");
    if (c.cb_annual_twh < 0) fail("cost_benefit.annual_consumption_twh", "must be >= 0");
    if (c.cb_tariff < 0) fail("cost_benefit.tariff_per_kwh", "must be >= 0");
    const json& sf = at(cb, "significant_figures", "cost_benefit");
    if (!sf.is_null()) c.cb_significant_figures = as_int(sf, "cost_benefit.significant_figures", 1, 15);
    const auto& methods = as_array(at(cb, "methods", "cost_benefit"), "cost_benefit.methods");
    for (std::size_t i = 0; i < methods.size(); ++i) {
      const std::string p = "cost_benefit.methods." + std::to_string(i);
      if (!methods[i].is_object()) fail(p, "expected an object with name and mape");
      check_known(methods[i], json{{"name", 0}, {"mape", 0}}, p);
      CostBenefitMethod m{as_string(at(methods[i], "name", p), join(p, "name")),
                          as_number(at(methods[i], "mape", p), join(p, "mape"))};
      if (m.mape < 0) fail(join(p, "mape"), "must be >= 0");
      if (m.mape > c.cb_baseline) fail(join(p, "mape"), "exceeds mape_baseline (negative reduction)");
      c.cb_methods.push_back(std::move(m));
    }
  }

  {
    const json& sy = at(r, "synth", "");
    experiments::SynthSpec base;
    read_synth_fields(sy, "synth", base, true);
    base.holidays = c.calendar.holidays;
    wrap("synth", [&] { base.validate(); });
    const auto& st = as_array(at(sy, "stations", "synth"), "synth.stations");
    std::set<std::string> ids;
    if (st.empty()) {
      c.synth_stations.push_back(base);
    } else {
      for (std::size_t i = 0; i < st.size(); ++i) {
        const std::string p = "synth.stations." + std::to_string(i);
        experiments::SynthSpec s = base;
        read_synth_fields(st[i], p, s, false);
        if (!st[i].contains("station_id")) s.station_id = base.station_id + "-" + std::to_string(i + 1);
        wrap(p, [&] { s.validate(); });
        if (!ids.insert(s.station_id).second) fail(join(p, "station_id"), "duplicate id '" + s.station_id + "'");
        c.synth_stations.push_back(std::move(s));
      }
    }
  }

  {
    const json& in = at(r, "ingest", "");
    c.ingest_grid = as_opt_path(at(in, "grid", "ingest"), "ingest.grid", base_dir);
    c.ingest_step_minutes = as_int(at(in, "step_minutes", "ingest"), "ingest.step_minutes", 1, 1440);
    if (c.ingest_step_minutes != kStepMinutes) {
      fail("ingest.step_minutes", "only " + std::to_string(kStepMinutes) + " is supported by the window builder");
    }
  }

  {
    const json& ev = at(r, "evaluate", "");
    c.evaluate_checkpoint = as_opt_path(at(ev, "checkpoint", "evaluate"), "evaluate.checkpoint", base_dir);
    const json& st = at(ev, "station", "evaluate");
    if (!st.is_null()) c.evaluate_station = as_string(st, "evaluate.station");
  }
  return c;
}

Config load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  json user;
  try {
    user = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(resolve_config(user, overrides), path.parent_path());
}

}  // namespace stlf::cli
