#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "stlf/cli.hpp"
#include "stlf/error.hpp"
#include "stlf/ingest.hpp"
#include "stlf/stats.hpp"

namespace stlf::cli {

using experiments::RunResult;
using experiments::StationData;
using features::ConditionKind;
using features::TemperatureCondition;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string hhmm(int minutes) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d", minutes / 60, minutes % 60);
  return buf;
}

std::string file_label(const std::string& label) {
  std::string out;
  for (char ch : label) {
    if (ch == '@') {
      out += '_';
    } else if (ch == '.') {
      out += 'p';
    } else if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_') {
      out += ch;
    } else {
      out += '_';
    }
  }
  return out;
}

class Csv {
 public:
  Csv(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw std::runtime_error("write failed: " + path_.string());
  }

 private:
  std::ofstream out_;
  fs::path path_;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

template <typename Writer>
void write_stream(const fs::path& path, Writer&& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  w(out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

json window_json(const features::WindowSpec& w) {
  json conds = json::array();
  for (const auto& c : w.conditions) conds.push_back(c.label());
  return {{"n_points", w.n_points}, {"scheme", features::to_string(w.scheme)}, {"conditions", conds}};
}

json metrics_json(const experiments::MetricsReport& m) {
  json prof_pct = json::array();
  json prof_mw = json::array();
  for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
    prof_pct.push_back(m.half_hourly_mean_abs_error[s] ? json(*m.half_hourly_mean_abs_error[s]) : json());
    prof_mw.push_back(m.half_hourly_mean_abs_error_mw[s] ? json(*m.half_hourly_mean_abs_error_mw[s]) : json());
  }
  return {{"count", m.count},
          {"mse", m.mse},
          {"mape", m.mape},
          {"daily_error_variance_mw2", m.daily_error_variance},
          {"daily_error_variance_pct2", m.daily_error_variance_pct},
          {"half_hourly_mean_abs_error_pct", prof_pct},
          {"half_hourly_mean_abs_error_mw", prof_mw}};
}

json run_json(const RunResult& r) {
  return {{"label", r.label},
          {"window", window_json(r.window)},
          {"model_seed", r.model_seed},
          {"shuffle_seed", r.shuffle_seed},
          {"loss_trace", r.model.loss_trace},
          {"metrics", metrics_json(r.metrics)}};
}

const std::vector<std::string> kMetricHeader{"mse", "mape", "sigma2_mw2", "sigma2_pct2", "count"};

std::vector<std::string> metric_cells(const experiments::MetricsReport& m) {
  return {num(m.mse), num(m.mape), num(m.daily_error_variance), num(m.daily_error_variance_pct),
          std::to_string(m.count)};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void profile_rows(Csv& csv, const std::vector<std::string>& prefix, const experiments::MetricsReport& m) {
  for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
    csv.row(concat(prefix, {std::to_string(s), hhmm(static_cast<int>(s) * kStepMinutes),
                            num(m.half_hourly_mean_abs_error[s]), num(m.half_hourly_mean_abs_error_mw[s])}));
  }
}

const std::vector<std::string> kProfileTail{"slot", "time", "mean_abs_error_pct", "mean_abs_error_mw"};

struct Context {
  const Config& cfg;
  fs::path dir;
  std::ostream& log;
};

void require_file(const std::optional<fs::path>& p, const std::string& field) {
  if (!p) throw ConfigError(field + ": required by this command");
  if (!fs::is_regular_file(*p)) throw ConfigError(field + ": file not found: " + p->string());
}

template <typename F>
auto with_context(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const DataError& e) {
    throw DataError(what + ": " + e.what());
  }
}

std::vector<ingest::StationMeta> meta_rows(const Config& cfg) {
  if (!cfg.station_meta) return {};
  require_file(cfg.station_meta, "station_meta");
  return with_context("station_meta", [&] { return ingest::parse_station_meta(*cfg.station_meta); });
}

ingest::StationMeta station_meta(const Config& cfg, std::size_t i, const std::vector<ingest::StationMeta>& rows) {
  const StationEntry& e = cfg.stations[i];
  ingest::StationMeta m;
  m.station_id = e.id;
  for (const auto& r : rows) {
    if (r.station_id == e.id) m = r;
  }
  if (e.lat) m.lat = *e.lat;
  if (e.lon) m.lon = *e.lon;
  for (const auto& [k, v] : e.factors) m.region_factors[k] = v;
  return m;
}

StationData load_station(const Config& cfg, std::size_t i, const std::vector<ingest::StationMeta>& rows) {
  const StationEntry& e = cfg.stations[i];
  const std::string p = "stations." + std::to_string(i);
  require_file(e.load, p + ".load");
  require_file(e.temp, p + ".temp");
  StationData d;
  d.meta = station_meta(cfg, i, rows);
  auto load = with_context(p + ".load (" + e.load->string() + ")", [&] { return ingest::parse_load_csv(*e.load, e.id); });
  auto temp = with_context(p + ".temp (" + e.temp->string() + ")",
                           [&] { return ingest::parse_temp_csv(*e.temp, {d.meta.lat, d.meta.lon}); });
  std::tie(d.load, d.temp) = with_context("station " + e.id, [&] { return ingest::align_series(load, temp); });
  return d;
}

std::size_t station_index(const Config& cfg, const std::optional<std::string>& id, const std::string& field) {
  if (cfg.stations.empty()) throw ConfigError("stations: at least one station is required");
  if (!id) return 0;
  for (std::size_t i = 0; i < cfg.stations.size(); ++i) {
    if (cfg.stations[i].id == *id) return i;
  }
  throw ConfigError(field + ": no station with id '" + *id + "'");
}

experiments::ExperimentSettings base_settings(const Config& cfg) {
  experiments::ExperimentSettings s;
  s.calendar = cfg.calendar;
  s.window.n_points = cfg.n_points;
  s.window.scheme = cfg.scheme;
  s.model = cfg.model;
  s.train = cfg.train;
  s.train_seasons = cfg.train_seasons;
  s.test_seasons = cfg.test_seasons;
  s.train_stride = cfg.train_stride;
  s.exclusion = cfg.exclusion;
  return s;
}

/// Window conditions with any `best` entry replaced by the station's best-rho condition.
features::WindowSpec resolve_window(const Config& cfg, const StationData& data, std::ostream& log) {
  features::WindowSpec w;
  w.n_points = cfg.n_points;
  w.scheme = cfg.scheme;
  std::vector<TemperatureCondition> conds;
  for (const auto& e : cfg.window_conditions) {
    if (e.best) {
      const auto sweep = experiments::sweep_station(data);
      conds.push_back(sweep.best.best_rho_condition());
      log << "  best-rho condition for " << data.load.station_id << ": " << conds.back().label() << '\n';
    } else {
      conds.push_back(e.condition);
    }
  }
  w.conditions = features::dedupe_conditions(conds);
  return w;
}

json best_json(const stats::BestConditions& b) {
  json out = json::object();
  for (const auto* k : {&b.instantaneous, &b.max, &b.mean}) {
    out[features::to_string(k->kind)] = {{"best_rho_lead_hours", k->best_rho_lead},
                                         {"best_rho", k->best_rho_value},
                                         {"best_r2o2_lead_hours", k->best_r2o2_lead},
                                         {"best_r2o2", k->best_r2o2_value}};
  }
  return out;
}

json labels(const std::vector<TemperatureCondition>& conds) {
  json out = json::array();
  for (const auto& c : conds) out.push_back(c.label());
  return out;
}

// ---------------------------------------------------------------------------

json cmd_synth(Context& ctx) {
  json stations = json::array();
  json results = json::array();
  for (const auto& spec : ctx.cfg.synth_stations) {
    ctx.log << "synth: generating " << spec.station_id << '\n';
    const auto out = experiments::synth_generate(spec);
    const std::string load_name = spec.station_id + "_load.csv";
    const std::string temp_name = spec.station_id + "_temp.csv";
    write_stream(ctx.dir / load_name, [&](std::ostream& o) { ingest::write_load_csv(o, out.load); });
    write_stream(ctx.dir / temp_name, [&](std::ostream& o) { ingest::write_temp_csv(o, out.temp); });
    const auto& t = out.truth;
    const json truth{{"station_id", spec.station_id},
                     {"lag_hours", t.lag_hours},
                     {"expected_leads", {{"instantaneous", t.expected_leads[0]},
                                         {"max", t.expected_leads[1]},
                                         {"mean", t.expected_leads[2]}}},
                     {"group", stats::to_string(t.group)},
                     {"uptick", {{"start", hhmm(t.uptick.start_minute)}, {"end", hhmm(t.uptick.end_minute)}}},
                     {"snr", t.snr ? json(*t.snr) : json()},
                     {"seed", t.seed},
                     {"points", out.load.points.size()}};
    write_json(ctx.dir / (spec.station_id + "_truth.json"), truth);
    stations.push_back(
        {{"id", spec.station_id}, {"load", load_name}, {"temp", temp_name}, {"lat", spec.lat}, {"lon", spec.lon}});
    results.push_back(truth);
  }
  write_json(ctx.dir / "stations.json", {{"stations", stations}});
  return {{"stations", results}};
}

json cmd_ingest(Context& ctx) {
  const Config& cfg = ctx.cfg;
  if (cfg.stations.empty()) throw ConfigError("stations: at least one station is required");
  std::optional<ingest::TempGrid> grid;
  if (cfg.ingest_grid) {
    require_file(cfg.ingest_grid, "ingest.grid");
    ctx.log << "ingest: reading grid " << cfg.ingest_grid->string() << '\n';
    const auto raw = with_context("ingest.grid", [&] { return ingest::parse_temp_grid(*cfg.ingest_grid); });
    grid = with_context("ingest.grid", [&] { return ingest::interpolate_temporal(raw, cfg.ingest_step_minutes); });
  }
  const auto meta = meta_rows(cfg);
  json stations = json::array();
  json results = json::array();
  for (std::size_t i = 0; i < cfg.stations.size(); ++i) {
    const StationEntry& e = cfg.stations[i];
    const std::string p = "stations." + std::to_string(i);
    require_file(e.load, p + ".load");
    const auto m = station_meta(cfg, i, meta);
    auto load = with_context(p + ".load", [&] { return ingest::parse_load_csv(*e.load, e.id); });
    ingest::TempSeries temp;
    if (grid) {
      if (!e.lat && m.lat == 0.0 && m.lon == 0.0) throw ConfigError(p + ".lat: required to sample the grid");
      temp = with_context("station " + e.id, [&] { return ingest::extract_point_series(*grid, m.lat, m.lon); });
    } else if (e.temp) {
      require_file(e.temp, p + ".temp");
      temp = with_context(p + ".temp", [&] { return ingest::parse_temp_csv(*e.temp, {m.lat, m.lon}); });
    } else {
      throw ConfigError(p + ".temp: required when ingest.grid is not set");
    }
    auto [al, at] = with_context("station " + e.id, [&] { return ingest::align_series(load, temp); });
    ctx.log << "ingest: " << e.id << " " << al.points.size() << " aligned points, " << al.gaps.size() << " gaps\n";
    const std::string load_name = e.id + "_load.csv";
    const std::string temp_name = e.id + "_temp.csv";
    write_stream(ctx.dir / load_name, [&](std::ostream& o) { ingest::write_load_csv(o, al); });
    write_stream(ctx.dir / temp_name, [&](std::ostream& o) { ingest::write_temp_csv(o, at); });
    Csv gaps(ctx.dir / (e.id + "_gaps.csv"), {"timestamp"});
    for (const auto& g : al.gaps) gaps.row({format_instant(g)});
    json s{{"id", e.id}, {"load", load_name}, {"temp", temp_name}, {"lat", m.lat}, {"lon", m.lon}};
    if (!m.region_factors.empty()) s["factors"] = m.region_factors;
    stations.push_back(s);
    results.push_back({{"id", e.id},
                       {"points", al.points.size()},
                       {"gaps", al.gaps.size()},
                       {"first", al.points.empty() ? json() : json(format_instant(al.points.front().time))},
                       {"last", al.points.empty() ? json() : json(format_instant(al.points.back().time))}});
  }
  write_json(ctx.dir / "stations.json", {{"stations", stations}});
  return {{"stations", results}};
}

json cmd_sweep(Context& ctx) {
  const Config& cfg = ctx.cfg;
  if (cfg.stations.empty()) throw ConfigError("stations: at least one station is required");
  const auto meta = meta_rows(cfg);
  json results = json::array();
  for (std::size_t i = 0; i < cfg.stations.size(); ++i) {
    const auto data = load_station(cfg, i, meta);
    const std::string& id = cfg.stations[i].id;
    ctx.log << "sweep: " << id << '\n';
    const auto set = with_context("station " + id, [&] { return experiments::sweep_station(data); });
    json files = json::array();
    for (const auto& sw : set.sweeps) {
      const std::string name = id + "_sweep_" + features::to_string(sw.kind) + ".csv";
      Csv csv(ctx.dir / name, {"lead_hours", "rho", "r2o1", "r2o2"});
      for (const auto& r : sw.records) csv.row({num(r.lead_hours), num(r.rho), num(r.r2_order1), num(r.r2_order2)});
      files.push_back(name);
    }
    results.push_back({{"id", id},
                       {"sample_count", set.sweeps.front().sample_count},
                       {"best", best_json(set.best)},
                       {"best_rho_condition", set.best.best_rho_condition().label()},
                       {"group", stats::to_string(set.group)},
                       {"panel", labels(set.best.panel())},
                       {"files", files}});
  }
  return {{"stations", results}};
}

json cmd_train(Context& ctx) {
  const Config& cfg = ctx.cfg;
  const std::size_t i = station_index(cfg, cfg.train_station, "train.station");
  const auto data = load_station(cfg, i, meta_rows(cfg));
  const auto settings = base_settings(cfg);
  const auto window = resolve_window(cfg, data, ctx.log);
  auto split = with_context("station " + cfg.stations[i].id,
                            [&] { return experiments::prepare_split(data, settings, window); });
  ctx.log << "train: " << split.train.windows.size() << " training windows\n";
  neural::ModelConfig mc = cfg.model;
  mc.input_dim = window.rows();
  auto model = neural::train(split.train, cfg.train, mc);
  model.window = window;
  neural::save_checkpoint(ctx.dir / "model.ckpt", model);
  Csv loss(ctx.dir / "loss.csv", {"epoch", "loss"});
  for (std::size_t e = 0; e < model.loss_trace.size(); ++e) loss.row({std::to_string(e + 1), num(model.loss_trace[e])});
  return {{"station", cfg.stations[i].id},
          {"window", window_json(window)},
          {"train_windows", split.train.windows.size()},
          {"test_windows", split.test.windows.size()},
          {"final_loss", model.loss_trace.back()},
          {"checkpoint", "model.ckpt"}};
}

json cmd_evaluate(Context& ctx) {
  const Config& cfg = ctx.cfg;
  require_file(cfg.evaluate_checkpoint, "evaluate.checkpoint");
  const auto model =
      with_context("evaluate.checkpoint", [&] { return neural::load_checkpoint(*cfg.evaluate_checkpoint); });
  if (!model.window) throw DataError("evaluate.checkpoint: checkpoint carries no window spec");
  const std::size_t i = station_index(cfg, cfg.evaluate_station, "evaluate.station");
  const auto data = load_station(cfg, i, meta_rows(cfg));
  const features::WindowBuilder builder(data.load, data.temp, *model.window, cfg.calendar);
  const auto test = with_context("station " + cfg.stations[i].id, [&] {
    return features::make_split(builder, cfg.test_seasons, model.scaler, features::SplitTag::Test);
  });
  const auto pred = neural::predict(model, test);
  std::vector<Instant> times;
  for (const auto& w : test.windows) times.push_back(w.target_time);
  const auto all = experiments::evaluate(test.targets_mw, pred, times);
  ctx.log << "evaluate: MAPE " << num(all.mape) << "% over " << all.count << " points\n";

  Csv preds(ctx.dir / "predictions.csv", {"timestamp", "actual_mw", "predicted_mw"});
  for (std::size_t k = 0; k < pred.size(); ++k) preds.row({format_instant(times[k]), num(test.targets_mw[k]), num(pred[k])});
  Csv prof(ctx.dir / "profile.csv", concat({"variant"}, kProfileTail));
  profile_rows(prof, {"all"}, all);
  json out{{"station", cfg.stations[i].id}, {"window", window_json(*model.window)}, {"all", metrics_json(all)}};
  Csv summary(ctx.dir / "metrics.csv", concat({"variant"}, kMetricHeader));
  summary.row(concat({"all"}, metric_cells(all)));
  if (cfg.exclusion) {
    const auto ex = experiments::evaluate(test.targets_mw, pred, times, cfg.exclusion);
    ctx.log << "evaluate: MAPE " << num(ex.mape) << "% with " << hhmm(cfg.exclusion->start_minute) << "-"
            << hhmm(cfg.exclusion->end_minute) << " excluded\n";
    profile_rows(prof, {"excluded"}, ex);
    summary.row(concat({"excluded"}, metric_cells(ex)));
    out["excluded"] = metrics_json(ex);
    out["exclusion"] = {{"start", hhmm(cfg.exclusion->start_minute)}, {"end", hhmm(cfg.exclusion->end_minute)}};
  }
  return out;
}

json cmd_step1(Context& ctx) {
  const Config& cfg = ctx.cfg;
  const std::size_t i = station_index(cfg, cfg.train_station, "train.station");
  const auto data = load_station(cfg, i, meta_rows(cfg));
  auto settings = base_settings(cfg);
  settings.window = resolve_window(cfg, data, ctx.log);
  ctx.log << "step1: " << cfg.step1_lengths.size() * cfg.step1_cells.size() << " models\n";
  const auto rep = experiments::step1_input_length_sweep(data, settings, cfg.step1_lengths, cfg.step1_cells);
  Csv csv(ctx.dir / "step1.csv", concat({"cell", "n_points", "hours"}, kMetricHeader));
  json rows = json::array();
  for (const auto& r : rep.rows) {
    csv.row(concat({neural::to_string(r.cell), std::to_string(r.n_points), num(r.n_points * 0.5)},
                   metric_cells(r.run.metrics)));
    rows.push_back(run_json(r.run));
  }
  json plateau = json::object();
  for (const auto& [cell, n] : rep.plateau_length) plateau[neural::to_string(cell)] = n;
  return {{"station", cfg.stations[i].id}, {"rows", rows}, {"plateau_length", plateau}};
}

json cmd_step2(Context& ctx) {
  const Config& cfg = ctx.cfg;
  const std::size_t i = station_index(cfg, cfg.train_station, "train.station");
  const auto data = load_station(cfg, i, meta_rows(cfg));
  auto settings = base_settings(cfg);
  settings.window = resolve_window(cfg, data, ctx.log);
  ctx.log << "step2: " << cfg.step2_schemes.size() << " models\n";
  const auto rep = experiments::step2_calendar_comparison(data, settings, cfg.step2_schemes);
  Csv csv(ctx.dir / "step2.csv", concat({"scheme"}, kMetricHeader));
  Csv kde(ctx.dir / "step2_kde.csv", {"scheme", "error_mw", "density", "cumulative"});
  Csv prof(ctx.dir / "step2_profile.csv", concat({"scheme"}, kProfileTail));
  json rows = json::array();
  for (const auto& r : rep.rows) {
    const std::string name = features::to_string(r.scheme);
    csv.row(concat({name}, metric_cells(r.run.metrics)));
    for (std::size_t k = 0; k < r.error_kde.grid.size(); ++k) {
      kde.row({name, num(r.error_kde.grid[k]), num(r.error_kde.density[k]), num(r.error_kde.cumulative[k])});
    }
    profile_rows(prof, {name}, r.run.metrics);
    json j = run_json(r.run);
    j["kde_bandwidth"] = r.error_kde.bandwidth;
    rows.push_back(j);
  }
  return {{"station", cfg.stations[i].id}, {"rows", rows}};
}

json cmd_step3(Context& ctx) {
  const Config& cfg = ctx.cfg;
  const std::size_t i = station_index(cfg, cfg.train_station, "train.station");
  const auto data = load_station(cfg, i, meta_rows(cfg));
  auto settings = base_settings(cfg);
  json out{{"station", cfg.stations[i].id}};
  std::vector<TemperatureCondition> conds = cfg.step3_conditions;
  if (cfg.step3_auto) {
    const auto sweep = with_context("station " + cfg.stations[i].id, [&] { return experiments::sweep_station(data); });
    conds = experiments::step3_panel(sweep.best);
    out["best"] = best_json(sweep.best);
    out["best_rho_condition"] = sweep.best.best_rho_condition().label();
    out["group"] = stats::to_string(sweep.group);
  }
  ctx.log << "step3: " << conds.size() << " models\n";
  const auto rep = experiments::step3_temperature_conditions(data, settings, conds);
  fs::create_directory(ctx.dir / "models");
  Csv csv(ctx.dir / "step3.csv", concat({"condition", "kind", "lead_hours"}, kMetricHeader));
  Csv prof(ctx.dir / "step3_profile.csv", concat({"condition"}, kProfileTail));
  json rows = json::array();
  std::size_t best = 0;
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const auto& r = rep.rows[k];
    const std::string label = r.condition.label();
    csv.row(concat({label, features::to_string(r.condition.kind), num(r.condition.lead_hours)},
                   metric_cells(r.run.metrics)));
    profile_rows(prof, {label}, r.run.metrics);
    const std::string ckpt = "models/" + file_label(label) + ".ckpt";
    neural::save_checkpoint(ctx.dir / ckpt, r.run.model);
    json j = run_json(r.run);
    j["checkpoint"] = ckpt;
    rows.push_back(j);
    if (r.run.metrics.mape < rep.rows[best].run.metrics.mape) best = k;
  }
  out["rows"] = rows;
  out["lowest_mape"] = {{"condition", rep.rows[best].condition.label()},
                        {"mape", rep.rows[best].run.metrics.mape},
                        {"checkpoint", rows[best]["checkpoint"]}};
  return out;
}

json cmd_step4(Context& ctx) {
  const Config& cfg = ctx.cfg;
  if (cfg.stations.empty()) throw ConfigError("stations: at least one station is required");
  const auto meta = meta_rows(cfg);
  std::vector<StationData> stations;
  for (std::size_t i = 0; i < cfg.stations.size(); ++i) stations.push_back(load_station(cfg, i, meta));
  ctx.log << "step4: " << stations.size() << " stations, up to " << 3 * stations.size() << " models\n";
  auto rep = experiments::step4_generalise(stations, base_settings(cfg));

  std::vector<std::string> t2{"station"};
  for (const char* cond : experiments::kStep4Conditions) {
    for (const char* m : {"sigma2", "mse", "mape"}) t2.push_back(std::string(m) + "_" + cond);
  }
  Csv table2(ctx.dir / "table2.csv", t2);
  Csv st_csv(ctx.dir / "step4_stations.csv", {"station", "group", "instantaneous_lead", "max_lead", "mean_lead",
                                              "best_condition", "combination", "combination_collapsed"});
  Csv prof(ctx.dir / "step4_profile.csv", concat({"station", "condition"}, kProfileTail));
  Csv disp(ctx.dir / "dispersion.csv", {"station", "load_sigma2", "load_cqv", "temp_sigma2", "temp_cqv"});
  json rows = json::array();
  for (const auto& st : rep.stations) {
    std::vector<std::string> cells{st.station_id};
    for (const auto& r : st.runs) {
      cells.push_back(num(r.metrics.daily_error_variance));
      cells.push_back(num(r.metrics.mse));
      cells.push_back(num(r.metrics.mape));
    }
    table2.row(cells);
    std::string combo;
    for (const auto& c : st.combination) combo += (combo.empty() ? "" : "+") + c.label();
    const auto& b = st.sweep.best;
    st_csv.row({st.station_id, stats::to_string(st.sweep.group), num(b.instantaneous.best_rho_lead),
                num(b.max.best_rho_lead), num(b.mean.best_rho_lead), st.best_condition.label(), combo,
                st.combination_collapsed ? "true" : "false"});
    for (const auto& r : st.runs) profile_rows(prof, {st.station_id, r.label}, r.metrics);
    disp.row({st.station_id, num(st.load_dispersion.sigma2), num(st.load_dispersion.cqv),
              num(st.temp_dispersion.sigma2), num(st.temp_dispersion.cqv)});
    json runs = json::array();
    for (const auto& r : st.runs) runs.push_back(run_json(r));
    rows.push_back({{"station", st.station_id},
                    {"group", stats::to_string(st.sweep.group)},
                    {"best", best_json(b)},
                    {"best_condition", st.best_condition.label()},
                    {"combination", labels(st.combination)},
                    {"combination_collapsed", st.combination_collapsed},
                    {"load_dispersion", {{"sigma2", st.load_dispersion.sigma2},
                                         {"cqv", st.load_dispersion.cqv ? json(*st.load_dispersion.cqv) : json()}}},
                    {"temp_dispersion", {{"sigma2", st.temp_dispersion.sigma2},
                                         {"cqv", st.temp_dispersion.cqv ? json(*st.temp_dispersion.cqv) : json()}}},
                    {"region_factors", st.region_factors},
                    {"runs", runs}});
  }

  // weekday/weekend means and percentile bands of load and temperature per slot
  Csv daily(ctx.dir / "daily_profiles.csv",
            {"station", "series", "slot", "time", "mean_weekday", "mean_weekend", "p5", "p25", "p50", "p75", "p95"});
  for (const auto& data : stations) {
    const std::string& id = data.load.station_id;
    std::vector<Instant> lt, tt;
    std::vector<double> lv, tv;
    for (const auto& p : data.load.points) {
      lt.push_back(p.time);
      lv.push_back(p.load_mw);
    }
    for (const auto& p : data.temp.points) {
      tt.push_back(p.time);
      tv.push_back(p.temp_c);
    }
    for (const auto& [series, times, values] :
         {std::tuple{"load", &lt, &lv}, std::tuple{"temp", &tt, &tv}}) {
      try {
        const auto prof_d = stats::daily_profile(*times, *values, cfg.calendar);
        for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
          const auto& x = prof_d.slots[s];
          daily.row({id, series, std::to_string(s), hhmm(static_cast<int>(s) * kStepMinutes), num(x.mean_weekday),
                     num(x.mean_weekend), num(x.p5), num(x.p25), num(x.p50), num(x.p75), num(x.p95)});
        }
      } catch (const DataError& e) {
        rep.notices.push_back("station " + id + " " + series + " profile skipped: " + e.what());
      }
    }
  }

  Csv factors(ctx.dir / "factors.csv", {"factor", "stations", "rho_vs_best_correl_mape"});
  json fj = json::array();
  for (const auto& f : rep.factor_correlations) {
    factors.row({f.factor, std::to_string(f.stations), num(f.rho)});
    fj.push_back({{"factor", f.factor}, {"stations", f.stations}, {"rho", f.rho}});
  }
  for (const auto& n : rep.notices) ctx.log << "step4: " << n << '\n';
  return {{"stations", rows}, {"factor_correlations", fj}, {"notices", rep.notices}};
}

json cmd_robustness(Context& ctx) {
  const Config& cfg = ctx.cfg;
  if (cfg.rotation_plans.empty()) throw ConfigError("rotation: no plans (enable presets or add plans)");
  const std::size_t i = station_index(cfg, cfg.train_station, "train.station");
  const auto data = load_station(cfg, i, meta_rows(cfg));
  auto settings = base_settings(cfg);
  settings.window = resolve_window(cfg, data, ctx.log);
  ctx.log << "robustness: " << cfg.rotation_plans.size() << " plans\n";
  const auto rep = experiments::rotation_robustness(data, settings, cfg.rotation_plans);
  auto seasons = [](const std::set<features::Season>& s) {
    std::string out;
    for (const auto& x : s) out += (out.empty() ? "" : " ") + x.label();
    return out;
  };
  Csv csv(ctx.dir / "robustness.csv", concat({"plan", "train", "test"}, kMetricHeader));
  json rows = json::array();
  for (const auto& r : rep.rows) {
    csv.row(concat({r.plan.name, seasons(r.plan.train), seasons(r.plan.test)}, metric_cells(r.run.metrics)));
    json j = run_json(r.run);
    j["train"] = seasons(r.plan.train);
    j["test"] = seasons(r.plan.test);
    rows.push_back(j);
  }
  return {{"station", cfg.stations[i].id}, {"rows", rows}, {"relative_mape_spread", rep.relative_mape_spread}};
}

json cmd_cost_benefit(Context& ctx) {
  const Config& cfg = ctx.cfg;
  if (cfg.cb_methods.empty()) throw ConfigError("cost_benefit.methods: at least one method is required");
  Csv csv(ctx.dir / "cost_benefit.csv",
          {"method", "mape_baseline", "mape_method", "energy_reduction_twh", "saving", "saving_millions"});
  json rows = json::array();
  for (const auto& m : cfg.cb_methods) {
    experiments::CostBenefitInput in{cfg.cb_annual_twh, cfg.cb_baseline, m.mape, cfg.cb_tariff,
                                     cfg.cb_significant_figures};
    const auto r = experiments::cost_benefit(in);
    csv.row({m.name, num(in.mape_baseline), num(in.mape_method), num(r.energy_reduction_twh), num(r.saving),
             num(r.saving / 1e6)});
    ctx.log << "cost-benefit: " << m.name << " saves " << num(r.saving / 1e6) << " million per year\n";
    rows.push_back({{"method", m.name},
                    {"mape_method", m.mape},
                    {"energy_reduction_twh", r.energy_reduction_twh},
                    {"saving", r.saving}});
  }
  return {{"rows", rows}};
}

fs::path fresh_directory(const fs::path& root, const std::string& command) {
  fs::create_directories(root);
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  const std::string base = command + "-" + stamp;
  for (int n = 1;; ++n) {
    const fs::path p = fs::absolute(root / (n == 1 ? base : base + "-" + std::to_string(n)));
    if (fs::create_directory(p)) return p;
  }
}

fs::path output_root(const Config& cfg, const RunOptions& options) {
  if (options.output_root) return *options.output_root;
  if (cfg.output_dir) return *cfg.output_dir;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "stlf-output";
}

}  // namespace

RunOutcome run(const std::string& command, const std::optional<fs::path>& config_path,
               const std::vector<std::string>& overrides, const RunOptions& options) {
  std::ostream& log = options.log ? *options.log : std::cerr;
  RunOutcome outcome;
  fs::path dir;
  auto finish = [&](int code, const std::string& msg) {
    outcome.exit_code = code;
    outcome.message = msg;
    log << "error: " << msg << '\n';
    if (!dir.empty()) {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
    outcome.output_dir.clear();
    return outcome;
  };
  try {
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), command) == names.end()) {
      return finish(2, "unknown command '" + command + "'");
    }
    const Config cfg = config_path ? load_config(*config_path, overrides)
                                   : parse_config(resolve_config(json(), overrides), fs::current_path());
    dir = fresh_directory(output_root(cfg, options), command);
    Context ctx{cfg, dir, log};
    json results;
    if (command == "synth") results = cmd_synth(ctx);
    else if (command == "ingest") results = cmd_ingest(ctx);
    else if (command == "sweep") results = cmd_sweep(ctx);
    else if (command == "train") results = cmd_train(ctx);
    else if (command == "evaluate") results = cmd_evaluate(ctx);
    else if (command == "step1") results = cmd_step1(ctx);
    else if (command == "step2") results = cmd_step2(ctx);
    else if (command == "step3") results = cmd_step3(ctx);
    else if (command == "step4") results = cmd_step4(ctx);
    else if (command == "robustness") results = cmd_robustness(ctx);
    else results = cmd_cost_benefit(ctx);

    json seeds{{"model", cfg.model.seed}, {"shuffle", cfg.train.shuffle_seed}};
    json synth_seeds = json::array();
    for (const auto& s : cfg.synth_stations) synth_seeds.push_back(s.seed);
    seeds["synth"] = synth_seeds;
    write_json(dir / "report.json",
               {{"command", command}, {"config", cfg.resolved}, {"seeds", seeds}, {"results", results}});
    outcome.output_dir = dir;
    log << command << ": wrote " << dir.string() << '\n';
    return outcome;
  } catch (const ConfigError& e) {
    return finish(2, e.what());
  } catch (const DataError& e) {
    return finish(3, e.what());
  } catch (const DivergenceError& e) {
    return finish(4, e.what());
  } catch (const std::exception& e) {
    return finish(1, e.what());
  }
}

}  // namespace stlf::cli
