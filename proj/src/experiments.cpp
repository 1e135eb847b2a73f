#include "stlf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "stlf/error.hpp"
#include "stlf/rng.hpp"

namespace stlf::experiments {

using features::ConditionKind;
using features::Season;
using features::TemperatureCondition;

bool TimeOfDayWindow::contains(int minute) const {
  if (empty()) return false;
  if (start_minute < end_minute) return start_minute <= minute && minute < end_minute;
  return minute >= start_minute || minute < end_minute;
}

TimeOfDayWindow default_offpeak_window() { return {22 * 60 + 30, 90}; }

MetricsReport evaluate(std::span<const double> actual, std::span<const double> predicted,
                       std::span<const Instant> times, std::optional<TimeOfDayWindow> exclusion) {
  if (actual.size() != predicted.size() || actual.size() != times.size()) {
    throw DataError("evaluate: actual, predicted and times differ in length");
  }
  MetricsReport r;
  double sq = 0.0;
  double pct = 0.0;
  std::array<double, kSlotsPerDay> slot_pct{};
  std::array<double, kSlotsPerDay> slot_mw{};
  std::array<std::size_t, kSlotsPerDay> slot_n{};
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (exclusion && exclusion->contains(minute_of_day(times[i]))) continue;
    const double y = actual[i];
    if (!(y > 0.0)) throw DataError("evaluate: actual value at " + format_instant(times[i]) + " is not positive");
    const double e = y - predicted[i];
    const double ape = 100.0 * std::abs(e) / y;
    sq += e * e;
    pct += ape;
    const auto s = static_cast<std::size_t>(slot_of_day(times[i]));
    slot_pct[s] += ape;
    slot_mw[s] += std::abs(e);
    ++slot_n[s];
    ++r.count;
  }
  if (r.count == 0) throw DataError("evaluate: no points left after exclusion");
  const auto n = static_cast<double>(r.count);
  r.mse = sq / n;
  r.mape = pct / n;

  std::vector<double> prof_pct;
  std::vector<double> prof_mw;
  for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
    if (slot_n[s] == 0) continue;
    const auto k = static_cast<double>(slot_n[s]);
    r.half_hourly_mean_abs_error[s] = slot_pct[s] / k;
    r.half_hourly_mean_abs_error_mw[s] = slot_mw[s] / k;
    prof_pct.push_back(slot_pct[s] / k);
    prof_mw.push_back(slot_mw[s] / k);
  }
  r.daily_error_variance = stats::population_variance(prof_mw);
  r.daily_error_variance_pct = stats::population_variance(prof_pct);
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic data

void SynthSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError(field + ": " + why); };
  if (days < 0) fail("days", "must be >= 0");
  if (days == 0 && seasons < 1) fail("seasons", "must be >= 1 when days is 0");
  if (!(base_mw > 0.0)) fail("base_mw", "must be > 0");
  if (!(peak_width_hours > 0.0)) fail("peak_width_hours", "must be > 0");
  if (!(weekend_factor > 0.0)) fail("weekend_factor", "must be > 0");
  if (!(uptick_fraction >= 0.0)) fail("uptick_fraction", "must be >= 0");
  if (!(uptick_variability >= 0.0 && uptick_variability <= 1.0)) fail("uptick_variability", "must be in [0, 1]");
  if (uptick.start_minute < 0 || uptick.start_minute >= 1440 || uptick.end_minute < 0 || uptick.end_minute >= 1440) {
    fail("uptick", "minutes must be in [0, 1440)");
  }
  if (!(temp_anomaly_sd_c >= 0.0)) fail("temp_anomaly_sd_c", "must be >= 0");
  if (!(temp_anomaly_corr_hours > 0.0)) fail("temp_anomaly_corr_hours", "must be > 0");
  if (!(lag_hours >= 0.0 && lag_hours <= 24.0) || std::fmod(lag_hours * 2.0, 1.0) != 0.0) {
    fail("lag_hours", "must be a multiple of 0.5 in [0, 24]");
  }
  if (!(noise_sd_mw >= 0.0)) fail("noise_sd_mw", "must be >= 0");
  if (!std::isfinite(coupling)) fail("coupling", "must be finite");
}

namespace {

double circular_gauss(double hour, double centre, double width) {
  double d = std::abs(hour - centre);
  d = std::min(d, 24.0 - d);
  return std::exp(-0.5 * (d / width) * (d / width));
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser so nearby seeds give unrelated streams
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

int window_length(const TimeOfDayWindow& w) {
  return ((w.end_minute - w.start_minute) % 1440 + 1440) % 1440;
}

}  // namespace

SynthOutput synth_generate(const SynthSpec& spec) {
  spec.validate();
  const Instant start = make_instant(spec.start_year, 10, 1);
  const Instant end =
      spec.days > 0 ? start.plus_steps(static_cast<std::int64_t>(spec.days) * kSlotsPerDay)
                    : make_instant(spec.start_year + spec.seasons, 4, 1);
  const auto n = static_cast<std::size_t>((end.epoch_minutes - start.epoch_minutes) / kStepMinutes);
  const int lag_steps = static_cast<int>(std::lround(spec.lag_hours * 2.0));
  const std::size_t pre = kSlotsPerDay + static_cast<std::size_t>(lag_steps);
  const Instant origin = start.plus_steps(-static_cast<std::int64_t>(pre));

  // temperature: annual and diurnal cycles plus an AR(1) anomaly
  Rng temp_rng(stream_seed(spec.seed, 0));
  const double phi = std::exp(-0.5 / spec.temp_anomaly_corr_hours);
  const double innov = spec.temp_anomaly_sd_c * std::sqrt(1.0 - phi * phi);
  std::vector<double> temp(pre + n);
  double anomaly = spec.temp_anomaly_sd_c * temp_rng.normal();
  const Date jan15 = make_date(spec.start_year + 1, 1, 15);
  for (std::size_t i = 0; i < temp.size(); ++i) {
    const Instant t = origin.plus_steps(static_cast<std::int64_t>(i));
    const double day = static_cast<double>((date_of(t) - jan15).count()) + minute_of_day(t) / 1440.0;
    const double hour = minute_of_day(t) / 60.0;
    if (i > 0) anomaly = phi * anomaly + innov * temp_rng.normal();
    temp[i] = spec.temp_mean_c + spec.temp_annual_amp_c * std::cos(2.0 * std::numbers::pi * day / 365.25) +
              spec.temp_diurnal_amp_c * std::cos(2.0 * std::numbers::pi * (hour - 15.0) / 24.0) + anomaly;
  }
  double mean = 0.0;
  for (double v : temp) mean += v;
  mean /= static_cast<double>(temp.size());
  double var = 0.0;
  for (double v : temp) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(temp.size()));
  auto tn = [&](std::size_t i) { return sd > 0.0 ? (temp[i] - mean) / sd : 0.0; };

  // one uptick scale per calendar day, keyed by the day the window opens
  Rng uptick_rng(stream_seed(spec.seed, 1));
  const Date first_day = date_of(origin) - std::chrono::days(1);
  const auto n_days = static_cast<std::size_t>((date_of(end) - first_day).count()) + 1;
  std::vector<double> day_scale(n_days);
  for (auto& s : day_scale) s = uptick_rng.uniform(1.0 - spec.uptick_variability, 1.0 + spec.uptick_variability);
  const int uptick_len = window_length(spec.uptick);

  Rng noise_rng(stream_seed(spec.seed, 2));
  features::CalendarConfig cal;
  cal.holidays = spec.holidays;

  SynthOutput out;
  out.load.station_id = spec.station_id;
  out.load.points.reserve(n);
  out.temp.location = {spec.lat, spec.lon};
  out.temp.points.reserve(n);
  std::vector<double> driven;
  driven.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = pre + k;
    const Instant t = start.plus_steps(static_cast<std::int64_t>(k));
    const int minute = minute_of_day(t);
    const double hour = minute / 60.0;
    const double duck = 1.0 + spec.morning_peak_amp * circular_gauss(hour, spec.morning_peak_hour, spec.peak_width_hours) +
                        spec.evening_peak_amp * circular_gauss(hour, spec.evening_peak_hour, spec.peak_width_hours);
    const double weekly = cal.is_non_working(date_of(t)) ? spec.weekend_factor : 1.0;
    const double shape = spec.base_mw * duck * weekly;
    const double temp_term = shape * spec.coupling * tn(i - static_cast<std::size_t>(lag_steps));
    double uptick = 0.0;
    if (uptick_len > 0 && spec.uptick.contains(minute)) {
      const int into = ((minute - spec.uptick.start_minute) % 1440 + 1440) % 1440;
      const Date opened = into > minute ? date_of(t) - std::chrono::days(1) : date_of(t);
      const auto d = static_cast<std::size_t>((opened - first_day).count());
      const double frac = (into + 0.5 * kStepMinutes) / uptick_len;
      uptick = spec.uptick_fraction * spec.base_mw * day_scale[d] * std::sin(std::numbers::pi * frac);
    }
    const double det = shape + temp_term + uptick;
    if (!(det > 0.0)) {
      throw DataError("synth: noiseless load at " + format_instant(t) + " is not positive (" + std::to_string(det) +
                      " MW); lower coupling or raise base_mw");
    }
    double noise = 0.0;
    if (spec.noise_sd_mw > 0.0) noise = std::clamp(noise_rng.normal(), -3.0, 3.0) * spec.noise_sd_mw;
    const double load = std::max(det + noise, 0.01 * det);
    out.load.points.push_back({t, load});
    out.temp.points.push_back({t, temp[i]});
    driven.push_back(temp_term);
  }

  GroundTruth& g = out.truth;
  g.lag_hours = spec.lag_hours;
  g.expected_leads = {spec.lag_hours, spec.lag_hours, 2.0 * spec.lag_hours};
  stats::BestConditions planted;
  planted.instantaneous.best_rho_lead = g.expected_leads[0];
  planted.max.best_rho_lead = g.expected_leads[1];
  planted.mean.best_rho_lead = g.expected_leads[2];
  g.group = stats::classify_group(planted);
  g.uptick = spec.uptick;
  if (spec.noise_sd_mw > 0.0) g.snr = stats::population_variance(driven) / (spec.noise_sd_mw * spec.noise_sd_mw);
  g.seed = spec.seed;
  return out;
}

// ---------------------------------------------------------------------------
// Harnesses

PreparedSplit prepare_split(const StationData& data, const ExperimentSettings& settings,
                            const features::WindowSpec& window) {
  window.validate();
  if (settings.train_stride < 1) throw ConfigError("train_stride: must be >= 1");
  const features::WindowBuilder builder(data.load, data.temp, window, settings.calendar);
  auto [train_set, test_set] = features::make_dataset(builder, settings.train_seasons, settings.test_seasons);
  if (settings.train_stride > 1) {
    const auto stride = static_cast<std::size_t>(settings.train_stride);
    std::vector<features::FeatureWindow> kept;
    std::vector<double> kept_mw;
    for (std::size_t i = 0; i < train_set.windows.size(); i += stride) {
      kept.push_back(std::move(train_set.windows[i]));
      kept_mw.push_back(train_set.targets_mw[i]);
    }
    train_set.windows = std::move(kept);
    train_set.targets_mw = std::move(kept_mw);
  }
  return {std::move(train_set), std::move(test_set)};
}

RunResult run_configuration(const StationData& data, const ExperimentSettings& settings,
                            const features::WindowSpec& window, const std::string& label) {
  auto [train_set, test_set] = prepare_split(data, settings, window);
  neural::ModelConfig mc = settings.model;
  mc.input_dim = window.rows();

  RunResult r;
  r.label = label;
  r.window = window;
  r.model_seed = mc.seed;
  r.shuffle_seed = settings.train.shuffle_seed;
  r.model = neural::train(train_set, settings.train, mc);
  r.model.window = window;
  r.predicted = neural::predict(r.model, test_set);
  r.actual = test_set.targets_mw;
  r.times.reserve(test_set.windows.size());
  for (const auto& w : test_set.windows) r.times.push_back(w.target_time);
  r.metrics = evaluate(r.actual, r.predicted, r.times, settings.exclusion);
  return r;
}

Step1Report step1_input_length_sweep(const StationData& data, const ExperimentSettings& settings,
                                     std::span<const int> lengths, std::span<const neural::CellKind> cells) {
  if (lengths.empty()) throw ConfigError("step1.lengths: must not be empty");
  if (cells.empty()) throw ConfigError("step1.cells: must not be empty");
  for (int n : lengths) {
    if (n < 1) throw ConfigError("step1.lengths: every length must be >= 1");
  }
  Step1Report rep;
  for (auto cell : cells) {
    ExperimentSettings s = settings;
    s.model.cell = cell;
    for (int n : lengths) {
      features::WindowSpec w = settings.window;
      w.n_points = n;
      rep.rows.push_back({n, cell, run_configuration(data, s, w, neural::to_string(cell) + "/n=" + std::to_string(n))});
    }
  }
  for (auto cell : cells) {
    std::vector<std::pair<int, double>> by_len;
    for (const auto& row : rep.rows) {
      if (row.cell == cell) by_len.emplace_back(row.n_points, row.run.metrics.mape);
    }
    std::sort(by_len.begin(), by_len.end());
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [n, m] : by_len) best = std::min(best, m);
    for (const auto& [n, m] : by_len) {
      if (m <= best * 1.02) {
        rep.plateau_length[cell] = n;
        break;
      }
    }
  }
  return rep;
}

Step2Report step2_calendar_comparison(const StationData& data, const ExperimentSettings& settings,
                                      std::span<const features::DayLabelScheme> schemes) {
  if (schemes.empty()) throw ConfigError("step2.schemes: must not be empty");
  Step2Report rep;
  for (auto scheme : schemes) {
    features::WindowSpec w = settings.window;
    w.scheme = scheme;
    Step2Row row;
    row.scheme = scheme;
    row.run = run_configuration(data, settings, w, features::to_string(scheme));
    std::vector<double> err(row.run.actual.size());
    for (std::size_t i = 0; i < err.size(); ++i) err[i] = row.run.actual[i] - row.run.predicted[i];
    const auto grid = stats::kde_grid(err);
    row.error_kde = stats::kde(err, grid);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

Step3Report step3_temperature_conditions(const StationData& data, const ExperimentSettings& settings,
                                         std::span<const TemperatureCondition> conditions) {
  const auto has = [&](ConditionKind k) {
    return std::any_of(conditions.begin(), conditions.end(), [k](const auto& c) { return c.kind == k; });
  };
  if (!has(ConditionKind::None)) throw ConfigError("step3.conditions: the none baseline is required");
  if (!has(ConditionKind::Simultaneous)) throw ConfigError("step3.conditions: the simultaneous baseline is required");
  Step3Report rep;
  for (const auto& c : conditions) {
    c.validate();
    features::WindowSpec w = settings.window;
    w.conditions = {c};
    rep.rows.push_back({c, run_configuration(data, settings, w, c.label())});
  }
  return rep;
}

std::vector<TemperatureCondition> step3_panel(const stats::BestConditions& best) {
  std::vector<TemperatureCondition> out{TemperatureCondition::none(), TemperatureCondition::simultaneous()};
  for (const auto& c : best.panel()) {
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

SweepSet sweep_station(const StationData& data) {
  SweepSet s;
  for (auto kind : {ConditionKind::Instantaneous, ConditionKind::WindowMax, ConditionKind::WindowMean}) {
    s.sweeps.push_back(stats::lead_sweep(data.load, data.temp, kind));
  }
  s.best = stats::best_conditions(s.sweeps);
  s.group = stats::classify_group(s.best);
  return s;
}

namespace {

std::vector<double> load_values(const ingest::LoadSeries& load) {
  std::vector<double> v;
  v.reserve(load.points.size());
  for (const auto& p : load.points) v.push_back(p.load_mw);
  return v;
}

std::vector<double> temp_values(const ingest::TempSeries& temp) {
  std::vector<double> v;
  v.reserve(temp.points.size());
  for (const auto& p : temp.points) v.push_back(p.temp_c);
  return v;
}

}  // namespace

Step4Report step4_generalise(std::span<const StationData> stations, const ExperimentSettings& settings) {
  if (stations.empty()) throw ConfigError("stations: at least one station is required");
  Step4Report rep;
  for (const auto& data : stations) {
    Step4Station st;
    st.station_id = data.meta.station_id.empty() ? data.load.station_id : data.meta.station_id;
    try {
      st.sweep = sweep_station(data);
    } catch (const DataError& e) {
      rep.notices.push_back("station " + st.station_id + " skipped: " + e.what());
      continue;
    }
    st.best_condition = st.sweep.best.best_rho_condition();
    const auto proto = stats::group_prototype(st.sweep.group);
    st.combination = features::dedupe_conditions({TemperatureCondition::instantaneous(proto[0]),
                                                  TemperatureCondition::window_max(proto[1]),
                                                  TemperatureCondition::window_mean(proto[2])});
    st.combination_collapsed = st.combination.size() == 1 && st.combination.front() == st.best_condition;

    features::WindowSpec w = settings.window;
    w.conditions = {};
    st.runs[0] = run_configuration(data, settings, w, kStep4Conditions[0]);
    w.conditions = {st.best_condition};
    st.runs[1] = run_configuration(data, settings, w, kStep4Conditions[1]);
    if (st.combination_collapsed) {
      st.runs[2] = st.runs[1];
      st.runs[2].label = kStep4Conditions[2];
    } else {
      w.conditions = st.combination;
      st.runs[2] = run_configuration(data, settings, w, kStep4Conditions[2]);
    }
    st.load_dispersion = stats::dispersion(load_values(data.load));
    st.temp_dispersion = stats::dispersion(temp_values(data.temp));
    st.region_factors = data.meta.region_factors;
    rep.stations.push_back(std::move(st));
  }

  std::set<std::string> names;
  for (const auto& st : rep.stations) {
    for (const auto& [k, v] : st.region_factors) names.insert(k);
  }
  for (const auto& name : names) {
    std::vector<double> f;
    std::vector<double> mape;
    for (const auto& st : rep.stations) {
      const auto it = st.region_factors.find(name);
      if (it == st.region_factors.end()) continue;
      f.push_back(it->second);
      mape.push_back(st.runs[1].metrics.mape);
    }
    try {
      rep.factor_correlations.push_back({name, f.size(), stats::pearson(f, mape)});
    } catch (const DataError& e) {
      rep.notices.push_back("factor " + name + " not correlated: " + e.what());
    }
  }
  return rep;
}

void RotationPlan::validate() const {
  if (train.empty()) throw ConfigError("rotation plan " + name + ": no training season");
  if (test.empty()) throw ConfigError("rotation plan " + name + ": no test season");
  for (const auto& s : train) {
    if (test.contains(s)) throw ConfigError("rotation plan " + name + ": season " + s.label() + " is in both splits");
  }
}

std::vector<RotationPlan> rotation_presets() {
  auto seasons = [](std::initializer_list<int> years) {
    std::set<Season> out;
    for (int y : years) out.insert(Season{y});
    return out;
  };
  return {
      {"original", seasons({2015, 2016, 2017}), seasons({2018, 2019})},
      {"test1", seasons({2017, 2018, 2019}), seasons({2015, 2016})},
      {"test2", seasons({2016, 2018, 2019}), seasons({2015, 2017})},
      {"test3", seasons({2016, 2017, 2019}), seasons({2015, 2018})},
      {"test4", seasons({2015, 2017, 2018}), seasons({2016, 2019})},
  };
}

RotationReport rotation_robustness(const StationData& data, const ExperimentSettings& settings,
                                   std::span<const RotationPlan> plans) {
  if (plans.empty()) throw ConfigError("plans: at least one rotation plan is required");
  for (const auto& p : plans) p.validate();
  RotationReport rep;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : plans) {
    ExperimentSettings s = settings;
    s.train_seasons = p.train;
    s.test_seasons = p.test;
    RotationRow row{p, run_configuration(data, s, settings.window, p.name)};
    lo = std::min(lo, row.run.metrics.mape);
    hi = std::max(hi, row.run.metrics.mape);
    rep.rows.push_back(std::move(row));
  }
  rep.relative_mape_spread = lo > 0.0 ? (hi - lo) / lo : 0.0;
  return rep;
}

double round_significant(double value, int figures) {
  if (figures < 1) throw ConfigError("significant_figures: must be >= 1");
  if (value == 0.0 || !std::isfinite(value)) return value;
  const int exponent = static_cast<int>(std::floor(std::log10(std::abs(value))));
  const double scale = std::pow(10.0, figures - 1 - exponent);
  return std::round(value * scale) / scale;
}

CostBenefitResult cost_benefit(const CostBenefitInput& in) {
  if (!(in.annual_consumption_twh >= 0.0)) throw ConfigError("annual_consumption_twh: must be >= 0");
  if (!(in.mape_method >= 0.0)) throw ConfigError("mape_method: must be >= 0");
  if (!(in.tariff_per_kwh >= 0.0)) throw ConfigError("tariff_per_kwh: must be >= 0");
  if (in.mape_baseline < in.mape_method) {
    throw ConfigError("mape_baseline: must be >= mape_method (negative reduction)");
  }
  CostBenefitResult r;
  r.energy_reduction_twh = in.annual_consumption_twh * (in.mape_baseline - in.mape_method) / 100.0;
  if (in.significant_figures) r.energy_reduction_twh = round_significant(r.energy_reduction_twh, *in.significant_figures);
  constexpr double kKwhPerTwh = 1e9;
  r.saving = r.energy_reduction_twh * kKwhPerTwh * in.tariff_per_kwh;
  return r;
}

}  // namespace stlf::experiments
