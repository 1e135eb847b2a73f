#include "stlf/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stlf/error.hpp"

namespace stlf::features {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Fills interior NaN runs of length <= max_fill by linear interpolation.
void fill_short_runs(std::vector<double>& v, int max_fill) {
  std::size_t i = 0;
  while (i < v.size()) {
    if (!std::isnan(v[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < v.size() && std::isnan(v[j])) ++j;
    const std::size_t run = j - i;
    if (i > 0 && j < v.size() && run <= static_cast<std::size_t>(max_fill)) {
      const double a = v[i - 1], b = v[j];
      for (std::size_t k = 0; k < run; ++k) {
        const double w = static_cast<double>(k + 1) / static_cast<double>(run + 1);
        v[i + k] = (1.0 - w) * a + w * b;
      }
    }
    i = j;
  }
}

}  // namespace

int label_count(DayLabelScheme scheme) {
  switch (scheme) {
    case DayLabelScheme::None: return 0;
    case DayLabelScheme::ThreeType: return 3;
    case DayLabelScheme::EightType: return 8;
  }
  return 0;
}

std::string to_string(DayLabelScheme scheme) {
  switch (scheme) {
    case DayLabelScheme::None: return "none";
    case DayLabelScheme::ThreeType: return "three";
    case DayLabelScheme::EightType: return "eight";
  }
  return "none";
}

DayLabelScheme parse_scheme(const std::string& text) {
  if (text == "none") return DayLabelScheme::None;
  if (text == "three") return DayLabelScheme::ThreeType;
  if (text == "eight") return DayLabelScheme::EightType;
  throw ConfigError("unknown day-label scheme '" + text + "' (expected none|three|eight)");
}

bool CalendarConfig::is_non_working(Date d) const { return is_holiday(d) || iso_weekday_index(d) >= 5; }

std::vector<double> encode_day_onehot(Date date, DayLabelScheme scheme, const CalendarConfig& cal) {
  const int m = label_count(scheme);
  std::vector<double> v(static_cast<std::size_t>(m), 0.0);
  if (m == 0) return v;
  const bool holiday = cal.is_holiday(date);
  const int wd = iso_weekday_index(date);
  std::size_t slot = 0;
  if (scheme == DayLabelScheme::EightType) {
    slot = holiday ? 7u : static_cast<std::size_t>(cal.week_start == WeekStart::Monday ? wd : (wd + 1) % 7);
  } else {
    slot = holiday ? 2u : (wd >= 5 ? 1u : 0u);
  }
  v[slot] = 1.0;
  return v;
}

std::string to_string(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::None: return "none";
    case ConditionKind::Simultaneous: return "simultaneous";
    case ConditionKind::Instantaneous: return "instantaneous";
    case ConditionKind::WindowMax: return "max";
    case ConditionKind::WindowMean: return "mean";
  }
  return "none";
}

ConditionKind parse_condition_kind(const std::string& text) {
  if (text == "none") return ConditionKind::None;
  if (text == "simultaneous") return ConditionKind::Simultaneous;
  if (text == "instantaneous") return ConditionKind::Instantaneous;
  if (text == "max") return ConditionKind::WindowMax;
  if (text == "mean") return ConditionKind::WindowMean;
  throw ConfigError("unknown condition kind '" + text + "' (expected none|simultaneous|instantaneous|max|mean)");
}

void TemperatureCondition::validate() const {
  if (!std::isfinite(lead_hours) || lead_hours < 0.0 || lead_hours > 24.0) {
    throw ConfigError("lead_hours must lie in [0, 24]");
  }
  if (std::abs(lead_hours * 2.0 - std::round(lead_hours * 2.0)) > 1e-9) {
    throw ConfigError("lead_hours must be a multiple of 0.5");
  }
  if ((kind == ConditionKind::None || kind == ConditionKind::Simultaneous) && lead_hours != 0.0) {
    throw ConfigError(to_string(kind) + " condition carries no lead");
  }
}

int TemperatureCondition::lead_steps() const { return static_cast<int>(std::lround(lead_hours * 2.0)); }

std::string TemperatureCondition::label() const {
  if (kind == ConditionKind::None || kind == ConditionKind::Simultaneous) return to_string(kind);
  std::ostringstream ss;
  ss << to_string(kind) << '@' << lead_hours << 'h';
  return ss.str();
}

std::vector<TemperatureCondition> dedupe_conditions(const std::vector<TemperatureCondition>& conds) {
  std::vector<TemperatureCondition> out;
  for (const auto& c : conds) {
    if (c.kind == ConditionKind::None) continue;
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

std::vector<double> condition_values(std::span<const double> temp, const TemperatureCondition& cond) {
  cond.validate();
  const std::size_t n = temp.size();
  std::vector<double> out(n, kNaN);
  if (cond.kind == ConditionKind::None) return out;
  const std::size_t lead = cond.kind == ConditionKind::Simultaneous ? 0 : static_cast<std::size_t>(cond.lead_steps());
  for (std::size_t t = lead; t < n; ++t) {
    switch (cond.kind) {
      case ConditionKind::Simultaneous:
      case ConditionKind::Instantaneous:
        out[t] = temp[t - lead];
        break;
      case ConditionKind::WindowMax: {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t k = t - lead; k <= t; ++k) m = std::max(m, temp[k]);
        out[t] = m;
        break;
      }
      case ConditionKind::WindowMean: {
        double s = 0.0;
        for (std::size_t k = t - lead; k <= t; ++k) s += temp[k];
        out[t] = s / static_cast<double>(lead + 1);
        break;
      }
      case ConditionKind::None: break;
    }
    // NaN inputs propagate through sum; max needs an explicit check
    if (cond.kind == ConditionKind::WindowMax) {
      for (std::size_t k = t - lead; k <= t; ++k) {
        if (std::isnan(temp[k])) {
          out[t] = kNaN;
          break;
        }
      }
    }
  }
  return out;
}

ingest::TempSeries derive_condition_series(const ingest::TempSeries& temp, const TemperatureCondition& cond) {
  ingest::TempSeries out;
  out.location = temp.location;
  if (temp.points.empty() || cond.kind == ConditionKind::None) return out;
  const Instant start = temp.points.front().time;
  const auto span_steps = (temp.points.back().time.epoch_minutes - start.epoch_minutes) / kStepMinutes;
  std::vector<double> grid(static_cast<std::size_t>(span_steps + 1), kNaN);
  for (const auto& p : temp.points) {
    if (!p.time.on_half_hour() || (p.time.epoch_minutes - start.epoch_minutes) % kStepMinutes != 0) {
      throw DataError("temperature series is not half-hourly at " + format_instant(p.time));
    }
    grid[static_cast<std::size_t>((p.time.epoch_minutes - start.epoch_minutes) / kStepMinutes)] = p.temp_c;
  }
  const auto values = condition_values(grid, cond);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isnan(values[i])) out.points.push_back({start.plus_steps(static_cast<std::int64_t>(i)), values[i]});
  }
  return out;
}

void WindowSpec::validate() const {
  if (n_points < 1) throw ConfigError("n_points must be >= 1");
  for (const auto& c : conditions) c.validate();
}

std::vector<TemperatureCondition> WindowSpec::active_conditions() const { return dedupe_conditions(conditions); }

int WindowSpec::rows() const { return 1 + label_count(scheme) + static_cast<int>(active_conditions().size()); }

int WindowSpec::condition_history_steps() const {
  int steps = 0;
  for (const auto& c : active_conditions()) steps = std::max(steps, c.lead_steps());
  return steps;
}

SeriesFrame::SeriesFrame(const ingest::LoadSeries& load, const ingest::TempSeries& temp, int max_fill) {
  if (load.points.empty()) throw DataError("load series is empty");
  Instant first = load.points.front().time, last = load.points.back().time;
  if (!temp.points.empty()) {
    first = std::min(first, temp.points.front().time);
    last = std::max(last, temp.points.back().time);
  }
  start_ = first;
  const auto n = static_cast<std::size_t>((last.epoch_minutes - first.epoch_minutes) / kStepMinutes + 1);
  load_.assign(n, kNaN);
  temp_.assign(n, kNaN);
  observed_.assign(n, false);
  for (const auto& p : load.points) {
    const auto i = index_of(p.time);
    if (!i) throw DataError("load timestamp off the half-hour grid: " + format_instant(p.time));
    load_[*i] = p.load_mw;
    observed_[*i] = true;
  }
  for (const auto& p : temp.points) {
    const auto i = index_of(p.time);
    if (!i) throw DataError("temperature timestamp off the half-hour grid: " + format_instant(p.time));
    temp_[*i] = p.temp_c;
  }
  fill_short_runs(load_, max_fill);
  fill_short_runs(temp_, max_fill);
}

std::optional<std::size_t> SeriesFrame::index_of(Instant t) const {
  const auto d = t.epoch_minutes - start_.epoch_minutes;
  if (d < 0 || d % kStepMinutes != 0) return std::nullopt;
  const auto i = static_cast<std::size_t>(d / kStepMinutes);
  if (i >= load_.size()) return std::nullopt;
  return i;
}

WindowBuilder::WindowBuilder(const ingest::LoadSeries& load, const ingest::TempSeries& temp, WindowSpec spec,
                             CalendarConfig cal)
    : frame_(load, temp), spec_(std::move(spec)), cal_(std::move(cal)) {
  spec_.validate();
  for (const auto& c : spec_.active_conditions()) cond_rows_.push_back(condition_values(frame_.temp(), c));
}

std::optional<FeatureWindow> WindowBuilder::assemble(Instant at, std::string* why) const {
  auto fail = [&](const std::string& msg) -> std::optional<FeatureWindow> {
    if (why) *why = msg;
    return std::nullopt;
  };
  const auto idx = frame_.index_of(at);
  const auto n = static_cast<std::size_t>(spec_.n_points);
  if (!idx) return fail("no data at " + format_instant(at));
  if (*idx + 1 < n) return fail("not enough load history before " + format_instant(at));
  if (*idx + 1 >= frame_.size() || !frame_.observed()[*idx + 1]) {
    return fail("target missing at " + format_instant(at.plus_steps(1)));
  }
  const std::size_t first = *idx + 1 - n;
  const int m = label_count(spec_.scheme);
  FeatureWindow w;
  w.matrix.resize(spec_.rows(), static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t k = first + c;
    const double load = frame_.load()[k];
    if (std::isnan(load)) return fail("history crosses an unfilled gap at " + format_instant(frame_.time_at(k)));
    const auto col = static_cast<Eigen::Index>(c);
    w.matrix(0, col) = load;
    if (m > 0) {
      const auto onehot = encode_day_onehot(date_of(frame_.time_at(k)), spec_.scheme, cal_);
      for (int r = 0; r < m; ++r) w.matrix(1 + r, col) = onehot[static_cast<std::size_t>(r)];
    }
    // conditions are read at the time this column's load forecasts, one step later
    for (std::size_t q = 0; q < cond_rows_.size(); ++q) {
      const double v = cond_rows_[q][k + 1];
      if (std::isnan(v)) return fail("temperature condition undefined at " + format_instant(frame_.time_at(k + 1)));
      w.matrix(1 + m + static_cast<Eigen::Index>(q), col) = v;
    }
  }
  w.target = frame_.load()[*idx + 1];
  w.target_time = at.plus_steps(1);
  return w;
}

std::optional<FeatureWindow> WindowBuilder::try_build(Instant at) const { return assemble(at, nullptr); }

FeatureWindow WindowBuilder::build(Instant at) const {
  std::string why;
  auto w = assemble(at, &why);
  if (!w) throw DataError(why);
  return std::move(*w);
}

FeatureWindow build_window_matrix(const ingest::LoadSeries& load, const ingest::TempSeries& temp,
                                  const WindowSpec& spec, const CalendarConfig& cal, Instant at) {
  return WindowBuilder(load, temp, spec, cal).build(at);
}

std::string Season::label() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d-%02d", start_year % 100, (start_year + 1) % 100);
  return buf;
}

Season parse_season(const std::string& label) {
  if (label.size() != 5 || label[2] != '-' || !std::isdigit(static_cast<unsigned char>(label[0])) ||
      !std::isdigit(static_cast<unsigned char>(label[1])) || !std::isdigit(static_cast<unsigned char>(label[3])) ||
      !std::isdigit(static_cast<unsigned char>(label[4]))) {
    throw ConfigError("season label '" + label + "' must look like YY-YY");
  }
  const int a = std::stoi(label.substr(0, 2));
  const int b = std::stoi(label.substr(3, 2));
  if ((a + 1) % 100 != b) throw ConfigError("season label '" + label + "' must span consecutive years");
  return Season{2000 + a};
}

std::optional<Season> season_of(Instant t) {
  const auto ymd = civil(date_of(t));
  const int y = static_cast<int>(ymd.year());
  const unsigned mo = static_cast<unsigned>(ymd.month());
  if (mo >= 10) return Season{y};
  if (mo <= 3) return Season{y - 1};
  return std::nullopt;
}

Scaler Scaler::fit(std::span<const FeatureWindow> train, const WindowSpec& spec) {
  if (train.empty()) throw DataError("cannot fit scaler on an empty training split");
  const int rows = spec.rows();
  const int m = label_count(spec.scheme);
  Scaler s;
  s.rows.assign(static_cast<std::size_t>(rows), Range{});
  s.passthrough.assign(static_cast<std::size_t>(rows), false);
  for (int r = 1; r <= m; ++r) {
    s.passthrough[static_cast<std::size_t>(r)] = true;
    s.rows[static_cast<std::size_t>(r)] = Range{0.0, 1.0};
  }
  for (int r = 0; r < rows; ++r) {
    if (s.passthrough[static_cast<std::size_t>(r)]) continue;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& w : train) {
      if (w.matrix.rows() != rows) throw DataError("window row count does not match spec");
      lo = std::min(lo, w.matrix.row(r).minCoeff());
      hi = std::max(hi, w.matrix.row(r).maxCoeff());
    }
    s.rows[static_cast<std::size_t>(r)] = Range{lo, hi};
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& w : train) {
    lo = std::min(lo, w.target);
    hi = std::max(hi, w.target);
  }
  s.target = Range{lo, hi};
  return s;
}

FeatureWindow Scaler::apply(const FeatureWindow& raw) const {
  if (static_cast<std::size_t>(raw.matrix.rows()) != rows.size()) throw DataError("scaler/window row mismatch");
  FeatureWindow out = raw;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (passthrough[r]) continue;
    for (Eigen::Index c = 0; c < out.matrix.cols(); ++c) {
      out.matrix(static_cast<Eigen::Index>(r), c) = rows[r].scale(raw.matrix(static_cast<Eigen::Index>(r), c));
    }
  }
  out.target = target.scale(raw.target);
  return out;
}

FeatureWindow Scaler::invert(const FeatureWindow& scaled) const {
  if (static_cast<std::size_t>(scaled.matrix.rows()) != rows.size()) throw DataError("scaler/window row mismatch");
  FeatureWindow out = scaled;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (passthrough[r]) continue;
    for (Eigen::Index c = 0; c < out.matrix.cols(); ++c) {
      out.matrix(static_cast<Eigen::Index>(r), c) = rows[r].unscale(scaled.matrix(static_cast<Eigen::Index>(r), c));
    }
  }
  out.target = target.unscale(scaled.target);
  return out;
}

namespace {

std::vector<FeatureWindow> windows_in(const WindowBuilder& builder, const std::set<Season>& seasons) {
  return builder.build_where([&seasons](Instant t) {
    const auto s = season_of(t);
    return s && seasons.contains(*s);
  });
}

Dataset scaled(std::vector<FeatureWindow> raw, const Scaler& scaler, SplitTag tag, const WindowSpec& spec) {
  Dataset d;
  d.scaler = scaler;
  d.split = tag;
  d.spec = spec;
  d.windows.reserve(raw.size());
  d.targets_mw.reserve(raw.size());
  for (const auto& w : raw) {
    d.targets_mw.push_back(w.target);
    d.windows.push_back(scaler.apply(w));
  }
  return d;
}

}  // namespace

Dataset make_split(const WindowBuilder& builder, const std::set<Season>& seasons, const Scaler& scaler, SplitTag tag) {
  auto raw = windows_in(builder, seasons);
  if (raw.empty()) throw DataError("no windows fall in the requested seasons");
  return scaled(std::move(raw), scaler, tag, builder.spec());
}

std::pair<Dataset, Dataset> make_dataset(const WindowBuilder& builder, const std::set<Season>& train_seasons,
                                         const std::set<Season>& test_seasons) {
  if (train_seasons.empty()) throw ConfigError("no training seasons");
  if (test_seasons.empty()) throw ConfigError("no test seasons");
  for (const auto& s : train_seasons) {
    if (test_seasons.contains(s)) throw ConfigError("season " + s.label() + " is in both train and test");
  }
  auto train_raw = windows_in(builder, train_seasons);
  auto test_raw = windows_in(builder, test_seasons);
  if (train_raw.empty()) throw DataError("training split is empty");
  if (test_raw.empty()) throw DataError("test split is empty");
  const Scaler scaler = Scaler::fit(train_raw, builder.spec());
  return {scaled(std::move(train_raw), scaler, SplitTag::Train, builder.spec()),
          scaled(std::move(test_raw), scaler, SplitTag::Test, builder.spec())};
}

std::pair<Dataset, Dataset> make_dataset(const ingest::LoadSeries& load, const ingest::TempSeries& temp,
                                         const WindowSpec& spec, const CalendarConfig& cal,
                                         const std::set<Season>& train_seasons,
                                         const std::set<Season>& test_seasons) {
  return make_dataset(WindowBuilder(load, temp, spec, cal), train_seasons, test_seasons);
}

}  // namespace stlf::features
