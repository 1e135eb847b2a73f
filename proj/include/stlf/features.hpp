#pragma once

#include <Eigen/Dense>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stlf/ingest.hpp"
#include "stlf/time.hpp"

namespace stlf::features {

enum class DayLabelScheme { None, ThreeType, EightType };

/// Number of one-hot rows m for a scheme: 0, 3 or 8.
[[nodiscard]] int label_count(DayLabelScheme scheme);
[[nodiscard]] std::string to_string(DayLabelScheme scheme);
/// Accepts none|three|eight. Throws ConfigError.
[[nodiscard]] DayLabelScheme parse_scheme(const std::string& text);

enum class WeekStart { Monday, Sunday };

struct CalendarConfig {
  std::set<Date> holidays;
  WeekStart week_start{WeekStart::Monday};

  [[nodiscard]] bool is_holiday(Date d) const { return holidays.contains(d); }
  /// Saturday, Sunday or a configured holiday.
  [[nodiscard]] bool is_non_working(Date d) const;
};

/// One-hot day label. EightType slots are the seven weekdays (from `week_start`) then
/// holiday; ThreeType slots are weekday, weekend, holiday. A holiday always takes the
/// holiday slot.
[[nodiscard]] std::vector<double> encode_day_onehot(Date date, DayLabelScheme scheme, const CalendarConfig& cal);

enum class ConditionKind { None, Simultaneous, Instantaneous, WindowMax, WindowMean };

[[nodiscard]] std::string to_string(ConditionKind kind);
[[nodiscard]] ConditionKind parse_condition_kind(const std::string& text);

/// Leading-temperature feature. Instantaneous is temp(t - lead); WindowMax and
/// WindowMean reduce over the inclusive window [t - lead, t].
struct TemperatureCondition {
  ConditionKind kind{ConditionKind::None};
  double lead_hours{0.0};

  static TemperatureCondition none() { return {ConditionKind::None, 0.0}; }
  static TemperatureCondition simultaneous() { return {ConditionKind::Simultaneous, 0.0}; }
  static TemperatureCondition instantaneous(double h) { return {ConditionKind::Instantaneous, h}; }
  static TemperatureCondition window_max(double h) { return {ConditionKind::WindowMax, h}; }
  static TemperatureCondition window_mean(double h) { return {ConditionKind::WindowMean, h}; }

  /// Throws ConfigError unless lead is a multiple of 0.5 h in [0, 24] and
  /// None/Simultaneous carry no lead.
  void validate() const;
  [[nodiscard]] int lead_steps() const;
  [[nodiscard]] std::string label() const;

  friend bool operator==(const TemperatureCondition&, const TemperatureCondition&) = default;
};

/// Removes None entries and repeated (kind, lead) pairs, keeping first occurrences.
[[nodiscard]] std::vector<TemperatureCondition> dedupe_conditions(const std::vector<TemperatureCondition>& conds);

/// Condition values over a regular half-hourly grid; NaN marks undefined samples
/// (missing input or not enough history).
[[nodiscard]] std::vector<double> condition_values(std::span<const double> temp, const TemperatureCondition& cond);

/// Series form of condition_values. Points lacking history are omitted.
[[nodiscard]] ingest::TempSeries derive_condition_series(const ingest::TempSeries& temp, const TemperatureCondition& cond);

struct WindowSpec {
  int n_points{32};
  DayLabelScheme scheme{DayLabelScheme::EightType};
  std::vector<TemperatureCondition> conditions;

  void validate() const;
  /// Conditions that produce a row: None entries and repeats dropped.
  [[nodiscard]] std::vector<TemperatureCondition> active_conditions() const;
  [[nodiscard]] int rows() const;
  /// Half-hour steps of temperature history needed before the first load column.
  [[nodiscard]] int condition_history_steps() const;
};

/// One (1 + m + k) x n input matrix. Row 0 is load oldest to newest, rows 1..m the
/// day labels, the last k rows the condition values at each column's forecast time
/// (column time + 30 min), so the last column carries the target's conditions.
struct FeatureWindow {
  Eigen::MatrixXd matrix;
  double target{0.0};
  Instant target_time;
};

/// Load and temperature on one regular half-hourly grid with short gaps filled.
class SeriesFrame {
 public:
  /// Gaps of up to `max_fill` consecutive samples are filled linearly.
  SeriesFrame(const ingest::LoadSeries& load, const ingest::TempSeries& temp, int max_fill = 2);

  [[nodiscard]] Instant start() const { return start_; }
  [[nodiscard]] std::size_t size() const { return load_.size(); }
  [[nodiscard]] std::optional<std::size_t> index_of(Instant t) const;
  [[nodiscard]] Instant time_at(std::size_t i) const { return start_.plus_steps(static_cast<std::int64_t>(i)); }
  [[nodiscard]] const std::vector<double>& load() const { return load_; }
  [[nodiscard]] const std::vector<bool>& observed() const { return observed_; }
  [[nodiscard]] const std::vector<double>& temp() const { return temp_; }

 private:
  Instant start_;
  std::vector<double> load_;
  std::vector<bool> observed_;
  std::vector<double> temp_;
};

/// Builds windows for one (series pair, spec, calendar); condition rows are computed once.
class WindowBuilder {
 public:
  WindowBuilder(const ingest::LoadSeries& load, const ingest::TempSeries& temp, WindowSpec spec, CalendarConfig cal);

  /// Window whose history ends at `at` and whose target is `at` + 30 min. Throws
  /// DataError if history crosses an unfilled gap, a condition is undefined, or the
  /// target is not an observed sample.
  [[nodiscard]] FeatureWindow build(Instant at) const;
  [[nodiscard]] std::optional<FeatureWindow> try_build(Instant at) const;
  /// All buildable windows whose target satisfies `keep`, in time order.
  template <typename Pred>
  [[nodiscard]] std::vector<FeatureWindow> build_where(Pred keep) const {
    std::vector<FeatureWindow> out;
    for (std::size_t i = 0; i + 1 < frame_.size(); ++i) {
      const Instant at = frame_.time_at(i);
      if (!keep(at.plus_steps(1))) continue;
      if (auto w = try_build(at)) out.push_back(std::move(*w));
    }
    return out;
  }

  [[nodiscard]] const WindowSpec& spec() const { return spec_; }
  [[nodiscard]] const SeriesFrame& frame() const { return frame_; }

 private:
  [[nodiscard]] std::optional<FeatureWindow> assemble(Instant at, std::string* why) const;

  SeriesFrame frame_;
  WindowSpec spec_;
  CalendarConfig cal_;
  std::vector<std::vector<double>> cond_rows_;
};

[[nodiscard]] FeatureWindow build_window_matrix(const ingest::LoadSeries& load, const ingest::TempSeries& temp,
                                                const WindowSpec& spec, const CalendarConfig& cal, Instant at);

/// Oct 1 .. Mar 31 fire season, half-open [start, end).
struct Season {
  int start_year{2015};

  [[nodiscard]] std::string label() const;
  [[nodiscard]] Instant start() const { return make_instant(start_year, 10, 1); }
  [[nodiscard]] Instant end() const { return make_instant(start_year + 1, 4, 1); }
  [[nodiscard]] bool contains(Instant t) const { return start() <= t && t < end(); }

  friend auto operator<=>(const Season&, const Season&) = default;
};

/// "15-16" -> Season{2015}. Throws ConfigError.
[[nodiscard]] Season parse_season(const std::string& label);
[[nodiscard]] std::optional<Season> season_of(Instant t);

/// Min-max range of one matrix row or of the target. Degenerate ranges map to 0.5.
struct Range {
  double min{0.0};
  double max{1.0};

  [[nodiscard]] double scale(double v) const { return max > min ? (v - min) / (max - min) : 0.5; }
  [[nodiscard]] double unscale(double s) const { return max > min ? min + s * (max - min) : min; }
  friend bool operator==(const Range&, const Range&) = default;
};

struct Scaler {
  std::vector<Range> rows;
  std::vector<bool> passthrough;
  Range target;

  /// Fits from training windows only. One-hot rows are passed through unscaled.
  [[nodiscard]] static Scaler fit(std::span<const FeatureWindow> train, const WindowSpec& spec);
  [[nodiscard]] FeatureWindow apply(const FeatureWindow& raw) const;
  [[nodiscard]] FeatureWindow invert(const FeatureWindow& scaled) const;
  [[nodiscard]] double unscale_target(double s) const { return target.unscale(s); }

  friend bool operator==(const Scaler&, const Scaler&) = default;
};

enum class SplitTag { Train, Test };

struct Dataset {
  /// Scaled windows.
  std::vector<FeatureWindow> windows;
  /// Unscaled targets (MW), parallel to `windows`.
  std::vector<double> targets_mw;
  Scaler scaler;
  SplitTag split{SplitTag::Train};
  WindowSpec spec;
};

/// Windows are assigned by the season containing their target time. The scaler is
/// fitted on the training windows and applied to both splits.
[[nodiscard]] std::pair<Dataset, Dataset> make_dataset(const ingest::LoadSeries& load, const ingest::TempSeries& temp,
                                                       const WindowSpec& spec, const CalendarConfig& cal,
                                                       const std::set<Season>& train_seasons,
                                                       const std::set<Season>& test_seasons);

/// Same split logic over an existing builder (avoids recomputing condition rows).
[[nodiscard]] std::pair<Dataset, Dataset> make_dataset(const WindowBuilder& builder,
                                                       const std::set<Season>& train_seasons,
                                                       const std::set<Season>& test_seasons);

/// Windows whose target lies in `seasons`, scaled with an already fitted scaler.
[[nodiscard]] Dataset make_split(const WindowBuilder& builder, const std::set<Season>& seasons, const Scaler& scaler,
                                 SplitTag tag);

}  // namespace stlf::features
