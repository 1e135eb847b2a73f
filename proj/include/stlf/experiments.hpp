#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stlf/features.hpp"
#include "stlf/ingest.hpp"
#include "stlf/neural.hpp"
#include "stlf/stats.hpp"

namespace stlf::experiments {

/// Time-of-day interval [start, end) in minutes; wraps past midnight when end < start.
struct TimeOfDayWindow {
  int start_minute{0};
  int end_minute{0};

  [[nodiscard]] bool empty() const { return start_minute == end_minute; }
  [[nodiscard]] bool contains(int minute_of_day) const;
};

/// Off-peak hot-water uptick, 22:30 to 01:30.
[[nodiscard]] TimeOfDayWindow default_offpeak_window();

struct MetricsReport {
  std::size_t count{0};
  double mse{0.0};   // MW^2
  double mape{0.0};  // percent
  /// Population variance of the per-slot mean absolute error (MW^2).
  double daily_error_variance{0.0};
  /// Same over the per-slot mean absolute percentage error (percent^2).
  double daily_error_variance_pct{0.0};
  std::array<std::optional<double>, kSlotsPerDay> half_hourly_mean_abs_error;     // percent
  std::array<std::optional<double>, kSlotsPerDay> half_hourly_mean_abs_error_mw;  // MW
};

/// MSE, MAPE and daily error variance over the points whose time of day is outside
/// `exclusion`. Slots without data are left out of the variance. Throws DataError on
/// length mismatch, a non-positive actual value, or nothing left after exclusion.
[[nodiscard]] MetricsReport evaluate(std::span<const double> actual, std::span<const double> predicted,
                                     std::span<const Instant> times,
                                     std::optional<TimeOfDayWindow> exclusion = std::nullopt);

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthSpec {
  std::string station_id{"synthetic"};
  double lat{-36.7};
  double lon{142.2};
  int start_year{2015};
  /// Fire seasons covered; data runs continuously from Oct 1 of start_year to Apr 1
  /// of start_year + seasons. Ignored when `days` > 0.
  int seasons{5};
  int days{0};

  double base_mw{20.0};
  double morning_peak_amp{0.15};
  double evening_peak_amp{0.30};
  double morning_peak_hour{8.0};
  double evening_peak_hour{19.0};
  double peak_width_hours{2.0};
  /// Load multiplier on Saturdays, Sundays and holidays.
  double weekend_factor{0.85};

  /// Off-peak uptick height as a fraction of base, scaled per day by U(1 - v, 1 + v).
  double uptick_fraction{0.08};
  double uptick_variability{0.5};
  TimeOfDayWindow uptick{22 * 60 + 30, 90};

  double temp_mean_c{18.0};
  double temp_annual_amp_c{5.0};
  double temp_diurnal_amp_c{6.0};
  double temp_anomaly_sd_c{4.0};
  double temp_anomaly_corr_hours{12.0};

  double lag_hours{5.0};
  /// Fractional load change per standard deviation of temperature.
  double coupling{0.25};
  double noise_sd_mw{0.3};
  std::uint64_t seed{1};

  std::set<Date> holidays;

  void validate() const;
};

struct GroundTruth {
  double lag_hours{0.0};
  /// Instantaneous, max, mean leads the construction should favour: (L, L, 2L).
  std::array<double, 3> expected_leads{};
  stats::Group group{stats::Group::Group1};
  TimeOfDayWindow uptick;
  /// Variance of the temperature-driven load term over the noise variance; empty when
  /// the noise is zero.
  std::optional<double> snr;
  std::uint64_t seed{0};
};

struct SynthOutput {
  ingest::LoadSeries load;
  ingest::TempSeries temp;
  GroundTruth truth;
};

/// load = base * duck(time of day) * weekly * (1 + coupling * Tn(t - lag)) + uptick + noise,
/// with Tn the standardised temperature. Deterministic per seed. Throws DataError
/// when the noiseless load is not strictly positive.
[[nodiscard]] SynthOutput synth_generate(const SynthSpec& spec);

// ---------------------------------------------------------------------------
// Experiment harnesses

struct StationData {
  ingest::StationMeta meta;
  ingest::LoadSeries load;
  ingest::TempSeries temp;
};

/// Everything shared by the configurations compared inside one experiment.
struct ExperimentSettings {
  features::CalendarConfig calendar;
  features::WindowSpec window;
  neural::ModelConfig model;
  neural::TrainConfig train;
  std::set<features::Season> train_seasons;
  std::set<features::Season> test_seasons;
  /// Keep every k-th training window.
  int train_stride{1};
  std::optional<TimeOfDayWindow> exclusion;
};

struct RunResult {
  std::string label;
  features::WindowSpec window;
  std::uint64_t model_seed{0};
  std::uint64_t shuffle_seed{0};
  MetricsReport metrics;
  std::vector<Instant> times;
  std::vector<double> actual;
  std::vector<double> predicted;
  neural::TrainedModel model;
};

struct PreparedSplit {
  features::Dataset train;  // after train_stride
  features::Dataset test;
};

/// Windows and scaler for one configuration; the training split is thinned by train_stride.
[[nodiscard]] PreparedSplit prepare_split(const StationData& data, const ExperimentSettings& settings,
                                          const features::WindowSpec& window);

/// Builds the split, trains from scratch and evaluates on the test seasons.
[[nodiscard]] RunResult run_configuration(const StationData& data, const ExperimentSettings& settings,
                                          const features::WindowSpec& window, const std::string& label);

struct Step1Row {
  int n_points{0};
  neural::CellKind cell{neural::CellKind::GRU};
  RunResult run;
};

struct Step1Report {
  std::vector<Step1Row> rows;
  /// Per cell kind, the first length whose MAPE is within 2% (relative) of that kind's best.
  std::map<neural::CellKind, int> plateau_length;
};

[[nodiscard]] Step1Report step1_input_length_sweep(const StationData& data, const ExperimentSettings& settings,
                                                   std::span<const int> lengths,
                                                   std::span<const neural::CellKind> cells);

struct Step2Row {
  features::DayLabelScheme scheme{features::DayLabelScheme::None};
  RunResult run;
  stats::KdeResult error_kde;  // signed errors actual - predicted (MW)
};

struct Step2Report {
  std::vector<Step2Row> rows;
};

[[nodiscard]] Step2Report step2_calendar_comparison(const StationData& data, const ExperimentSettings& settings,
                                                    std::span<const features::DayLabelScheme> schemes);

struct Step3Row {
  features::TemperatureCondition condition;
  RunResult run;
};

struct Step3Report {
  std::vector<Step3Row> rows;
};

/// One model per condition. The list must contain the None and Simultaneous baselines.
[[nodiscard]] Step3Report step3_temperature_conditions(const StationData& data, const ExperimentSettings& settings,
                                                       std::span<const features::TemperatureCondition> conditions);

/// None, Simultaneous, then the best-rho and best-r2 condition of each kind (deduplicated).
[[nodiscard]] std::vector<features::TemperatureCondition> step3_panel(const stats::BestConditions& best);

struct SweepSet {
  std::vector<stats::SweepResult> sweeps;  // instantaneous, max, mean
  stats::BestConditions best;
  stats::Group group{stats::Group::Group1};
};

[[nodiscard]] SweepSet sweep_station(const StationData& data);

/// Column order of the Table-2-shaped output.
inline constexpr std::array<const char*, 3> kStep4Conditions{"no_temp", "best_correl", "three_temps"};

struct Step4Station {
  std::string station_id;
  SweepSet sweep;
  features::TemperatureCondition best_condition;
  std::vector<features::TemperatureCondition> combination;
  bool combination_collapsed{false};
  std::array<RunResult, 3> runs;  // indexed like kStep4Conditions
  stats::DispersionReport load_dispersion;
  stats::DispersionReport temp_dispersion;
  std::map<std::string, double> region_factors;
};

struct FactorCorrelation {
  std::string factor;
  std::size_t stations{0};
  double rho{0.0};
};

struct Step4Report {
  std::vector<Step4Station> stations;
  std::vector<FactorCorrelation> factor_correlations;
  std::vector<std::string> notices;
};

/// Per station: sweeps, group, then no-temperature, best-rho and three-temperature
/// (group prototype leads) models. Factor correlations use the best-rho MAPE.
[[nodiscard]] Step4Report step4_generalise(std::span<const StationData> stations, const ExperimentSettings& settings);

struct RotationPlan {
  std::string name;
  std::set<features::Season> train;
  std::set<features::Season> test;

  void validate() const;
};

/// Original and Test 1-4 layouts over the 15-16 .. 19-20 seasons.
[[nodiscard]] std::vector<RotationPlan> rotation_presets();

struct RotationRow {
  RotationPlan plan;
  RunResult run;
};

struct RotationReport {
  std::vector<RotationRow> rows;
  /// (max - min) / min over the plans' MAPE.
  double relative_mape_spread{0.0};
};

[[nodiscard]] RotationReport rotation_robustness(const StationData& data, const ExperimentSettings& settings,
                                                 std::span<const RotationPlan> plans);

struct CostBenefitInput {
  double annual_consumption_twh{0.0};
  double mape_baseline{0.0};  // percent
  double mape_method{0.0};    // percent
  double tariff_per_kwh{0.0};
  /// Significant figures applied to the energy reduction before pricing.
  std::optional<int> significant_figures;
};

struct CostBenefitResult {
  double energy_reduction_twh{0.0};
  double saving{0.0};  // currency per year
};

[[nodiscard]] double round_significant(double value, int figures);
[[nodiscard]] CostBenefitResult cost_benefit(const CostBenefitInput& input);

}  // namespace stlf::experiments
