#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stlf/features.hpp"
#include "stlf/ingest.hpp"
#include "stlf/time.hpp"

namespace stlf::stats {

/// Pearson correlation. Throws DataError on length mismatch, fewer than 2 samples
/// or a zero-variance input.
[[nodiscard]] double pearson(std::span<const double> x, std::span<const double> y);

/// r^2 of the least-squares polynomial fit y ~ x of order 1 or 2, clamped to [0, 1].
[[nodiscard]] double polyfit_r2(std::span<const double> x, std::span<const double> y, int order);

/// Percentile p in [0, 100], linear interpolation between order statistics
/// (rank h = (n - 1) p / 100).
[[nodiscard]] double percentile(std::span<const double> values, double p);

/// (Q3 - Q1) / (Q3 + Q1). Throws DataError when Q3 + Q1 == 0.
[[nodiscard]] double cqv(std::span<const double> values);

/// Population variance, sum((x - mean)^2) / N.
[[nodiscard]] double population_variance(std::span<const double> values);

struct SweepRecord {
  double lead_hours{0.0};
  double rho{0.0};
  double r2_order1{0.0};
  double r2_order2{0.0};
};

struct SweepResult {
  features::ConditionKind kind{features::ConditionKind::Instantaneous};
  std::vector<SweepRecord> records;
  /// Number of time steps every record was computed over.
  std::size_t sample_count{0};
};

/// 0.5, 1.0, ..., 24.0.
[[nodiscard]] std::vector<double> sweep_leads();

/// Correlates load(t) with the condition value at t for every lead on the sweep grid.
/// All leads use the same set of t (where the longest lead is defined). Throws
/// DataError when the series cover less than 48 h.
[[nodiscard]] SweepResult lead_sweep(const ingest::LoadSeries& load, const ingest::TempSeries& temp,
                                     features::ConditionKind kind);

struct KindBest {
  features::ConditionKind kind{features::ConditionKind::Instantaneous};
  double best_rho_lead{0.0};
  double best_rho_value{0.0};
  double best_r2o2_lead{0.0};
  double best_r2o2_value{0.0};
};

struct BestConditions {
  KindBest instantaneous;
  KindBest max;
  KindBest mean;

  [[nodiscard]] const KindBest& of(features::ConditionKind kind) const;
  /// Single condition with the highest rho across the three kinds.
  [[nodiscard]] features::TemperatureCondition best_rho_condition() const;
  /// The three best-rho conditions, then the three best-r2 conditions, duplicates removed.
  [[nodiscard]] std::vector<features::TemperatureCondition> panel() const;
};

/// Per kind, the leads that maximise rho and order-2 r^2. Ties go to the smaller lead.
[[nodiscard]] BestConditions best_conditions(std::span<const SweepResult> sweeps);

enum class Group { Group1, Group2 };

[[nodiscard]] std::string to_string(Group g);
/// Lead-hour prototypes (instantaneous, max, mean): (2, 2, 4) and (4, 4, 8).
[[nodiscard]] std::array<double, 3> group_prototype(Group g);
/// Nearest prototype in L1 distance over the best-rho leads; ties go to Group1.
[[nodiscard]] Group classify_group(const BestConditions& best);

struct SlotStats {
  std::optional<double> mean_weekday;
  std::optional<double> mean_weekend;
  double p5{0.0}, p25{0.0}, p50{0.0}, p75{0.0}, p95{0.0};
};

struct DailyProfile {
  std::array<SlotStats, kSlotsPerDay> slots;
};

/// Per half-hour slot: means over working and non-working days (weekends and
/// holidays), percentiles over all days. Needs at least 7 days of data.
[[nodiscard]] DailyProfile daily_profile(std::span<const Instant> times, std::span<const double> values,
                                         const features::CalendarConfig& cal);

struct DispersionReport {
  double sigma2{0.0};
  std::optional<double> cqv;
};

[[nodiscard]] DispersionReport dispersion(std::span<const double> values);

struct KdeResult {
  double bandwidth{0.0};
  std::vector<double> grid;
  std::vector<double> density;
  std::vector<double> cumulative;
};

/// Silverman bandwidth 0.9 min(sd, IQR / 1.34) n^(-1/5), falling back to sd when IQR is 0.
[[nodiscard]] double silverman_bandwidth(std::span<const double> samples);

/// Gaussian KDE on `grid`; cumulative is the running trapezoidal integral.
[[nodiscard]] KdeResult kde(std::span<const double> samples, std::span<const double> grid);

/// Evenly spaced grid covering the samples +- `pad_bandwidths` bandwidths.
[[nodiscard]] std::vector<double> kde_grid(std::span<const double> samples, std::size_t points = 201,
                                           double pad_bandwidths = 5.0);

}  // namespace stlf::stats
