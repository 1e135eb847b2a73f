#include "stlf/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "stlf/error.hpp"

namespace stlf::stats {

using features::ConditionKind;
using features::TemperatureCondition;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kSweepSteps = 48;

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double percentile_sorted(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Regular half-hourly grid of raw samples, NaN where missing.
struct Grid {
  Instant start;
  std::vector<double> load;
  std::vector<double> temp;
};

Grid to_grid(const ingest::LoadSeries& load, const ingest::TempSeries& temp) {
  if (load.points.empty() || temp.points.empty()) throw DataError("lead sweep needs non-empty load and temperature");
  const Instant first = std::min(load.points.front().time, temp.points.front().time);
  const Instant last = std::max(load.points.back().time, temp.points.back().time);
  Grid g;
  g.start = first;
  const auto n = static_cast<std::size_t>((last.epoch_minutes - first.epoch_minutes) / kStepMinutes + 1);
  g.load.assign(n, kNaN);
  g.temp.assign(n, kNaN);
  auto idx = [&](Instant t) {
    const auto d = t.epoch_minutes - first.epoch_minutes;
    if (d % kStepMinutes != 0) throw DataError("timestamp off the half-hour grid: " + format_instant(t));
    return static_cast<std::size_t>(d / kStepMinutes);
  };
  for (const auto& p : load.points) g.load[idx(p.time)] = p.load_mw;
  for (const auto& p : temp.points) g.temp[idx(p.time)] = p.temp_c;
  return g;
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pearson: length mismatch");
  if (x.size() < 2) throw DataError("pearson: need at least 2 samples");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DataError("pearson: zero variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double polyfit_r2(std::span<const double> x, std::span<const double> y, int order) {
  if (order != 1 && order != 2) throw DataError("polyfit_r2: order must be 1 or 2");
  if (x.size() != y.size()) throw DataError("polyfit_r2: length mismatch");
  const auto n = x.size();
  if (n < static_cast<std::size_t>(order) + 2) throw DataError("polyfit_r2: too few samples");
  const double mx = mean_of(x);
  double sx = 0.0;
  for (double v : x) sx += (v - mx) * (v - mx);
  sx = std::sqrt(sx / static_cast<double>(n));
  if (!(sx > 0.0)) throw DataError("polyfit_r2: x has zero variance");
  const double my = mean_of(y);
  double ss_tot = 0.0;
  for (double v : y) ss_tot += (v - my) * (v - my);
  if (!(ss_tot > 0.0)) throw DataError("polyfit_r2: y has zero variance");

  // centred, scaled abscissa keeps the Vandermonde columns well conditioned
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), order + 1);
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (x[i] - mx) / sx;
    const auto r = static_cast<Eigen::Index>(i);
    a(r, 0) = 1.0;
    a(r, 1) = u;
    if (order == 2) a(r, 2) = u * u;
    b(r) = y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-12);
  if (qr.rank() < order + 1) throw DataError("polyfit_r2: singular normal equations");
  const Eigen::VectorXd coef = qr.solve(b);
  const double ss_res = (a * coef - b).squaredNorm();
  return std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw DataError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw DataError("percentile must lie in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return percentile_sorted(sorted, p);
}

double cqv(std::span<const double> values) {
  if (values.empty()) throw DataError("cqv of an empty set");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = percentile_sorted(sorted, 25.0);
  const double q3 = percentile_sorted(sorted, 75.0);
  if (q3 + q1 == 0.0) throw DataError("cqv undefined: Q3 + Q1 = 0");
  return (q3 - q1) / (q3 + q1);
}

double population_variance(std::span<const double> values) {
  if (values.empty()) throw DataError("variance of an empty set");
  const double mu = mean_of(values);
  double s = 0.0;
  for (double v : values) s += (v - mu) * (v - mu);
  return s / static_cast<double>(values.size());
}

std::vector<double> sweep_leads() {
  std::vector<double> leads;
  for (int k = 1; k <= kSweepSteps; ++k) leads.push_back(0.5 * k);
  return leads;
}

SweepResult lead_sweep(const ingest::LoadSeries& load, const ingest::TempSeries& temp, ConditionKind kind) {
  if (kind != ConditionKind::Instantaneous && kind != ConditionKind::WindowMax && kind != ConditionKind::WindowMean) {
    throw DataError("lead sweep is defined for instantaneous, max and mean conditions");
  }
  const Grid g = to_grid(load, temp);
  const std::size_t n = g.load.size();
  if (n < 2 * static_cast<std::size_t>(kSweepSteps)) throw DataError("lead sweep needs at least 48 h of data");

  // condition values for every lead, built incrementally from lead L-1 to L
  std::vector<std::vector<double>> cond(kSweepSteps, std::vector<double>(n, kNaN));
  for (std::size_t t = kSweepSteps; t < n; ++t) {
    double run_max = g.temp[t], run_sum = g.temp[t];
    for (int k = 1; k <= kSweepSteps; ++k) {
      const double v = g.temp[t - static_cast<std::size_t>(k)];
      run_max = std::isnan(v) || std::isnan(run_max) ? kNaN : std::max(run_max, v);
      run_sum += v;
      double out = kNaN;
      switch (kind) {
        case ConditionKind::Instantaneous: out = v; break;
        case ConditionKind::WindowMax: out = run_max; break;
        default: out = run_sum / static_cast<double>(k + 1); break;
      }
      cond[static_cast<std::size_t>(k - 1)][t] = out;
    }
  }
  std::vector<std::size_t> valid;
  for (std::size_t t = kSweepSteps; t < n; ++t) {
    if (std::isnan(g.load[t])) continue;
    bool ok = true;
    for (int k = 0; k < kSweepSteps && ok; ++k) ok = !std::isnan(cond[static_cast<std::size_t>(k)][t]);
    if (ok) valid.push_back(t);
  }
  if (valid.size() < 4) throw DataError("lead sweep: too few time steps with 24 h of temperature history");

  SweepResult result;
  result.kind = kind;
  result.sample_count = valid.size();
  std::vector<double> y(valid.size()), x(valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i) y[i] = g.load[valid[i]];
  const auto leads = sweep_leads();
  for (int k = 0; k < kSweepSteps; ++k) {
    for (std::size_t i = 0; i < valid.size(); ++i) x[i] = cond[static_cast<std::size_t>(k)][valid[i]];
    SweepRecord rec;
    rec.lead_hours = leads[static_cast<std::size_t>(k)];
    rec.rho = pearson(x, y);
    rec.r2_order1 = polyfit_r2(x, y, 1);
    rec.r2_order2 = polyfit_r2(x, y, 2);
    result.records.push_back(rec);
  }
  return result;
}

const KindBest& BestConditions::of(ConditionKind kind) const {
  switch (kind) {
    case ConditionKind::Instantaneous: return instantaneous;
    case ConditionKind::WindowMax: return max;
    case ConditionKind::WindowMean: return mean;
    default: throw DataError("no best condition for kind " + features::to_string(kind));
  }
}

TemperatureCondition BestConditions::best_rho_condition() const {
  const KindBest* best = &instantaneous;
  for (const KindBest* k : {&max, &mean}) {
    if (k->best_rho_value > best->best_rho_value) best = k;
  }
  return {best->kind, best->best_rho_lead};
}

std::vector<TemperatureCondition> BestConditions::panel() const {
  std::vector<TemperatureCondition> out;
  for (const KindBest* k : {&instantaneous, &max, &mean}) out.push_back({k->kind, k->best_rho_lead});
  for (const KindBest* k : {&instantaneous, &max, &mean}) out.push_back({k->kind, k->best_r2o2_lead});
  return features::dedupe_conditions(out);
}

BestConditions best_conditions(std::span<const SweepResult> sweeps) {
  BestConditions out;
  bool seen[3] = {false, false, false};
  for (const auto& s : sweeps) {
    if (s.records.empty()) throw DataError("best_conditions: empty sweep");
    std::vector<SweepRecord> recs = s.records;
    std::stable_sort(recs.begin(), recs.end(),
                     [](const SweepRecord& a, const SweepRecord& b) { return a.lead_hours < b.lead_hours; });
    KindBest kb;
    kb.kind = s.kind;
    kb.best_rho_lead = recs.front().lead_hours;
    kb.best_rho_value = recs.front().rho;
    kb.best_r2o2_lead = recs.front().lead_hours;
    kb.best_r2o2_value = recs.front().r2_order2;
    for (const auto& r : recs) {
      if (r.rho > kb.best_rho_value) {
        kb.best_rho_value = r.rho;
        kb.best_rho_lead = r.lead_hours;
      }
      if (r.r2_order2 > kb.best_r2o2_value) {
        kb.best_r2o2_value = r.r2_order2;
        kb.best_r2o2_lead = r.lead_hours;
      }
    }
    switch (s.kind) {
      case ConditionKind::Instantaneous: out.instantaneous = kb; seen[0] = true; break;
      case ConditionKind::WindowMax: out.max = kb; seen[1] = true; break;
      case ConditionKind::WindowMean: out.mean = kb; seen[2] = true; break;
      default: throw DataError("best_conditions: unexpected sweep kind");
    }
  }
  if (!seen[0] || !seen[1] || !seen[2]) throw DataError("best_conditions needs instantaneous, max and mean sweeps");
  return out;
}

std::string to_string(Group g) { return g == Group::Group1 ? "group1" : "group2"; }

std::array<double, 3> group_prototype(Group g) {
  return g == Group::Group1 ? std::array<double, 3>{2.0, 2.0, 4.0} : std::array<double, 3>{4.0, 4.0, 8.0};
}

Group classify_group(const BestConditions& best) {
  const std::array<double, 3> leads{best.instantaneous.best_rho_lead, best.max.best_rho_lead,
                                    best.mean.best_rho_lead};
  auto l1 = [&](Group g) {
    const auto p = group_prototype(g);
    double d = 0.0;
    for (std::size_t i = 0; i < 3; ++i) d += std::abs(leads[i] - p[i]);
    return d;
  };
  return l1(Group::Group1) <= l1(Group::Group2) ? Group::Group1 : Group::Group2;
}

DailyProfile daily_profile(std::span<const Instant> times, std::span<const double> values,
                           const features::CalendarConfig& cal) {
  if (times.size() != values.size()) throw DataError("daily_profile: length mismatch");
  if (times.empty()) throw DataError("daily_profile: empty series");
  const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
  if (hi->epoch_minutes - lo->epoch_minutes < 6 * 24 * 60) throw DataError("daily_profile: series spans under 7 days");
  std::array<std::vector<double>, kSlotsPerDay> all, work, rest;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto slot = static_cast<std::size_t>(slot_of_day(times[i]));
    all[slot].push_back(values[i]);
    (cal.is_non_working(date_of(times[i])) ? rest : work)[slot].push_back(values[i]);
  }
  DailyProfile profile;
  for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
    if (all[s].empty()) throw DataError("daily_profile: slot " + std::to_string(s) + " has no data");
    auto& out = profile.slots[s];
    if (!work[s].empty()) out.mean_weekday = mean_of(work[s]);
    if (!rest[s].empty()) out.mean_weekend = mean_of(rest[s]);
    std::sort(all[s].begin(), all[s].end());
    out.p5 = percentile_sorted(all[s], 5.0);
    out.p25 = percentile_sorted(all[s], 25.0);
    out.p50 = percentile_sorted(all[s], 50.0);
    out.p75 = percentile_sorted(all[s], 75.0);
    out.p95 = percentile_sorted(all[s], 95.0);
  }
  return profile;
}

DispersionReport dispersion(std::span<const double> values) {
  DispersionReport r;
  r.sigma2 = population_variance(values);
  try {
    r.cqv = cqv(values);
  } catch (const DataError&) {
    r.cqv.reset();
  }
  return r;
}

double silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw DataError("kde needs at least 2 samples");
  const double n = static_cast<double>(samples.size());
  const double mu = mean_of(samples);
  double ss = 0.0;
  for (double v : samples) ss += (v - mu) * (v - mu);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw DataError("kde: samples have zero spread");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = percentile_sorted(sorted, 75.0) - percentile_sorted(sorted, 25.0);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

KdeResult kde(std::span<const double> samples, std::span<const double> grid) {
  KdeResult r;
  r.bandwidth = silverman_bandwidth(samples);
  r.grid.assign(grid.begin(), grid.end());
  const double h = r.bandwidth;
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  r.density.reserve(grid.size());
  for (double g : grid) {
    double s = 0.0;
    for (double x : samples) {
      const double u = (g - x) / h;
      s += std::exp(-0.5 * u * u);
    }
    r.density.push_back(s * norm);
  }
  r.cumulative.assign(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    r.cumulative[i] = r.cumulative[i - 1] + 0.5 * (r.density[i] + r.density[i - 1]) * (grid[i] - grid[i - 1]);
  }
  return r;
}

std::vector<double> kde_grid(std::span<const double> samples, std::size_t points, double pad_bandwidths) {
  if (points < 2) throw DataError("kde grid needs at least 2 points");
  const double h = silverman_bandwidth(samples);
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  const double a = *lo - pad_bandwidths * h, b = *hi + pad_bandwidths * h;
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

}  // namespace stlf::stats
