#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "stlf/error.hpp"
#include "stlf/stats.hpp"
#include "test_support.hpp"

using namespace stlf;
using namespace stlf::stats;
using features::ConditionKind;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -10, double hi = 10) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

std::vector<double> one_to_hundred() {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

SweepResult sweep_with(ConditionKind kind, const std::vector<double>& rho) {
  SweepResult s;
  s.kind = kind;
  const auto leads = sweep_leads();
  for (std::size_t i = 0; i < leads.size(); ++i) s.records.push_back({leads[i], rho[i], rho[i], rho[i]});
  return s;
}

BestConditions best_from(double inst, double mx, double mean) {
  BestConditions b;
  b.instantaneous = {ConditionKind::Instantaneous, inst, 0.5, inst, 0.5};
  b.max = {ConditionKind::WindowMax, mx, 0.5, mx, 0.5};
  b.mean = {ConditionKind::WindowMean, mean, 0.5, mean, 0.5};
  return b;
}

/// AR(1) temperature so neighbouring leads are distinguishable but correlated.
std::vector<double> ar_temperature(Rng& rng, std::size_t n) {
  std::vector<double> t(n);
  double a = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a = 0.9 * a + rng.normal();
    t[i] = 20.0 + 3.0 * a;
  }
  return t;
}

}  // namespace

TEST_CASE("pearson examples") {
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == doctest::Approx(1.0));
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK_THROWS_AS((void)pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DataError);
  CHECK_THROWS_AS((void)pearson(std::vector<double>{1}, std::vector<double>{1}), DataError);
  CHECK_THROWS_AS((void)pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), DataError);
}

TEST_CASE("pearson affine property and symmetry") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_vec(rng, 20), y = random_vec(rng, 20);
    const double r = pearson(x, y);
    CHECK(std::abs(r - pearson(y, x)) <= 1e-12);
    const double a = rng.uniform(-5, 5), c = rng.uniform(-5, 5), b = rng.uniform(-100, 100), d = rng.uniform(-100, 100);
    if (std::abs(a) < 1e-3 || std::abs(c) < 1e-3) continue;
    std::vector<double> xa(x.size()), yc(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      xa[i] = a * x[i] + b;
      yc[i] = c * y[i] + d;
    }
    const double sign = (a * c > 0) ? 1.0 : -1.0;
    CHECK(std::abs(pearson(xa, yc) - sign * r) <= 1e-10);
  }
}

TEST_CASE("polyfit r2 examples") {
  const std::vector<double> x{-2, -1, 0, 1, 2};
  const std::vector<double> lin{1, 3, 5, 7, 9};
  const std::vector<double> sq{4, 1, 0, 1, 4};
  CHECK(polyfit_r2(x, lin, 1) == doctest::Approx(1.0));
  CHECK(polyfit_r2(x, sq, 2) == doctest::Approx(1.0));
  CHECK(polyfit_r2(x, sq, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(oracle::polyfit_r2(x, sq, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS((void)polyfit_r2(std::vector<double>{1, 1, 1, 1}, lin, 1), DataError);
  CHECK_THROWS_AS((void)polyfit_r2(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}, 2), DataError);
  CHECK_THROWS_AS((void)polyfit_r2(x, lin, 3), DataError);
}

TEST_CASE("polyfit nested models and agreement with the oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_vec(rng, 30);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 0.3 * x[i] * x[i] - x[i] + rng.normal() * 5;
    const double r1 = polyfit_r2(x, y, 1), r2 = polyfit_r2(x, y, 2);
    CHECK(r2 >= r1 - 1e-10);
    CHECK(oracle::close(r1, oracle::polyfit_r2(x, y, 1)));
    CHECK(oracle::close(r2, oracle::polyfit_r2(x, y, 2)));
  }
}

TEST_CASE("percentiles and cqv") {
  const auto v = one_to_hundred();
  CHECK(percentile(v, 50) == 50.5);
  CHECK(percentile(v, 25) == 25.75);
  CHECK(percentile(v, 75) == 75.25);
  CHECK(percentile(v, 0) == 1.0);
  CHECK(percentile(v, 100) == 100.0);
  CHECK(cqv(v) == doctest::Approx((75.25 - 25.75) / (75.25 + 25.75)));
  CHECK(cqv(v) == doctest::Approx(0.4901).epsilon(1e-4));
  CHECK(cqv(std::vector<double>(10, 3.0)) == 0.0);
  CHECK_THROWS_AS((void)cqv(std::vector<double>{-1, -1, 1, 1}), DataError);
  CHECK_THROWS_AS((void)percentile(std::vector<double>{}, 50), DataError);

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_vec(rng, 1 + rng.below(40), 1, 50);
    for (double p : {5.0, 25.0, 50.0, 75.0, 95.0}) CHECK(oracle::close(percentile(x, p), oracle::percentile(x, p)));
    CHECK(oracle::close(cqv(x), oracle::cqv(x)));
    std::vector<double> scaled = x, shifted = x;
    for (auto& s : scaled) s *= 3.7;
    for (auto& s : shifted) s += 10.0;
    CHECK(std::abs(cqv(scaled) - cqv(x)) <= 1e-12);
    if (cqv(x) != 0.0) CHECK(std::abs(cqv(shifted) - cqv(x)) > 1e-6);
  }
}

TEST_CASE("population variance and dispersion") {
  CHECK(population_variance(std::vector<double>{1, 2, 3, 4}) == doctest::Approx(1.25));
  const auto d = dispersion(std::vector<double>{1, 2, 3, 4});
  CHECK(d.sigma2 == doctest::Approx(1.25));
  REQUIRE(d.cqv.has_value());
  const auto z = dispersion(std::vector<double>{-1, -1, 1, 1});
  CHECK(!z.cqv.has_value());
}

TEST_CASE("best conditions: boundary maximum and tie rule") {
  const auto leads = sweep_leads();
  REQUIRE(leads.size() == 48);
  CHECK(leads.front() == 0.5);
  CHECK(leads.back() == 24.0);
  std::vector<double> dec(48), tie(48, 0.1);
  for (std::size_t i = 0; i < 48; ++i) dec[i] = 1.0 - 0.01 * static_cast<double>(i);
  tie[7] = 0.9;   // 4.0 h
  tie[11] = 0.9;  // 6.0 h
  const std::vector<SweepResult> sweeps{sweep_with(ConditionKind::Instantaneous, dec),
                                        sweep_with(ConditionKind::WindowMax, tie),
                                        sweep_with(ConditionKind::WindowMean, tie)};
  const auto b = best_conditions(sweeps);
  CHECK(b.instantaneous.best_rho_lead == 0.5);
  CHECK(b.max.best_rho_lead == 4.0);
  CHECK(b.max.best_r2o2_lead == 4.0);
  CHECK(b.best_rho_condition() == features::TemperatureCondition::instantaneous(0.5));
  CHECK(b.panel().size() == 3);
  CHECK_THROWS_AS((void)best_conditions(std::span<const SweepResult>(sweeps.data(), 2)), DataError);
}

TEST_CASE("group classification") {
  CHECK(classify_group(best_from(2, 2, 4)) == Group::Group1);
  CHECK(classify_group(best_from(4, 4, 8.5)) == Group::Group2);
  CHECK(classify_group(best_from(3, 3, 6)) == Group::Group1);
  CHECK(classify_group(best_from(1, 1, 2)) == Group::Group1);
  CHECK(classify_group(best_from(6, 5, 11)) == Group::Group2);
  CHECK(to_string(Group::Group2) == "group2");
}

TEST_CASE("lead sweep: white noise load shows no correlation") {
  Rng rng(21);
  const std::size_t n = 10000;
  std::vector<double> load(n);
  for (auto& x : load) x = 50.0 + rng.normal();
  const auto temp = ar_temperature(rng, n);
  const Instant t0 = make_instant(2016, 1, 1);
  for (auto kind : {ConditionKind::Instantaneous, ConditionKind::WindowMax, ConditionKind::WindowMean}) {
    const auto s = lead_sweep(test::load_from(t0, load), test::temp_from(t0, temp), kind);
    CHECK(s.records.size() == 48);
    for (const auto& r : s.records) CHECK(std::abs(r.rho) < 0.1);
  }
}

TEST_CASE("lead sweep: planted lag is recovered and is invariant to affine rescaling") {
  Rng rng(9);
  const std::size_t n = 4000;
  const auto temp = ar_temperature(rng, n);
  const Instant t0 = make_instant(2016, 1, 1);
  for (int lag_steps : {2, 6, 10, 16}) {
    std::vector<double> load(n, 30.0);
    for (std::size_t i = static_cast<std::size_t>(lag_steps); i < n; ++i) {
      load[i] = 30.0 + temp[i - static_cast<std::size_t>(lag_steps)] + 0.2 * rng.normal();
    }
    const auto s = lead_sweep(test::load_from(t0, load), test::temp_from(t0, temp), ConditionKind::Instantaneous);
    CHECK(s.sample_count == n - 48);
    std::vector<SweepResult> all{s, lead_sweep(test::load_from(t0, load), test::temp_from(t0, temp), ConditionKind::WindowMax),
                                 lead_sweep(test::load_from(t0, load), test::temp_from(t0, temp), ConditionKind::WindowMean)};
    const auto b = best_conditions(all);
    CHECK(b.instantaneous.best_rho_lead == doctest::Approx(lag_steps / 2.0));

    std::vector<double> load2 = load, temp2 = temp;
    for (auto& x : load2) x = 2.5 * x - 40.0;
    for (auto& x : temp2) x = 1.8 * x + 32.0;
    const auto s2 = lead_sweep(test::load_from(t0, load2), test::temp_from(t0, temp2), ConditionKind::Instantaneous);
    std::vector<SweepResult> all2{s2, all[1], all[2]};
    CHECK(best_conditions(all2).instantaneous.best_rho_lead == b.instantaneous.best_rho_lead);
  }
  CHECK_THROWS_AS((void)lead_sweep(test::load_from(t0, std::vector<double>(90, 1.0)),
                                   test::temp_from(t0, std::vector<double>(90, 1.0)), ConditionKind::WindowMax),
                  DataError);
}

TEST_CASE("daily profile") {
  const Instant t0 = make_instant(2016, 1, 4);  // Monday
  features::CalendarConfig cal;
  SUBCASE("constant series") {
    std::vector<Instant> times;
    std::vector<double> values;
    for (int i = 0; i < 48 * 14; ++i) {
      times.push_back(t0.plus_steps(i));
      values.push_back(7.5);
    }
    const auto p = daily_profile(times, values, cal);
    for (const auto& s : p.slots) {
      CHECK(*s.mean_weekday == 7.5);
      CHECK(*s.mean_weekend == 7.5);
      CHECK(s.p5 == 7.5);
      CHECK(s.p95 == 7.5);
    }
  }
  SUBCASE("one hundred days give p50 = 50.5 and weekday-only data has no weekend mean") {
    std::vector<Instant> times;
    std::vector<double> values;
    int day_value = 0;
    for (int d = 0; d < 140; ++d) {
      const Date date = make_date(2016, 1, 4) + std::chrono::days(d);
      if (cal.is_non_working(date)) continue;
      ++day_value;
      if (day_value > 100) break;
      for (int s = 0; s < 48; ++s) {
        times.push_back(make_instant(int(civil(date).year()), unsigned(civil(date).month()), unsigned(civil(date).day())).plus_steps(s));
        values.push_back(day_value);
      }
    }
    const auto p = daily_profile(times, values, cal);
    for (const auto& s : p.slots) {
      CHECK(s.p50 == 50.5);
      CHECK(!s.mean_weekend.has_value());
      CHECK(*s.mean_weekday == doctest::Approx(50.5));
    }
  }
  SUBCASE("errors") {
    std::vector<Instant> times{t0, t0.plus_steps(1)};
    std::vector<double> values{1, 2};
    CHECK_THROWS_AS((void)daily_profile(times, values, cal), DataError);
  }
}

TEST_CASE("kde properties") {
  Rng rng(17);
  std::vector<double> e(500);
  for (auto& x : e) x = rng.normal() * 2.0;
  const auto grid = kde_grid(e);
  const auto k = kde(e, grid);
  CHECK(k.bandwidth == doctest::Approx(silverman_bandwidth(e)));
  for (double d : k.density) CHECK(d >= 0.0);
  for (std::size_t i = 1; i < k.cumulative.size(); ++i) CHECK(k.cumulative[i] >= k.cumulative[i - 1]);
  CHECK(std::abs(k.cumulative.back() - 1.0) < 0.01);

  std::vector<double> sym;
  for (int i = 0; i < 200; ++i) {
    const double v = rng.uniform(0, 3);
    sym.push_back(v);
    sym.push_back(-v);
  }
  std::vector<double> sgrid;
  for (int i = -100; i <= 100; ++i) sgrid.push_back(0.05 * i);
  const auto ks = kde(sym, sgrid);
  for (std::size_t i = 0; i < sgrid.size(); ++i) CHECK(std::abs(ks.density[i] - ks.density[sgrid.size() - 1 - i]) <= 1e-9);

  std::vector<double> cluster(100, 0.0);
  for (int i = 0; i < 5; ++i) cluster.push_back(1e-3 * (i + 1));
  cluster.push_back(3.0);
  cluster.push_back(-2.0);
  const auto kc = kde(cluster, sgrid);
  const auto peak = std::max_element(kc.density.begin(), kc.density.end()) - kc.density.begin();
  CHECK(std::abs(sgrid[static_cast<std::size_t>(peak)]) <= 0.05);

  CHECK_THROWS_AS((void)kde(std::vector<double>{1.0}, sgrid), DataError);
  CHECK_THROWS_AS((void)kde(std::vector<double>{1.0, 1.0, 1.0}, sgrid), DataError);
}
