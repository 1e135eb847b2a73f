#include <doctest.h>

#include <cmath>

#include "stlf/error.hpp"
#include "stlf/features.hpp"
#include "test_support.hpp"

using namespace stlf;
using namespace stlf::features;

namespace {

std::vector<double> ramp(std::size_t n, double a = 10.0, double b = 0.1) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + b * static_cast<double>(i);
  return v;
}

}  // namespace

TEST_CASE("day one-hot encoding") {
  CalendarConfig cal;
  const Date tue = make_date(2016, 1, 5);
  const Date sat = make_date(2016, 1, 2);
  CHECK(encode_day_onehot(tue, DayLabelScheme::EightType, cal) == std::vector<double>{0, 1, 0, 0, 0, 0, 0, 0});
  CHECK(encode_day_onehot(sat, DayLabelScheme::ThreeType, cal) == std::vector<double>{0, 1, 0});
  CHECK(encode_day_onehot(tue, DayLabelScheme::ThreeType, cal) == std::vector<double>{1, 0, 0});
  CHECK(encode_day_onehot(tue, DayLabelScheme::None, cal).empty());
  cal.holidays.insert(tue);
  CHECK(encode_day_onehot(tue, DayLabelScheme::EightType, cal) == std::vector<double>{0, 0, 0, 0, 0, 0, 0, 1});
  CHECK(encode_day_onehot(tue, DayLabelScheme::ThreeType, cal) == std::vector<double>{0, 0, 1});

  CalendarConfig sunday_first;
  sunday_first.week_start = WeekStart::Sunday;
  CHECK(encode_day_onehot(make_date(2016, 1, 3), DayLabelScheme::EightType, sunday_first)[0] == 1.0);
  CHECK(encode_day_onehot(tue, DayLabelScheme::EightType, sunday_first)[2] == 1.0);
}

TEST_CASE("every one-hot vector sums to exactly 1 over a year of dates") {
  CalendarConfig cal;
  cal.holidays = {make_date(2016, 1, 1), make_date(2016, 1, 26), make_date(2016, 12, 25)};
  for (auto scheme : {DayLabelScheme::ThreeType, DayLabelScheme::EightType}) {
    for (int d = 0; d < 400; ++d) {
      const Date date = make_date(2016, 1, 1) + std::chrono::days(d);
      const auto v = encode_day_onehot(date, scheme, cal);
      double sum = 0.0;
      int ones = 0;
      for (double x : v) {
        sum += x;
        ones += x == 1.0;
      }
      CHECK(sum == 1.0);
      CHECK(ones == 1);
    }
  }
}

TEST_CASE("scheme and condition names parse") {
  CHECK(parse_scheme("three") == DayLabelScheme::ThreeType);
  CHECK_THROWS_AS((void)parse_scheme("nine"), ConfigError);
  CHECK(parse_condition_kind("max") == ConditionKind::WindowMax);
  CHECK_THROWS_AS((void)parse_condition_kind("median"), ConfigError);
  CHECK(TemperatureCondition::instantaneous(5).label() == "instantaneous@5h");
  CHECK(TemperatureCondition::window_mean(8.5).label() == "mean@8.5h");
  CHECK(TemperatureCondition::simultaneous().label() == "simultaneous");
}

TEST_CASE("temperature condition validation") {
  CHECK_NOTHROW(TemperatureCondition::window_max(24).validate());
  CHECK_THROWS_AS(TemperatureCondition::instantaneous(0.25).validate(), ConfigError);
  CHECK_THROWS_AS(TemperatureCondition::instantaneous(24.5).validate(), ConfigError);
  CHECK_THROWS_AS(TemperatureCondition::instantaneous(-1).validate(), ConfigError);
  CHECK_THROWS_AS((TemperatureCondition{ConditionKind::None, 1.0}.validate()), ConfigError);
  CHECK_THROWS_AS((TemperatureCondition{ConditionKind::Simultaneous, 2.0}.validate()), ConfigError);
}

TEST_CASE("condition values: hand examples") {
  const std::vector<double> a{10, 11, 12, 13};
  CHECK(condition_values(a, TemperatureCondition::instantaneous(1.0))[3] == 11.0);
  const std::vector<double> b{10, 14, 12, 13};
  CHECK(condition_values(b, TemperatureCondition::window_max(1.0))[3] == 14.0);
  CHECK(condition_values(b, TemperatureCondition::window_mean(1.0))[3] == doctest::Approx(13.0));
  const auto early = condition_values(b, TemperatureCondition::window_max(1.0));
  CHECK(std::isnan(early[0]));
  CHECK(std::isnan(early[1]));
  CHECK(!std::isnan(early[2]));
}

TEST_CASE("condition values: constant input and lead-0 equivalence") {
  const std::vector<double> c(100, 20.0);
  for (auto kind : {ConditionKind::Instantaneous, ConditionKind::WindowMax, ConditionKind::WindowMean}) {
    const auto v = condition_values(c, {kind, 3.5});
    for (std::size_t i = 7; i < v.size(); ++i) CHECK(v[i] == doctest::Approx(20.0));
  }
  Rng rng(4);
  std::vector<double> t(200);
  for (auto& x : t) x = rng.uniform(5, 40);
  const auto sim = condition_values(t, TemperatureCondition::simultaneous());
  for (auto kind : {ConditionKind::Instantaneous, ConditionKind::WindowMax, ConditionKind::WindowMean}) {
    CHECK(condition_values(t, {kind, 0.0}) == sim);
  }
}

TEST_CASE("condition values: shift exactness and mean <= max") {
  Rng rng(8);
  std::vector<double> t(300);
  for (auto& x : t) x = rng.uniform(-5, 40);
  for (double lead = 0.5; lead <= 24.0; lead += 0.5) {
    const auto steps = static_cast<std::size_t>(2 * lead);
    const auto inst = condition_values(t, TemperatureCondition::instantaneous(lead));
    const auto mx = condition_values(t, TemperatureCondition::window_max(lead));
    const auto mn = condition_values(t, TemperatureCondition::window_mean(lead));
    for (std::size_t i = steps; i < t.size(); ++i) {
      CHECK(inst[i] == t[i - steps]);
      CHECK(mn[i] <= mx[i] + 1e-12);
      double brute = t[i - steps];
      for (std::size_t k = i - steps; k <= i; ++k) brute = std::max(brute, t[k]);
      CHECK(mx[i] == brute);
    }
  }
}

TEST_CASE("derive_condition_series omits points without history") {
  const auto temp = test::temp_from(make_instant(2016, 1, 1), {10, 11, 12, 13});
  const auto s = derive_condition_series(temp, TemperatureCondition::instantaneous(1.0));
  REQUIRE(s.points.size() == 2);
  CHECK(s.points[0].time == make_instant(2016, 1, 1, 1, 0));
  CHECK(s.points[0].temp_c == 10.0);
  CHECK(s.points[1].temp_c == 11.0);
}

TEST_CASE("window spec rows and dedupe") {
  WindowSpec w;
  w.n_points = 32;
  w.scheme = DayLabelScheme::EightType;
  w.conditions = {TemperatureCondition::instantaneous(5)};
  CHECK(w.rows() == 10);
  w.conditions = {TemperatureCondition::none(), TemperatureCondition::instantaneous(5),
                  TemperatureCondition::instantaneous(5), TemperatureCondition::window_max(5)};
  CHECK(w.rows() == 11);
  w.n_points = 0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}

TEST_CASE("window matrix shape and contents") {
  const Instant t0 = make_instant(2016, 1, 4, 12, 0);
  const auto load = test::load_from(t0, ramp(200));
  const auto temp = test::temp_from(t0, ramp(200, 20.0, 0.01));
  CalendarConfig cal;

  SUBCASE("paper shape: eight labels, one condition, 32 points") {
    WindowSpec spec{32, DayLabelScheme::EightType, {TemperatureCondition::instantaneous(2)}};
    const Instant at = t0.plus_steps(100);
    const auto w = build_window_matrix(load, temp, spec, cal, at);
    CHECK(w.matrix.rows() == 10);
    CHECK(w.matrix.cols() == 32);
    CHECK(w.target_time == at.plus_steps(1));
    CHECK(w.target == doctest::Approx(10.0 + 0.1 * 101));
    CHECK(w.matrix(0, 31) == doctest::Approx(10.0 + 0.1 * 100));
    CHECK(w.matrix(0, 0) == doctest::Approx(10.0 + 0.1 * 69));
    // condition for column c is read at that column's forecast time minus the 2 h lead
    for (int c = 0; c < 32; ++c) {
      const double idx = 69 + c + 1 - 4;
      CHECK(w.matrix(9, c) == doctest::Approx(20.0 + 0.01 * idx));
    }
    for (int c = 0; c < 32; ++c) CHECK(w.matrix.block(1, c, 8, 1).sum() == 1.0);
  }
  SUBCASE("degenerate 1 x 1 window holds the previous load") {
    WindowSpec spec{1, DayLabelScheme::None, {}};
    const auto w = build_window_matrix(load, temp, spec, cal, t0.plus_steps(5));
    CHECK(w.matrix.rows() == 1);
    CHECK(w.matrix.cols() == 1);
    CHECK(w.matrix(0, 0) == doctest::Approx(10.5));
  }
  SUBCASE("consecutive windows share n - 1 columns") {
    WindowSpec spec{16, DayLabelScheme::ThreeType, {TemperatureCondition::window_mean(3)}};
    WindowBuilder b(load, temp, spec, cal);
    const auto w1 = b.build(t0.plus_steps(60));
    const auto w2 = b.build(t0.plus_steps(61));
    CHECK((w1.matrix.rightCols(15) - w2.matrix.leftCols(15)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("calendar columns follow each column's own date across midnight") {
    WindowSpec spec{32, DayLabelScheme::EightType, {}};
    const Instant at = make_instant(2016, 1, 5, 6, 0);  // Tuesday morning; history starts Monday 14:30
    const auto w = build_window_matrix(load, temp, spec, cal, at);
    CHECK(w.matrix(1, 0) == 1.0);   // Monday
    CHECK(w.matrix(2, 31) == 1.0);  // Tuesday
  }
}

TEST_CASE("gap handling in window construction") {
  const Instant t0 = make_instant(2016, 1, 4);
  auto values = ramp(100);
  auto with_gap = [&](std::size_t first, std::size_t len) {
    auto l = test::load_from(t0, values);
    l.points.erase(l.points.begin() + static_cast<long>(first), l.points.begin() + static_cast<long>(first + len));
    return l;
  };
  const auto temp = test::temp_from(t0, ramp(100, 20, 0));
  WindowSpec spec{8, DayLabelScheme::None, {}};
  CalendarConfig cal;

  SUBCASE("two missing samples are filled linearly") {
    WindowBuilder b(with_gap(40, 2), temp, spec, cal);
    const auto w = b.build(t0.plus_steps(45));
    CHECK(w.matrix(0, 2) == doctest::Approx(values[40]));
    CHECK(w.matrix(0, 3) == doctest::Approx(values[41]));
  }
  SUBCASE("three missing samples exclude the window") {
    WindowBuilder b(with_gap(40, 3), temp, spec, cal);
    CHECK_THROWS_AS((void)b.build(t0.plus_steps(45)), DataError);
    CHECK(b.try_build(t0.plus_steps(55)).has_value());
  }
  SUBCASE("a filled sample is never a target") {
    WindowBuilder b(with_gap(40, 1), temp, spec, cal);
    CHECK_THROWS_AS((void)b.build(t0.plus_steps(39)), DataError);
    CHECK(b.try_build(t0.plus_steps(40)).has_value());
  }
  SUBCASE("not enough history") {
    WindowBuilder b(test::load_from(t0, values), temp, spec, cal);
    CHECK_THROWS_AS((void)b.build(t0.plus_steps(3)), DataError);
  }
}

TEST_CASE("seasons") {
  CHECK(Season{2015}.label() == "15-16");
  CHECK(parse_season("19-20") == Season{2019});
  CHECK_THROWS_AS((void)parse_season("19-21"), ConfigError);
  CHECK_THROWS_AS((void)parse_season("2019"), ConfigError);
  CHECK(season_of(make_instant(2016, 1, 15)) == Season{2015});
  CHECK(!season_of(make_instant(2016, 7, 1)).has_value());
  CHECK(season_of(make_instant(2015, 10, 1)) == Season{2015});
  CHECK(!season_of(make_instant(2016, 4, 1)).has_value());
  CHECK(season_of(make_instant(2016, 3, 31, 23, 30)) == Season{2015});
}

namespace {

struct TwoSeasons {
  ingest::LoadSeries load;
  ingest::TempSeries temp;
};

TwoSeasons two_seasons(std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  const Instant a = make_instant(2015, 12, 1);
  const Instant b = make_instant(2016, 12, 1);
  TwoSeasons out;
  for (Instant start : {a, b}) {
    for (int i = 0; i < 48 * 10; ++i) {
      const Instant t = start.plus_steps(i);
      out.load.points.push_back({t, scale * rng.uniform(5, 30)});
      out.temp.points.push_back({t, rng.uniform(10, 35)});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("make_dataset splits by season and fits the scaler on train only") {
  const auto d = two_seasons(1);
  WindowSpec spec{8, DayLabelScheme::EightType, {TemperatureCondition::window_max(2)}};
  CalendarConfig cal;
  const std::set<Season> s15{Season{2015}}, s16{Season{2016}};
  const auto [train, test] = make_dataset(d.load, d.temp, spec, cal, s15, s16);
  REQUIRE(!train.windows.empty());
  REQUIRE(!test.windows.empty());
  CHECK(train.windows.size() == train.targets_mw.size());
  for (const auto& w : train.windows) {
    CHECK(season_of(w.target_time) == Season{2015});
    CHECK(w.matrix.minCoeff() >= 0.0);
    CHECK(w.matrix.maxCoeff() <= 1.0);
  }
  for (const auto& w : test.windows) CHECK(season_of(w.target_time) == Season{2016});
  for (std::size_t i = 0; i < test.windows.size(); ++i) {
    CHECK(test.scaler.unscale_target(test.windows[i].target) == doctest::Approx(test.targets_mw[i]));
  }

  SUBCASE("swapping seasons swaps partitions") {
    const auto [train2, test2] = make_dataset(d.load, d.temp, spec, cal, s16, s15);
    REQUIRE(train2.windows.size() == test.windows.size());
    REQUIRE(test2.windows.size() == train.windows.size());
    for (std::size_t i = 0; i < train.windows.size(); ++i) {
      CHECK(test2.windows[i].target_time == train.windows[i].target_time);
    }
  }
  SUBCASE("perturbing test data leaves the scaler unchanged") {
    auto p = d;
    for (auto& pt : p.load.points) {
      if (season_of(pt.time) == Season{2016}) pt.load_mw *= 7.0;
    }
    for (auto& pt : p.temp.points) {
      if (season_of(pt.time) == Season{2016}) pt.temp_c += 50.0;
    }
    const auto [train3, test3] = make_dataset(p.load, p.temp, spec, cal, s15, s16);
    CHECK(train3.scaler == train.scaler);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS((void)make_dataset(d.load, d.temp, spec, cal, s15, s15), ConfigError);
    CHECK_THROWS_AS((void)make_dataset(d.load, d.temp, spec, cal, {}, s15), ConfigError);
    CHECK_THROWS_AS((void)make_dataset(d.load, d.temp, spec, cal, s15, {Season{2018}}), DataError);
  }
}

TEST_CASE("scaler round trip, passthrough rows and degenerate ranges") {
  const auto d = two_seasons(2);
  WindowSpec spec{12, DayLabelScheme::ThreeType, {TemperatureCondition::instantaneous(1)}};
  CalendarConfig cal;
  WindowBuilder b(d.load, d.temp, spec, cal);
  const auto raw = b.build_where([](Instant) { return true; });
  const auto scaler = Scaler::fit(raw, spec);
  CHECK(scaler.passthrough == std::vector<bool>{false, true, true, true, false});
  for (std::size_t i = 0; i < raw.size(); i += 37) {
    const auto s = scaler.apply(raw[i]);
    CHECK(s.matrix.block(1, 0, 3, s.matrix.cols()) == raw[i].matrix.block(1, 0, 3, s.matrix.cols()));
    const auto back = scaler.invert(s);
    const double err = (back.matrix - raw[i].matrix).cwiseAbs().maxCoeff();
    CHECK(err <= 1e-12 * raw[i].matrix.cwiseAbs().maxCoeff());
    CHECK(std::abs(back.target - raw[i].target) <= 1e-12 * std::abs(raw[i].target));
  }

  auto flat = d;
  for (auto& p : flat.load.points) p.load_mw = 5.0;
  const auto [train, test] = make_dataset(flat.load, flat.temp, spec, cal, {Season{2015}}, {Season{2016}});
  for (const auto& w : train.windows) {
    for (Eigen::Index c = 0; c < w.matrix.cols(); ++c) CHECK(w.matrix(0, c) == 0.5);
  }
  CHECK(train.scaler.unscale_target(0.5) == 5.0);
}
