#include <doctest.h>

#include <sstream>

#include "stlf/error.hpp"
#include "stlf/ingest.hpp"
#include "test_support.hpp"

using namespace stlf;
using namespace stlf::ingest;

namespace {

LoadSeries load_text(const std::string& body) {
  std::istringstream in("timestamp,load_mw\n" + body);
  return parse_load_csv(in, "s1");
}

TempGrid grid_text(const std::string& text) {
  std::istringstream in(text);
  return parse_temp_grid(in);
}

/// 2 x 2 grid, lats {0, 1}, lons {10, 11}, one value per node per time.
TempGrid small_grid(const std::vector<std::array<double, 4>>& steps, std::int64_t step_minutes = 60) {
  TempGrid g;
  g.lat_axis = {0.0, 1.0};
  g.lon_axis = {10.0, 11.0};
  const Instant t0 = make_instant(2016, 1, 1);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    g.times.push_back(t0.plus_minutes(static_cast<std::int64_t>(k) * step_minutes));
    for (double v : steps[k]) g.values.push_back(v);
  }
  return g;
}

}  // namespace

TEST_CASE("load csv: two valid rows give two points and no gaps") {
  const auto s = load_text("2016-01-01T00:00,10.5\n2016-01-01T00:30,11.0\n");
  CHECK(s.station_id == "s1");
  REQUIRE(s.points.size() == 2);
  CHECK(s.points[1].load_mw == 11.0);
  CHECK(s.points[1].time == make_instant(2016, 1, 1, 0, 30));
  CHECK(s.gaps.empty());
}

TEST_CASE("load csv: non-positive and missing values become gaps") {
  const auto s = load_text("2016-01-01T00:00,10\n2016-01-01T00:30,-1.0\n2016-01-01T01:00,\n2016-01-01T01:30,0\n"
                           "2016-01-01T02:00,12\n");
  CHECK(s.points.size() == 2);
  REQUIRE(s.gaps.size() == 3);
  CHECK(s.gaps[0] == make_instant(2016, 1, 1, 0, 30));
  CHECK(s.gaps[2] == make_instant(2016, 1, 1, 1, 30));
}

TEST_CASE("load csv: timestamps absent from the file are listed as gaps") {
  const auto s = load_text("2016-01-01T00:00,10\n2016-01-01T01:30,12\n");
  REQUIRE(s.gaps.size() == 2);
  CHECK(s.gaps[0] == make_instant(2016, 1, 1, 0, 30));
  CHECK(s.gaps[1] == make_instant(2016, 1, 1, 1, 0));
}

TEST_CASE("load csv: out-of-order rows parse the same as sorted rows") {
  const auto a = load_text("2016-01-01T01:00,3\n2016-01-01T00:00,1\n2016-01-01T00:30,2\n");
  const auto b = load_text("2016-01-01T00:00,1\n2016-01-01T00:30,2\n2016-01-01T01:00,3\n");
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].time == b.points[i].time);
    CHECK(a.points[i].load_mw == b.points[i].load_mw);
  }
}

TEST_CASE("load csv: errors name the line") {
  CHECK_THROWS_WITH_AS(load_text("2016-01-01T00:00,1\n2016-01-01T00:00,2\n"), doctest::Contains("line 3"), DataError);
  CHECK_THROWS_WITH_AS(load_text("2016-01-01T00:00,abc\n"), doctest::Contains("line 2"), DataError);
  CHECK_THROWS_WITH_AS(load_text("2016-01-01T00:00,1,2\n"), doctest::Contains("line 2"), DataError);
  CHECK_THROWS_WITH_AS(load_text("2016-13-01T00:00,1\n"), doctest::Contains("line 2"), DataError);
  CHECK_THROWS_AS(load_text(""), DataError);
  std::istringstream wrong("time,load\n2016-01-01T00:00,1\n");
  CHECK_THROWS_AS((void)parse_load_csv(wrong, "x"), DataError);
  std::istringstream empty("");
  CHECK_THROWS_AS((void)parse_load_csv(empty, "x"), DataError);
}

TEST_CASE("load and temperature csv round trip through the writers") {
  Rng rng(5);
  std::vector<double> v(50);
  for (auto& x : v) x = rng.uniform(1.0, 100.0);
  const auto load = test::load_from(make_instant(2017, 2, 3), v);
  std::stringstream ss;
  write_load_csv(ss, load);
  const auto back = parse_load_csv(ss, "s");
  REQUIRE(back.points.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(back.points[i].load_mw == v[i]);

  const auto temp = test::temp_from(make_instant(2017, 2, 3), v);
  std::stringstream ts;
  write_temp_csv(ts, temp);
  const auto tback = parse_temp_csv(ts);
  REQUIRE(tback.points.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(tback.points[i].temp_c == v[i]);
}

TEST_CASE("temperature csv rejects non-numeric values") {
  std::istringstream in("timestamp,temp_c\n2016-01-01T00:00,warm\n");
  CHECK_THROWS_AS((void)parse_temp_csv(in), DataError);
}

TEST_CASE("grid text format parses and round trips") {
  const auto g = grid_text(
      "# comment\nlats: 0 1\nlons: 10 11 12\ntimes: 2016-01-01T00:00 2016-01-01T01:00\n"
      "1 2 3\n4 5 6\n7 8 9\n10 11 12\n");
  CHECK(g.lat_axis.size() == 2);
  CHECK(g.lon_axis.size() == 3);
  CHECK(g.at(1, 0, 2) == 9.0);
  std::stringstream ss;
  write_temp_grid(ss, g);
  const auto back = parse_temp_grid(ss);
  CHECK(back.values == g.values);
  CHECK(back.times == g.times);
}

TEST_CASE("grid validation rejects inconsistent input") {
  CHECK_THROWS_AS(grid_text("lats: 0 1\nlons: 10\ntimes: 2016-01-01T00:00\n1\n"), DataError);
  CHECK_THROWS_AS(grid_text("lats: 1 0\nlons: 10\ntimes: 2016-01-01T00:00\n1 2\n"), DataError);
  CHECK_THROWS_AS(grid_text("lats: 0\nlons: 10\n1\n"), DataError);
  CHECK_THROWS_AS(grid_text("lats: 0\nlons: 10\ntimes: 2016-01-01T00:00\nnan\n"), DataError);
}

TEST_CASE("temporal interpolation: midpoints, hand values and exact originals") {
  SUBCASE("linear midpoint") {
    const auto g = interpolate_temporal(small_grid({{10, 10, 10, 10}, {12, 12, 12, 12}}));
    REQUIRE(g.times.size() == 3);
    CHECK(g.at(1, 0, 0) == doctest::Approx(11.0));
  }
  SUBCASE("10, 14, 12 hourly") {
    const auto g = interpolate_temporal(small_grid({{10, 0, 0, 0}, {14, 0, 0, 0}, {12, 0, 0, 0}}));
    REQUIRE(g.times.size() == 5);
    CHECK(g.at(1, 0, 0) == doctest::Approx(12.0));
    CHECK(g.at(3, 0, 0) == doctest::Approx(13.0));
  }
  SUBCASE("constant field stays constant and originals are preserved bit for bit") {
    Rng rng(3);
    std::vector<std::array<double, 4>> steps(6);
    for (auto& s : steps)
      for (auto& v : s) v = rng.uniform(-5, 35);
    const auto raw = small_grid(steps);
    const auto g = interpolate_temporal(raw);
    for (std::size_t k = 0; k < raw.times.size(); ++k) {
      for (std::size_t n = 0; n < 4; ++n) CHECK(g.values[(2 * k) * 4 + n] == raw.values[k * 4 + n]);
    }
    const auto c = interpolate_temporal(small_grid({{20, 20, 20, 20}, {20, 20, 20, 20}, {20, 20, 20, 20}}));
    for (double v : c.values) CHECK(v == 20.0);
  }
  SUBCASE("idempotent at the target step") {
    const auto once = interpolate_temporal(small_grid({{1, 2, 3, 4}, {5, 6, 7, 8}, {0, 1, 0, 1}}));
    const auto twice = interpolate_temporal(once);
    CHECK(twice.times == once.times);
    CHECK(twice.values == once.values);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS((void)interpolate_temporal(small_grid({{1, 1, 1, 1}})), DataError);
    CHECK_THROWS_AS((void)interpolate_temporal(small_grid({{1, 1, 1, 1}, {2, 2, 2, 2}}, 45)), DataError);
  }
}

TEST_CASE("bilinear extraction") {
  // values ordered (lat0,lon10) (lat0,lon11) (lat1,lon10) (lat1,lon11)
  SUBCASE("node query returns the node value") {
    const auto s = extract_point_series(small_grid({{1, 2, 3, 4}}), 1.0, 11.0);
    CHECK(s.points.at(0).temp_c == doctest::Approx(4.0));
  }
  SUBCASE("constant corners") {
    const auto s = extract_point_series(small_grid({{20, 20, 20, 20}}), 0.37, 10.81);
    CHECK(s.points.at(0).temp_c == doctest::Approx(20.0));
  }
  SUBCASE("value varying only with lat") {
    const auto s = extract_point_series(small_grid({{0, 0, 10, 10}}), 0.5, 10.3);
    CHECK(s.points.at(0).temp_c == doctest::Approx(5.0));
  }
  SUBCASE("hand bilinear value") {
    const double lat = 0.25, lon = 10.75;
    const double expect = (1 - lat) * (1 - 0.75) * 1 + (1 - lat) * 0.75 * 2 + lat * (1 - 0.75) * 3 + lat * 0.75 * 4;
    CHECK(extract_point_series(small_grid({{1, 2, 3, 4}}), lat, lon).points.at(0).temp_c == doctest::Approx(expect));
  }
  SUBCASE("linear in the grid values") {
    Rng rng(9);
    std::vector<std::array<double, 4>> a(3), b(3), mix(3);
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t n = 0; n < 4; ++n) {
        a[k][n] = rng.uniform(-10, 10);
        b[k][n] = rng.uniform(-10, 10);
        mix[k][n] = 2.5 * a[k][n] - 0.75 * b[k][n];
      }
    }
    const auto ea = extract_point_series(small_grid(a), 0.3, 10.6);
    const auto eb = extract_point_series(small_grid(b), 0.3, 10.6);
    const auto em = extract_point_series(small_grid(mix), 0.3, 10.6);
    for (std::size_t k = 0; k < 3; ++k) {
      const double want = 2.5 * ea.points[k].temp_c - 0.75 * eb.points[k].temp_c;
      CHECK(std::abs(em.points[k].temp_c - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
  SUBCASE("outside the grid is an error") {
    CHECK_THROWS_AS((void)extract_point_series(small_grid({{1, 2, 3, 4}}), 1.5, 10.5), DataError);
    CHECK_THROWS_AS((void)extract_point_series(small_grid({{1, 2, 3, 4}}), 0.5, 9.0), DataError);
  }
}

TEST_CASE("align_series keeps the timestamp intersection") {
  const Instant t0 = make_instant(2016, 1, 1);
  SUBCASE("identical timestamps are unchanged") {
    const auto l = test::load_from(t0, {1, 2, 3});
    const auto t = test::temp_from(t0, {4, 5, 6});
    const auto [al, at] = align_series(l, t);
    CHECK(al.points.size() == 3);
    CHECK(at.points.size() == 3);
    const auto [al2, at2] = align_series(al, at);
    CHECK(al2.points.size() == 3);
  }
  SUBCASE("a load gap drops the temperature sample") {
    auto l = test::load_from(t0, {1, 2, 3, 4});
    l.points.erase(l.points.begin() + 1);
    const auto t = test::temp_from(t0, {4, 5, 6, 7});
    const auto [al, at] = align_series(l, t);
    REQUIRE(at.points.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(al.points[i].time == at.points[i].time);
    CHECK(at.points[1].temp_c == 6.0);
  }
  SUBCASE("disjoint ranges") {
    const auto l = test::load_from(t0, {1, 2});
    const auto t = test::temp_from(t0.plus_steps(10), {1, 2});
    CHECK_THROWS_AS((void)align_series(l, t), DataError);
  }
}

TEST_CASE("station metadata with named factors") {
  std::istringstream in("station_id,lat,lon,poverty_rate\nA,-36.7,142.2,0.12\nB,-37.5,144.0,0.08\n");
  const auto rows = parse_station_meta(in);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].station_id == "B");
  CHECK(rows[0].region_factors.at("poverty_rate") == doctest::Approx(0.12));
  std::istringstream bad("id,lat,lon\nA,1,2\n");
  CHECK_THROWS_AS((void)parse_station_meta(bad), DataError);
}
