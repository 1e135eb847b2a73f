#include "stlf/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "stlf/error.hpp"

namespace stlf::ingest {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
  throw DataError("line " + std::to_string(line_no) + ": " + what);
}

/// Reads the header line, skipping a UTF-8 BOM. Returns false on empty input.
bool read_header(std::istream& in, std::string& header) {
  while (std::getline(in, header)) {
    if (header.size() >= 3 && static_cast<unsigned char>(header[0]) == 0xEF) header.erase(0, 3);
    if (!trim(header).empty()) return true;
  }
  return false;
}

void expect_header(std::istream& in, std::string_view col0, std::string_view col1) {
  std::string header;
  if (!read_header(in, header)) throw DataError("empty file");
  const auto cols = split_csv(header);
  if (cols.size() != 2 || cols[0] != col0 || cols[1] != col1) {
    fail_line(1, "expected header '" + std::string(col0) + "," + std::string(col1) + "', got '" +
                     std::string(trim(header)) + "'");
  }
}

Instant parse_row_time(std::string_view field, std::size_t line_no) {
  try {
    const Instant t = parse_instant(field);
    if (!t.on_half_hour()) fail_line(line_no, "timestamp not on a half-hour boundary");
    return t;
  } catch (const DataError& e) {
    if (std::string_view(e.what()).starts_with("line ")) throw;
    fail_line(line_no, e.what());
  }
}

std::vector<double> parse_axis(std::string_view rest, const char* name) {
  std::vector<double> axis;
  std::istringstream ss{std::string(rest)};
  std::string tok;
  while (ss >> tok) {
    double v = 0.0;
    if (!parse_double(tok, v) || !std::isfinite(v)) throw DataError(std::string("grid ") + name + ": bad value '" + tok + "'");
    axis.push_back(v);
  }
  if (axis.empty()) throw DataError(std::string("grid ") + name + ": empty axis");
  return axis;
}

std::string format_real(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

/// Index i with axis[i] <= x <= axis[i+1] and the fractional weight of axis[i+1].
std::pair<std::size_t, double> bracket(const std::vector<double>& axis, double x) {
  if (axis.size() == 1) return {0, 0.0};
  auto it = std::upper_bound(axis.begin(), axis.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - axis.begin());
  if (hi >= axis.size()) hi = axis.size() - 1;
  if (hi == 0) hi = 1;
  const std::size_t lo = hi - 1;
  const double w = (x - axis[lo]) / (axis[hi] - axis[lo]);
  return {lo, w};
}

}  // namespace

void TempGrid::validate() const {
  auto ascending = [](const std::vector<double>& a) {
    return std::adjacent_find(a.begin(), a.end(), [](double x, double y) { return !(x < y); }) == a.end();
  };
  if (lat_axis.empty() || lon_axis.empty()) throw DataError("grid: empty axis");
  if (!ascending(lat_axis)) throw DataError("grid: lat axis not strictly ascending");
  if (!ascending(lon_axis)) throw DataError("grid: lon axis not strictly ascending");
  if (times.empty()) throw DataError("grid: no time steps");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i - 1] < times[i])) throw DataError("grid: times not strictly increasing");
  }
  if (values.size() != times.size() * lat_axis.size() * lon_axis.size()) {
    throw DataError("grid: expected " + std::to_string(times.size() * lat_axis.size() * lon_axis.size()) +
                    " values, found " + std::to_string(values.size()));
  }
  if (std::any_of(values.begin(), values.end(), [](double v) { return !std::isfinite(v); })) {
    throw DataError("grid: non-finite value");
  }
}

std::vector<Instant> missing_instants(const std::vector<LoadPoint>& points) {
  std::vector<Instant> out;
  for (std::size_t i = 1; i < points.size(); ++i) {
    for (Instant t = points[i - 1].time.plus_steps(1); t < points[i].time; t = t.plus_steps(1)) out.push_back(t);
  }
  return out;
}

LoadSeries parse_load_csv(std::istream& in, const std::string& station_id) {
  expect_header(in, "timestamp", "load_mw");
  LoadSeries series;
  series.station_id = station_id;
  std::set<Instant> seen;
  std::vector<Instant> bad;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != 2) fail_line(line_no, "expected 2 columns, found " + std::to_string(cols.size()));
    const Instant t = parse_row_time(cols[0], line_no);
    if (!seen.insert(t).second) fail_line(line_no, "duplicate timestamp " + std::string(cols[0]));
    double v = 0.0;
    if (cols[1].empty() || cols[1] == "NaN" || cols[1] == "nan" || cols[1] == "NA") {
      bad.push_back(t);
      continue;
    }
    if (!parse_double(cols[1], v)) fail_line(line_no, "load '" + std::string(cols[1]) + "' is not a number");
    if (!(v > 0.0) || !std::isfinite(v)) {
      bad.push_back(t);
      continue;
    }
    series.points.push_back({t, v});
  }
  if (seen.empty()) throw DataError("empty file: no data rows");
  std::sort(series.points.begin(), series.points.end(),
            [](const LoadPoint& a, const LoadPoint& b) { return a.time < b.time; });
  std::set<Instant> gaps(bad.begin(), bad.end());
  for (Instant t : missing_instants(series.points)) gaps.insert(t);
  series.gaps.assign(gaps.begin(), gaps.end());
  return series;
}

LoadSeries parse_load_csv(const std::filesystem::path& path, const std::string& station_id) {
  auto in = open_or_throw(path);
  try {
    return parse_load_csv(in, station_id);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

TempSeries parse_temp_csv(std::istream& in, GeoPoint location) {
  expect_header(in, "timestamp", "temp_c");
  TempSeries series;
  series.location = location;
  std::set<Instant> seen;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != 2) fail_line(line_no, "expected 2 columns, found " + std::to_string(cols.size()));
    const Instant t = parse_row_time(cols[0], line_no);
    if (!seen.insert(t).second) fail_line(line_no, "duplicate timestamp " + std::string(cols[0]));
    double v = 0.0;
    if (!parse_double(cols[1], v) || !std::isfinite(v)) {
      fail_line(line_no, "temperature '" + std::string(cols[1]) + "' is not a finite number");
    }
    series.points.push_back({t, v});
  }
  if (series.points.empty()) throw DataError("empty file: no data rows");
  std::sort(series.points.begin(), series.points.end(),
            [](const TempPoint& a, const TempPoint& b) { return a.time < b.time; });
  return series;
}

TempSeries parse_temp_csv(const std::filesystem::path& path, GeoPoint location) {
  auto in = open_or_throw(path);
  try {
    return parse_temp_csv(in, location);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

TempGrid parse_temp_grid(std::istream& in) {
  TempGrid grid;
  bool have_lats = false, have_lons = false, have_times = false;
  std::string line;
  while ((!have_lats || !have_lons || !have_times) && std::getline(in, line)) {
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto colon = body.find(':');
    if (colon == std::string_view::npos) throw DataError("grid: expected header line, got '" + std::string(body) + "'");
    const auto key = trim(body.substr(0, colon));
    const auto rest = body.substr(colon + 1);
    if (key == "lats") {
      grid.lat_axis = parse_axis(rest, "lats");
      have_lats = true;
    } else if (key == "lons") {
      grid.lon_axis = parse_axis(rest, "lons");
      have_lons = true;
    } else if (key == "times") {
      std::istringstream ss{std::string(rest)};
      std::string tok;
      while (ss >> tok) grid.times.push_back(parse_instant(tok));
      have_times = true;
    } else {
      throw DataError("grid: unknown header key '" + std::string(key) + "'");
    }
  }
  if (!have_lats || !have_lons || !have_times) throw DataError("grid: missing lats/lons/times header");
  std::string tok;
  while (in >> tok) {
    double v = 0.0;
    if (!parse_double(tok, v)) throw DataError("grid: bad value '" + tok + "'");
    grid.values.push_back(v);
  }
  grid.validate();
  return grid;
}

TempGrid parse_temp_grid(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  try {
    return parse_temp_grid(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_temp_grid(std::ostream& out, const TempGrid& grid) {
  out << "lats:";
  for (double v : grid.lat_axis) out << ' ' << format_real(v);
  out << "\nlons:";
  for (double v : grid.lon_axis) out << ' ' << format_real(v);
  out << "\ntimes:";
  for (Instant t : grid.times) out << ' ' << format_instant(t);
  out << '\n';
  for (std::size_t t = 0; t < grid.times.size(); ++t) {
    for (std::size_t i = 0; i < grid.lat_axis.size(); ++i) {
      for (std::size_t j = 0; j < grid.lon_axis.size(); ++j) {
        out << (j ? " " : "") << format_real(grid.at(t, i, j));
      }
      out << '\n';
    }
  }
}

std::vector<StationMeta> parse_station_meta(std::istream& in) {
  std::string header;
  if (!read_header(in, header)) throw DataError("empty station metadata file");
  const auto cols = split_csv(header);
  if (cols.size() < 3 || cols[0] != "station_id" || cols[1] != "lat" || cols[2] != "lon") {
    fail_line(1, "expected header 'station_id,lat,lon[,factor...]'");
  }
  std::vector<std::string> factor_names(cols.begin() + 3, cols.end());
  std::vector<StationMeta> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto row = split_csv(line);
    if (row.size() != cols.size()) {
      fail_line(line_no, "expected " + std::to_string(cols.size()) + " columns, found " + std::to_string(row.size()));
    }
    StationMeta meta;
    meta.station_id = std::string(row[0]);
    if (meta.station_id.empty()) fail_line(line_no, "empty station_id");
    if (!ids.insert(meta.station_id).second) fail_line(line_no, "duplicate station_id " + meta.station_id);
    if (!parse_double(row[1], meta.lat) || !parse_double(row[2], meta.lon)) fail_line(line_no, "bad lat/lon");
    for (std::size_t k = 0; k < factor_names.size(); ++k) {
      if (row[3 + k].empty()) continue;
      double v = 0.0;
      if (!parse_double(row[3 + k], v)) fail_line(line_no, "factor '" + factor_names[k] + "' is not a number");
      meta.region_factors[factor_names[k]] = v;
    }
    out.push_back(std::move(meta));
  }
  return out;
}

std::vector<StationMeta> parse_station_meta(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_station_meta(in);
}

void write_load_csv(std::ostream& out, const LoadSeries& load) {
  out << "timestamp,load_mw\n";
  for (const auto& p : load.points) out << format_instant(p.time) << ',' << format_real(p.load_mw) << '\n';
}

void write_temp_csv(std::ostream& out, const TempSeries& temp) {
  out << "timestamp,temp_c\n";
  for (const auto& p : temp.points) out << format_instant(p.time) << ',' << format_real(p.temp_c) << '\n';
}

TempGrid interpolate_temporal(const TempGrid& grid, std::int64_t target_step_minutes) {
  grid.validate();
  if (grid.times.size() < 2) throw DataError("temporal interpolation needs at least 2 time steps");
  if (target_step_minutes <= 0) throw DataError("target step must be positive");
  const std::size_t plane = grid.lat_axis.size() * grid.lon_axis.size();
  TempGrid out;
  out.lat_axis = grid.lat_axis;
  out.lon_axis = grid.lon_axis;
  for (std::size_t t = 0; t + 1 < grid.times.size(); ++t) {
    const std::int64_t span = grid.times[t + 1].epoch_minutes - grid.times[t].epoch_minutes;
    if (span % target_step_minutes != 0) {
      throw DataError("native step of " + std::to_string(span) + " min is not a multiple of " +
                      std::to_string(target_step_minutes));
    }
    const std::int64_t k = span / target_step_minutes;
    const auto a = grid.values.begin() + static_cast<std::ptrdiff_t>(t * plane);
    const auto b = a + static_cast<std::ptrdiff_t>(plane);
    out.times.push_back(grid.times[t]);
    out.values.insert(out.values.end(), a, b);
    for (std::int64_t s = 1; s < k; ++s) {
      const double w = static_cast<double>(s) / static_cast<double>(k);
      out.times.push_back(grid.times[t].plus_minutes(s * target_step_minutes));
      for (std::size_t p = 0; p < plane; ++p) out.values.push_back((1.0 - w) * a[p] + w * b[p]);
    }
  }
  const auto last = grid.values.begin() + static_cast<std::ptrdiff_t>((grid.times.size() - 1) * plane);
  out.times.push_back(grid.times.back());
  out.values.insert(out.values.end(), last, last + static_cast<std::ptrdiff_t>(plane));
  return out;
}

TempSeries extract_point_series(const TempGrid& grid, double lat, double lon) {
  grid.validate();
  auto inside = [](const std::vector<double>& axis, double x) { return x >= axis.front() && x <= axis.back(); };
  if (!inside(grid.lat_axis, lat) || !inside(grid.lon_axis, lon)) {
    std::ostringstream msg;
    msg << "coordinate (" << lat << ", " << lon << ") outside grid [" << grid.lat_axis.front() << ", "
        << grid.lat_axis.back() << "] x [" << grid.lon_axis.front() << ", " << grid.lon_axis.back() << "]";
    throw DataError(msg.str());
  }
  const auto [i, wy] = bracket(grid.lat_axis, lat);
  const auto [j, wx] = bracket(grid.lon_axis, lon);
  const std::size_t i1 = grid.lat_axis.size() > 1 ? i + 1 : i;
  const std::size_t j1 = grid.lon_axis.size() > 1 ? j + 1 : j;
  TempSeries out;
  out.location = {lat, lon};
  out.points.reserve(grid.times.size());
  for (std::size_t t = 0; t < grid.times.size(); ++t) {
    const double v = (1.0 - wy) * ((1.0 - wx) * grid.at(t, i, j) + wx * grid.at(t, i, j1)) +
                     wy * ((1.0 - wx) * grid.at(t, i1, j) + wx * grid.at(t, i1, j1));
    out.points.push_back({grid.times[t], v});
  }
  return out;
}

std::pair<LoadSeries, TempSeries> align_series(const LoadSeries& load, const TempSeries& temp) {
  LoadSeries l;
  l.station_id = load.station_id;
  TempSeries tt;
  tt.location = temp.location;
  std::size_t a = 0, b = 0;
  while (a < load.points.size() && b < temp.points.size()) {
    const Instant ta = load.points[a].time, tb = temp.points[b].time;
    if (ta < tb) {
      ++a;
    } else if (tb < ta) {
      ++b;
    } else {
      l.points.push_back(load.points[a++]);
      tt.points.push_back(temp.points[b++]);
    }
  }
  if (l.points.empty()) throw DataError("load and temperature series have no common timestamps");
  std::set<Instant> gaps;
  for (Instant g : load.gaps) {
    if (l.points.front().time < g && g < l.points.back().time) gaps.insert(g);
  }
  for (Instant g : missing_instants(l.points)) gaps.insert(g);
  l.gaps.assign(gaps.begin(), gaps.end());
  return {std::move(l), std::move(tt)};
}

}  // namespace stlf::ingest
