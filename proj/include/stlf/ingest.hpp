#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stlf/time.hpp"

namespace stlf::ingest {

struct LoadPoint {
  Instant time;
  double load_mw{0.0};
};

/// Half-hourly substation load. Every retained point has load_mw > 0; any half-hour
/// between the first and last point that is not a point is listed in `gaps`.
struct LoadSeries {
  std::string station_id;
  std::vector<LoadPoint> points;
  std::vector<Instant> gaps;
};

struct TempPoint {
  Instant time;
  double temp_c{0.0};
};

struct GeoPoint {
  double lat{0.0};
  double lon{0.0};
};

struct TempSeries {
  GeoPoint location;
  std::vector<TempPoint> points;
};

/// Gridded temperature field, values laid out time-major then lat then lon.
struct TempGrid {
  std::vector<double> lat_axis;
  std::vector<double> lon_axis;
  std::vector<Instant> times;
  std::vector<double> values;

  [[nodiscard]] std::size_t index(std::size_t t, std::size_t i, std::size_t j) const {
    return (t * lat_axis.size() + i) * lon_axis.size() + j;
  }
  [[nodiscard]] double at(std::size_t t, std::size_t i, std::size_t j) const { return values[index(t, i, j)]; }
  /// Throws DataError when axes, times or values are inconsistent.
  void validate() const;
};

struct StationMeta {
  std::string station_id;
  double lat{0.0};
  double lon{0.0};
  std::map<std::string, double> region_factors;
};

/// CSV with header `timestamp,load_mw`. Rows with an empty, non-positive or NaN load
/// are recorded as gaps; malformed rows and duplicate timestamps throw DataError
/// carrying the line number.
[[nodiscard]] LoadSeries parse_load_csv(const std::filesystem::path& path, const std::string& station_id);
[[nodiscard]] LoadSeries parse_load_csv(std::istream& in, const std::string& station_id);

/// Pre-extracted point series, header `timestamp,temp_c`.
[[nodiscard]] TempSeries parse_temp_csv(const std::filesystem::path& path, GeoPoint location = {});
[[nodiscard]] TempSeries parse_temp_csv(std::istream& in, GeoPoint location = {});

/// Text grid: `lats: ...`, `lons: ...`, `times: ...` header lines followed by
/// whitespace-separated values, row-major (lat rows of lon values) per time step.
[[nodiscard]] TempGrid parse_temp_grid(const std::filesystem::path& path);
[[nodiscard]] TempGrid parse_temp_grid(std::istream& in);
void write_temp_grid(std::ostream& out, const TempGrid& grid);

/// CSV with header `station_id,lat,lon[,factor...]`; every extra column is a named factor.
[[nodiscard]] std::vector<StationMeta> parse_station_meta(const std::filesystem::path& path);
[[nodiscard]] std::vector<StationMeta> parse_station_meta(std::istream& in);

void write_load_csv(std::ostream& out, const LoadSeries& load);
void write_temp_csv(std::ostream& out, const TempSeries& temp);

/// Linear interpolation in time down to `target_step_minutes`. Original samples are
/// copied unchanged. Each native step must be a multiple of the target step.
[[nodiscard]] TempGrid interpolate_temporal(const TempGrid& grid, std::int64_t target_step_minutes = kStepMinutes);

/// Bilinear evaluation of every time step at (lat, lon).
[[nodiscard]] TempSeries extract_point_series(const TempGrid& grid, double lat, double lon);

/// Restricts both series to their common timestamps.
[[nodiscard]] std::pair<LoadSeries, TempSeries> align_series(const LoadSeries& load, const TempSeries& temp);

/// Every half-hour in [first point, last point] that has no point.
[[nodiscard]] std::vector<Instant> missing_instants(const std::vector<LoadPoint>& points);

}  // namespace stlf::ingest
