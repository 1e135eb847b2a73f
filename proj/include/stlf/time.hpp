#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace stlf {

inline constexpr std::int64_t kStepMinutes = 30;
inline constexpr int kSlotsPerDay = 48;

/// Minutes since 1970-01-01T00:00 in the network's local standard time (no DST).
struct Instant {
  std::int64_t epoch_minutes{0};

  friend constexpr auto operator<=>(const Instant&, const Instant&) = default;

  [[nodiscard]] constexpr Instant plus_minutes(std::int64_t m) const { return Instant{epoch_minutes + m}; }
  [[nodiscard]] constexpr Instant plus_steps(std::int64_t n) const { return plus_minutes(n * kStepMinutes); }
  [[nodiscard]] constexpr bool on_half_hour() const { return epoch_minutes % kStepMinutes == 0; }
};

/// Calendar date, days since 1970-01-01.
using Date = std::chrono::sys_days;

[[nodiscard]] Instant make_instant(int year, unsigned month, unsigned day, int hour = 0, int minute = 0);
[[nodiscard]] Date date_of(Instant t);
[[nodiscard]] Date make_date(int year, unsigned month, unsigned day);
[[nodiscard]] std::chrono::year_month_day civil(Date d);

/// 0 = Monday ... 6 = Sunday.
[[nodiscard]] int iso_weekday_index(Date d);

/// Half-hour slot of the day, 0..47.
[[nodiscard]] int slot_of_day(Instant t);
[[nodiscard]] int minute_of_day(Instant t);

/// Parses `YYYY-MM-DDThh:mm` (a space separator is also accepted). Throws DataError.
[[nodiscard]] Instant parse_instant(std::string_view text);
/// Parses `YYYY-MM-DD`. Throws DataError.
[[nodiscard]] Date parse_date(std::string_view text);
/// Parses `hh:mm` into minutes of day. Throws DataError.
[[nodiscard]] int parse_time_of_day(std::string_view text);

[[nodiscard]] std::string format_instant(Instant t);
[[nodiscard]] std::string format_date(Date d);

}  // namespace stlf
