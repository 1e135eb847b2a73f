#include "stlf/time.hpp"

#include <charconv>
#include <cstdio>

#include "stlf/error.hpp"

namespace stlf {

namespace {

constexpr std::int64_t kMinutesPerDay = 24 * 60;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int parse_fixed(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
  int value = 0;
  if (pos + len > text.size()) throw DataError("malformed date/time '" + std::string(whole) + "'");
  const char* first = text.data() + pos;
  const char* last = first + len;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw DataError("malformed date/time '" + std::string(whole) + "'");
  return value;
}

Date checked_date(int y, int m, int d, std::string_view whole) {
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw DataError("invalid calendar date '" + std::string(whole) + "'");
  return Date{ymd};
}

}  // namespace

Date make_date(int year, unsigned month, unsigned day) {
  return Date{std::chrono::year_month_day{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}}};
}

Instant make_instant(int year, unsigned month, unsigned day, int hour, int minute) {
  const auto days = make_date(year, month, day).time_since_epoch().count();
  return Instant{static_cast<std::int64_t>(days) * kMinutesPerDay + hour * 60 + minute};
}

Date date_of(Instant t) {
  return Date{std::chrono::days{floor_div(t.epoch_minutes, kMinutesPerDay)}};
}

std::chrono::year_month_day civil(Date d) { return std::chrono::year_month_day{d}; }

int iso_weekday_index(Date d) {
  // weekday::iso_encoding gives 1..7 for Mon..Sun
  return static_cast<int>(std::chrono::weekday{d}.iso_encoding()) - 1;
}

int minute_of_day(Instant t) {
  return static_cast<int>(t.epoch_minutes - floor_div(t.epoch_minutes, kMinutesPerDay) * kMinutesPerDay);
}

int slot_of_day(Instant t) { return minute_of_day(t) / static_cast<int>(kStepMinutes); }

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw DataError("malformed date '" + std::string(text) + "' (expected YYYY-MM-DD)");
  }
  return checked_date(parse_fixed(text, 0, 4, text), parse_fixed(text, 5, 2, text), parse_fixed(text, 8, 2, text),
                      text);
}

int parse_time_of_day(std::string_view text) {
  if (text.size() != 5 || text[2] != ':') throw DataError("malformed time '" + std::string(text) + "' (expected hh:mm)");
  const int h = parse_fixed(text, 0, 2, text);
  const int m = parse_fixed(text, 3, 2, text);
  if (h > 23 || m > 59) throw DataError("time out of range '" + std::string(text) + "'");
  return h * 60 + m;
}

Instant parse_instant(std::string_view text) {
  if (text.size() != 16 || (text[10] != 'T' && text[10] != ' ')) {
    throw DataError("malformed timestamp '" + std::string(text) + "' (expected YYYY-MM-DDThh:mm)");
  }
  const Date d = parse_date(text.substr(0, 10));
  const int tod = parse_time_of_day(text.substr(11, 5));
  return Instant{static_cast<std::int64_t>(d.time_since_epoch().count()) * kMinutesPerDay + tod};
}

std::string format_date(Date d) {
  const auto ymd = civil(d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_instant(Instant t) {
  const int tod = minute_of_day(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "T%02d:%02d", tod / 60, tod % 60);
  return format_date(date_of(t)) + buf;
}

}  // namespace stlf
