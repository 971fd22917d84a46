#include "mtp/detail/dates.hpp"

#include <cctype>
#include <cstdio>

#include "mtp/errors.hpp"

namespace mtp::detail {

Date parse_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        throw DataError("invalid date '" + s + "', expected YYYY-MM-DD");
    for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!std::isdigit(static_cast<unsigned char>(s[i])))
            throw DataError("invalid date '" + s + "', expected YYYY-MM-DD");
    const int y = std::stoi(s.substr(0, 4));
    const int m = std::stoi(s.substr(5, 2));
    const int d = std::stoi(s.substr(8, 2));
    const Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                    std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) throw DataError("invalid calendar date '" + s + "'");
    return date;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

std::chrono::sys_days to_days(const Date& d) { return std::chrono::sys_days{d}; }

Date from_days(std::chrono::sys_days d) { return Date{d}; }

Date monday_of(const Date& d) {
    const auto days = to_days(d);
    const std::chrono::weekday wd{days};
    const auto back = (wd - std::chrono::Monday).count();
    return from_days(days - std::chrono::days{back});
}

Date add_days(const Date& d, int days) { return from_days(to_days(d) + std::chrono::days{days}); }

int days_between(const Date& from, const Date& to) {
    return static_cast<int>((to_days(to) - to_days(from)).count());
}

}  // namespace mtp::detail
