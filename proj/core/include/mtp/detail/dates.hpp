#pragma once

#include <chrono>
#include <string>

namespace mtp::detail {

using Date = std::chrono::year_month_day;

// Strict ISO "YYYY-MM-DD"; throws DataError on anything else.
Date parse_date(const std::string& s);
std::string format_date(const Date& d);

std::chrono::sys_days to_days(const Date& d);
Date from_days(std::chrono::sys_days d);

// Latest Monday on or before d.
Date monday_of(const Date& d);
Date add_days(const Date& d, int days);
int days_between(const Date& from, const Date& to);  // to - from

}  // namespace mtp::detail
