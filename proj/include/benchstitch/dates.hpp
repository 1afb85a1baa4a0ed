#pragma once

#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "benchstitch/error.hpp"

namespace benchstitch {

// Proleptic Gregorian calendar date. All trend math runs on fractional years
// computed as year + (day_of_year - 1) / days_in_year.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    static constexpr bool is_leap(int y) {
        return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    }

    static constexpr int days_in_month(int y, int m) {
        constexpr int table[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        return (m == 2 && is_leap(y)) ? 29 : table[m - 1];
    }

    static constexpr int days_in_year(int y) { return is_leap(y) ? 366 : 365; }

    constexpr bool valid() const {
        return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
    }

    constexpr int day_of_year() const {
        int doy = day;
        for (int m = 1; m < month; ++m) doy += days_in_month(year, m);
        return doy;
    }

    double fractional_year() const {
        return year + static_cast<double>(day_of_year() - 1) / days_in_year(year);
    }

    // Days since 1970-01-01 (Hinnant's days_from_civil).
    constexpr std::int64_t days_since_epoch() const {
        const int y = month <= 2 ? year - 1 : year;
        const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(y - era * 400);
        const unsigned mp = static_cast<unsigned>(month > 2 ? month - 3 : month + 9);
        const unsigned doy = (153 * mp + 2) / 5 + static_cast<unsigned>(day) - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
    }

    static constexpr Date from_days_since_epoch(std::int64_t z) {
        z += 719468;
        const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
        const unsigned doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp < 10 ? mp + 3 : mp - 9;
        return Date{static_cast<int>(y + (m <= 2 ? 1 : 0)), static_cast<int>(m), static_cast<int>(d)};
    }

    // Largest date whose fractional year does not exceed t.
    static Date from_fractional_year(double t) {
        const int y = static_cast<int>(std::floor(t));
        const double frac = t - y;
        int doy = static_cast<int>(std::floor(frac * days_in_year(y) + 1e-9)) + 1;
        if (doy > days_in_year(y)) doy = days_in_year(y);
        return from_days_since_epoch(Date{y, 1, 1}.days_since_epoch() + doy - 1);
    }

    std::string iso() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    // Accepts YYYY-MM-DD, and YYYY-MM (first of month) for convenience.
    static Date parse(std::string_view text) {
        auto bad = [&] { return ValidationError("invalid ISO date '" + std::string(text) + "'"); };
        auto number = [&](std::string_view part) {
            int value = 0;
            auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
            if (ec != std::errc{} || ptr != part.data() + part.size() || part.empty()) throw bad();
            return value;
        };
        Date d;
        if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
            d = Date{number(text.substr(0, 4)), number(text.substr(5, 2)), number(text.substr(8, 2))};
        } else if (text.size() == 7 && text[4] == '-') {
            d = Date{number(text.substr(0, 4)), number(text.substr(5, 2)), 1};
        } else {
            throw bad();
        }
        if (!d.valid()) throw bad();
        return d;
    }
};

}  // namespace benchstitch
