#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace stratus {

// UTC wall time with second resolution. All timestamps in the project are
// UTC; no timezone handling anywhere.
class UtcTime {
public:
    UtcTime() : seconds_(0) {}
    explicit UtcTime(std::int64_t seconds_since_epoch) : seconds_(seconds_since_epoch) {}

    static UtcTime from_ymd(int year, unsigned month, unsigned day, int hour = 0) {
        using namespace std::chrono;
        year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
        if (!ymd.ok()) throw std::invalid_argument("invalid calendar date");
        sys_days sd{ymd};
        return UtcTime(duration_cast<seconds>(sd.time_since_epoch()).count() + std::int64_t(hour) * 3600);
    }

    std::int64_t seconds() const { return seconds_; }
    std::int64_t hours() const { return seconds_ / 3600; }

    UtcTime plus_hours(std::int64_t h) const { return UtcTime(seconds_ + h * 3600); }
    UtcTime plus_days(std::int64_t d) const { return UtcTime(seconds_ + d * 86400); }

    // Calendar day this instant falls on (UTC midnight boundary).
    UtcTime day_start() const {
        std::int64_t d = seconds_ >= 0 ? seconds_ / 86400 : (seconds_ - 86399) / 86400;
        return UtcTime(d * 86400);
    }

    int year() const { return int(ymd().year()); }
    unsigned month() const { return unsigned(ymd().month()); }
    unsigned day() const { return unsigned(ymd().day()); }
    int hour_of_day() const {
        std::int64_t s = seconds_ - day_start().seconds();
        return int(s / 3600);
    }

    // 1-based day of year (1..366).
    int day_of_year() const {
        using namespace std::chrono;
        sys_days sd{floor<days>(seconds{seconds_} + sys_seconds{})};
        year_month_day d{sd};
        sys_days jan1{year_month_day{d.year(), January, std::chrono::day{1}}};
        return int((sd - jan1).count()) + 1;
    }

    std::string iso() const {
        char buf[24];
        auto d = ymd();
        std::int64_t rem = seconds_ - day_start().seconds();
        int hh = int(rem / 3600), mm = int((rem % 3600) / 60), ss = int(rem % 60);
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ",
                      int(d.year()), unsigned(d.month()), unsigned(d.day()), hh, mm, ss);
        return buf;
    }

    static UtcTime parse_iso(const std::string& s) {
        int y, hh, mm, ss;
        unsigned mo, dd;
        if (std::sscanf(s.c_str(), "%d-%u-%uT%d:%d:%dZ", &y, &mo, &dd, &hh, &mm, &ss) != 6)
            throw std::invalid_argument("bad timestamp: " + s);
        return UtcTime(from_ymd(y, mo, dd).seconds() + std::int64_t(hh) * 3600 + mm * 60 + ss);
    }

    friend bool operator==(UtcTime a, UtcTime b) { return a.seconds_ == b.seconds_; }
    friend bool operator!=(UtcTime a, UtcTime b) { return a.seconds_ != b.seconds_; }
    friend bool operator<(UtcTime a, UtcTime b) { return a.seconds_ < b.seconds_; }
    friend bool operator<=(UtcTime a, UtcTime b) { return a.seconds_ <= b.seconds_; }
    friend bool operator>(UtcTime a, UtcTime b) { return a.seconds_ > b.seconds_; }
    friend bool operator>=(UtcTime a, UtcTime b) { return a.seconds_ >= b.seconds_; }

private:
    std::chrono::year_month_day ymd() const {
        using namespace std::chrono;
        sys_days sd{floor<days>(sys_seconds{seconds{seconds_}})};
        return year_month_day{sd};
    }

    std::int64_t seconds_;
};

} // namespace stratus
