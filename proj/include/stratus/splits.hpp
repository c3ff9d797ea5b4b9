#pragma once

#include <string>
#include <vector>

#include "stratus/geometry.hpp"

namespace stratus {

enum class Season { all, summer, winter };
enum class DayAssignment { train, validation, test, dropped };

Season season_parse(const std::string& s);
const char* season_name(Season s);

// Binary exceedance labels: 1 where obs > h strictly.
Raster threshold_labels(const Raster& obs, double h);

// Summer spans April 15 to October 14 inclusive; winter is the rest.
Season season_of(UtcTime date);

struct SplitPlan {
    int fold_year = 0;
    Season season = Season::all;
    int lead_hours = 0;
    double threshold_mm = 0.0;
    struct Day {
        UtcTime date;
        DayAssignment assignment;
        std::string reason;  // non-empty only for dropped days
    };
    std::vector<Day> days;

    std::vector<UtcTime> dates(DayAssignment a) const;
};

// Test = all in-season days of fold_year; remaining in-season days alternate
// train, validation, ... in chronological order (train first unless
// validation_first). Days listed in missing_days are dropped.
SplitPlan make_splits(const std::vector<UtcTime>& all_days, int fold_year, Season season,
                      const std::vector<UtcTime>& missing_days, bool validation_first = false);

void write_split_csv(const std::string& path, const SplitPlan& plan);

} // namespace stratus
