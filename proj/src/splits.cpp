#include "stratus/splits.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace stratus {

Season season_parse(const std::string& s) {
    if (s == "all") return Season::all;
    if (s == "summer") return Season::summer;
    if (s == "winter") return Season::winter;
    throw std::invalid_argument("unknown season: " + s);
}

const char* season_name(Season s) {
    switch (s) {
        case Season::all: return "all";
        case Season::summer: return "summer";
        case Season::winter: return "winter";
    }
    return "?";
}

Raster threshold_labels(const Raster& obs, double h) {
    obs.check_shape();
    Raster out(obs.geometry);
    for (std::size_t i = 0; i < obs.values.size(); ++i)
        out.values[i] = double(obs.values[i]) > h ? 1.0f : 0.0f;
    return out;
}

Season season_of(UtcTime date) {
    const unsigned m = date.month(), d = date.day();
    const bool summer = (m > 4 || (m == 4 && d >= 15)) && (m < 10 || (m == 10 && d <= 14));
    return summer ? Season::summer : Season::winter;
}

std::vector<UtcTime> SplitPlan::dates(DayAssignment a) const {
    std::vector<UtcTime> out;
    for (const auto& d : days)
        if (d.assignment == a) out.push_back(d.date);
    return out;
}

SplitPlan make_splits(const std::vector<UtcTime>& all_days, int fold_year, Season season,
                      const std::vector<UtcTime>& missing_days, bool validation_first) {
    SplitPlan plan;
    plan.fold_year = fold_year;
    plan.season = season;

    std::vector<UtcTime> days = all_days;
    std::sort(days.begin(), days.end());
    auto is_missing = [&](UtcTime d) {
        return std::find(missing_days.begin(), missing_days.end(), d) != missing_days.end();
    };

    bool fold_present = false;
    bool next_is_validation = validation_first;
    std::size_t n_train = 0, n_val = 0, n_test = 0;
    for (UtcTime d : days) {
        if (d.year() == fold_year) fold_present = true;
        SplitPlan::Day entry{d, DayAssignment::dropped, ""};
        if (is_missing(d)) {
            entry.reason = "missing data";
        } else if (season != Season::all && season_of(d) != season) {
            entry.reason = "out of season";
        } else if (d.year() == fold_year) {
            entry.assignment = DayAssignment::test;
            ++n_test;
        } else {
            entry.assignment = next_is_validation ? DayAssignment::validation : DayAssignment::train;
            next_is_validation ? ++n_val : ++n_train;
            next_is_validation = !next_is_validation;
        }
        plan.days.push_back(entry);
    }
    if (!fold_present) throw std::invalid_argument("make_splits: fold year not present in the period");
    if (n_train == 0 || n_val == 0)
        throw std::runtime_error("make_splits: empty train or validation partition");
    (void)n_test;
    return plan;
}

void write_split_csv(const std::string& path, const SplitPlan& plan) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "date,assignment,reason\n";
    for (const auto& d : plan.days) {
        const char* a = d.assignment == DayAssignment::train        ? "train"
                        : d.assignment == DayAssignment::validation ? "validation"
                        : d.assignment == DayAssignment::test       ? "test"
                                                                    : "dropped";
        out << d.date.iso() << "," << a << "," << d.reason << "\n";
    }
}

} // namespace stratus
