#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stratus/features.hpp"
#include "stratus/geometry.hpp"

namespace stratus {

double brier(const std::vector<double>& predictions, const LabelVector& labels);

// 1 - model/baseline; empty when the baseline is zero.
std::optional<double> bss(double model_brier, double baseline_brier);

// Per-pixel positive fraction over the given rows (climatology baseline).
// Keys are (px_row << 16) | px_col of the row index.
struct Climatology {
    std::vector<std::uint32_t> pixel_key;  // sorted
    std::vector<double> probability;

    double at(std::uint16_t px_row, std::uint16_t px_col) const;
    std::vector<double> predict(const std::vector<RowKey>& rows) const;
};
Climatology climatology_baseline(const std::vector<RowKey>& rows, const LabelVector& labels);

// Non-decreasing step function fitted by pool-adjacent-violators.
struct CalibrationMap {
    std::vector<double> input;   // strictly increasing breakpoints
    std::vector<double> output;  // non-decreasing, in [0,1] for binary labels
    double min_seen = 0.0;
    double max_seen = 0.0;
};

CalibrationMap pava_fit(const std::vector<double>& predictions, const LabelVector& labels);
CalibrationMap pava_fit_values(const std::vector<double>& predictions,
                               const std::vector<double>& targets);
std::vector<double> calibrate(const CalibrationMap& map, const std::vector<double>& predictions);
double calibrate_one(const CalibrationMap& map, double prediction);

struct ReliabilityBin {
    double lo, hi;
    std::size_t count;
    double mean_prediction;      // 0 when empty
    double observed_frequency;   // 0 when empty
};
std::vector<ReliabilityBin> reliability_curve(const std::vector<double>& predictions,
                                              const LabelVector& labels, int n_bins);

struct DailyBrier {
    UtcTime day;
    double brier;
    std::size_t count;
};

struct EvalReport {
    double brier = 0.0;
    double baseline_brier = 0.0;
    std::optional<double> bss;
    std::size_t n_samples = 0;
    Raster per_pixel_bss;  // NaN where undefined or unmasked
    std::vector<DailyBrier> daily;
    std::vector<ReliabilityBin> reliability;
    std::vector<std::size_t> histogram;  // prediction counts, equal-width bins
    double histogram_bin_width = 0.1;
};

// Groupwise Brier/BSS by pixel and by day plus the prediction histogram.
EvalReport breakdowns(const std::vector<double>& predictions, const LabelVector& labels,
                      const std::vector<RowKey>& rows, const Climatology& baseline,
                      const RasterGeometry& pixel_geometry, int n_reliability_bins = 10,
                      double histogram_bin_width = 0.1);

// Report directory: summary.json, reliability.csv, daily_brier.csv,
// histogram.csv, per_pixel_bss.grid.
void write_report(const EvalReport& report, const std::string& dir);

} // namespace stratus
