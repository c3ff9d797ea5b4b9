#pragma once

#include <map>
#include <string>
#include <vector>

#include "stratus/geometry.hpp"

namespace stratus {

// Per-source systematic error of the synthetic forecasts.
struct SourceBias {
    double advection_offset_px = 0.0;  // along +x, in the source's own cells
    double timing_shift_hours = 0.0;
    double amplitude_scale = 1.0;
    double noise_sd = 0.0;  // mm/h, i.i.d. per cell
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    int n_days = 120;
    int start_year = 2015;
    unsigned start_month = 11;
    unsigned start_day = 1;
    std::vector<int> leads = {12, 24};

    // (threshold mm, wanted exceedance fraction); the first entry drives the
    // amplitude tuning, the rest are reported in the manifest.
    std::vector<std::pair<double, double>> cover_targets = {{0.5, 0.055}};

    double coarse_cell_km = 25.0;
    double fine_cell_km = 2.5;
    double obs_cell_km = 1.0;
    int n_members = 11;

    SourceBias coarse_bias{-0.6, 0.0, 0.85, 0.5};
    SourceBias fine_bias{2.0, 0.0, 1.05, 0.25};

    int mask_side_px = 64;
    int mask_holes = 3;
    int mask_hole_radius_px = 2;

    int window_side_px = 128;
    double window_margin_km = 30.0;

    // Truth-field shape
    int blobs_per_day = 6;
    double blob_sigma_min_km = 8.0;
    double blob_sigma_max_km = 22.0;
    double drift_min_km_h = 2.0;
    double drift_max_km_h = 6.0;

    void validate() const;
    UtcTime start() const { return UtcTime::from_ymd(start_year, start_month, start_day); }
};

struct Scenario {
    ScenarioConfig config;
    Mask mask;                         // on the observation grid
    FieldSeries observations;          // hourly, only the hours the pipeline consumes
    FieldSeries fine_deterministic;    // hourly around each lead
    std::vector<FieldSeries> coarse_members;  // 3 h blocks; member 0 is the control
    std::map<double, double> achieved_cover;  // threshold -> masked exceedance fraction
    double amplitude = 0.0;                   // tuned global factor
};

// Deterministic advected-blob scenario; bit-identical for a given config.
Scenario generate_scenario(const ScenarioConfig& cfg);

// On-disk layout: <dir>/mask.grid, <dir>/manifest.json, and one .grid file
// per raster under obs/, fine/, member_NN/.
void save_scenario(const Scenario& s, const std::string& dir);
Scenario load_scenario(const std::string& dir);

} // namespace stratus
