#pragma once

#include <string>
#include <vector>

#include "stratus/features.hpp"
#include "stratus/scenario.hpp"
#include "stratus/splits.hpp"
#include "stratus/trainer.hpp"

namespace stratus {

// Derives the feature rasters of one (scenario, lead, threshold) run on the
// network window. All sources are regridded/cropped to the window first.
class FeatureBuilder {
public:
    FeatureBuilder(const Scenario& scenario, int lead_hours, double threshold_mm);

    const RasterGeometry& window() const { return window_; }
    const Mask& window_mask() const { return window_mask_; }
    int lead_hours() const { return lead_; }
    double threshold_mm() const { return threshold_; }
    int n_days() const { return scenario_->config.n_days; }
    UtcTime init_day(int day_index) const;
    UtcTime verification(int day_index) const;

    struct DayFeatures {
        UtcTime init;
        UtcTime verification;
        NamedRasters named() const;          // the 19 features plus the flag column
        std::vector<std::pair<std::string, Raster>> rasters;
        Raster label_raster;
        bool past_flagged = false;
    };
    DayFeatures build_day(int day_index) const;

private:
    const Scenario* scenario_;
    int lead_;
    double threshold_;
    RasterGeometry window_;
    Mask window_mask_;
    RasterGeometry lmax_source_geom_;
    int lmax_half_width_px_;
    UtcTime current_block_end(UtcTime init) const;

    // window-space series shared across days
    FieldSeries obs_w_;    // label + init hours, cropped
    FieldSeries fine_w_;   // hourly around the lead, regridded
    FieldSeries gmean_w_;  // ensemble mean per 3 h block, regridded
};

// Tabular dataset for the pixel-by-pixel models.
struct TabularData {
    RasterGeometry window;
    Mask window_mask;
    std::vector<UtcTime> days;                  // init days
    std::vector<std::uint32_t> day_row_begin;   // rows of day i: [begin[i], begin[i+1])
    FeatureTable table;                         // 19 features + past_error_flag
    LabelVector labels;
};

TabularData build_tabular(const Scenario& scenario, int lead_hours, double threshold_mm);

// Row ids of the table covered by one split assignment.
std::vector<std::uint32_t> rows_for(const TabularData& data, const SplitPlan& plan,
                                    DayAssignment assignment);

// Default channel split for the network: everything except the two
// past-error features feeds the encoder; the coordinate/time features are
// reintroduced before the final convolution.
const std::vector<std::string>& network_main_channels();
const std::vector<std::string>& network_late_channels();

// Standardized per-day tensors for the listed days (indices into data.days).
NetDataset build_net_dataset(const FeatureBuilder& builder, const StandardizationStats& stats,
                             const std::vector<int>& day_indices);

} // namespace stratus
