#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stratus/geometry.hpp"

namespace stratus {

// The 19 feature names, in canonical column order.
const std::vector<std::string>& feature_names();
// Extra bookkeeping column marking rows whose past-error features were
// backfilled with zeros (first day of a dataset).
inline const std::string kPastErrorFlag = "past_error_flag";

struct RowKey {
    std::int64_t time_sec;
    std::uint16_t px_row;
    std::uint16_t px_col;
};

// Masked, flattened design matrix; columns stored contiguously.
struct FeatureTable {
    std::vector<std::string> column_names;
    std::vector<std::vector<double>> columns;
    std::vector<RowKey> row_index;

    std::size_t n_rows() const { return row_index.size(); }
    std::size_t n_cols() const { return column_names.size(); }
    int col(const std::string& name) const;
    bool has_col(const std::string& name) const;

    FeatureTable select_rows(const std::vector<std::uint32_t>& rows) const;
    FeatureTable select_cols(const std::vector<std::string>& names) const;
};

using LabelVector = std::vector<std::uint8_t>;

struct StandardizationStats {
    std::vector<std::string> column_names;
    std::vector<double> mean;
    std::vector<double> sd;                 // population sd over the fitting rows
    std::vector<std::uint8_t> zero_variance;
};

struct EnsembleStats {
    Raster gefs_avg, gefs_q1, gefs_q3, gefs_control;
};

// Per-pixel mean, third-lowest, third-highest and control of exactly 11
// aligned member rasters.
EnsembleStats ensemble_stats(const std::vector<Raster>& members, int control_index = 0);

// Fraction of members forecasting a value above h (strictly by default).
Raster raw_ensemble_fraction(const std::vector<Raster>& members, double h, bool strict = true);

// Sliding maximum over the (2*half_width+1)^2 square; output shrinks by
// half_width cells on every side so no padding is ever needed.
Raster local_max(const Raster& src, int half_width_px);

// Forecast rasters for leads l-2, l-1, l+1, l+2 (hourly series) re-labeled to
// the verification time of lead l. Throws if a neighbor is missing.
struct HourlyNeighbors {
    Raster hm2, hm1, hp1, hp2;
};
HourlyNeighbors temporal_neighbor_features(const FieldSeries& hourly, UtcTime verification);

// Adjacent 3 h blocks of a coarse series around the block verifying at t.
struct BlockNeighbors {
    Raster ga_prev, ga_next;
};
BlockNeighbors temporal_block_neighbors(const FieldSeries& blocks, UtcTime block_end);

// forecast(t - 24 h) - obs(t - 24 h); flagged zeros when the previous day is
// not available.
struct PastError {
    Raster error;
    bool flagged;
};
PastError past_error(const FieldSeries& forecast, const FieldSeries& obs, UtcTime verification);

struct CoordinateTimeFeatures {
    Raster xdim, ydim, tdim;
};
CoordinateTimeFeatures coordinate_time_features(const RasterGeometry& geometry, UtcTime date);

// Observation for the hour ending at the initialization time.
Raster init_obs_feature(const FieldSeries& obs, UtcTime init_time);

StandardizationStats compute_standardization(const FeatureTable& table,
                                             const std::vector<std::uint32_t>& training_rows);
FeatureTable standardize(const FeatureTable& table, const StandardizationStats& stats);

// Append one timestamp's worth of rows: valid mask cells in row-major order.
// All rasters must share the mask geometry; labels must be 0/1. Column order
// follows the list order and must not change between timestamps.
using NamedRasters = std::vector<std::pair<std::string, const Raster*>>;
void tabularize(FeatureTable& table, LabelVector& labels, UtcTime t,
                const NamedRasters& feature_rasters, const Raster& label_raster, const Mask& mask);

// Scatter one column back onto the grid for a given timestamp (NaN elsewhere).
Raster scatter_column(const FeatureTable& table, const std::string& column, UtcTime t,
                      const Mask& mask);

void write_feature_csv(const std::string& path, const FeatureTable& table,
                       const LabelVector& labels);

} // namespace stratus
