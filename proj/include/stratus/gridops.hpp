#pragma once

#include <optional>
#include <vector>

#include "stratus/geometry.hpp"

namespace stratus {

// Convert running accumulations (reset to zero every window_steps entries,
// aligned to the series start) into per-step amounts. Decreases within a
// window up to 1e-6 are clamped to zero; larger decreases are errors.
FieldSeries deaccumulate(const FieldSeries& running, int window_steps);

// Divide every 3-hourly amount by 3 to get an hourly rate.
FieldSeries gefs_to_hourly_rate(const FieldSeries& three_hour_amounts);

// Nearest-neighbor resampling onto dst_geometry. Every destination cell
// center must fall inside the source extent; equidistant source centers
// resolve to the smaller row, then the smaller column.
Raster regrid_nearest(const Raster& src, const RasterGeometry& dst_geometry);

// Geometry of the side_px x side_px window centered on the extent of
// mask-valid cells, at the mask's cell size, covering the extent plus at
// least margin_km on every side.
RasterGeometry window_geometry(const Mask& mask, int side_px, double margin_km);

// Cut the window out of src (src must share cell size and grid alignment).
Raster crop_window(const Raster& src, const RasterGeometry& output_mask_geometry,
                   const Mask& mask, int side_px, double margin_km);
Raster crop_to(const Raster& src, const RasterGeometry& window);

struct LagCorrelation {
    int lag_hours;
    double pearson_r;
    bool defined;  // false when either side has zero variance
};

struct LagCorrelationReport {
    std::vector<LagCorrelation> rows;
    std::optional<int> argmax_lag;  // empty when no lag produced a defined r
};

// Pearson correlation between forecast(t) and obs(t + lag) over mask-valid
// pixels of all overlapping timestamps, per lag.
LagCorrelationReport lag_correlation_check(const FieldSeries& forecast, const FieldSeries& obs,
                                           const Mask& mask, const std::vector<int>& lags);

} // namespace stratus
