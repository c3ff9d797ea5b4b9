#include "stratus/gridops.hpp"

#include <cmath>
#include <stdexcept>

namespace stratus {

FieldSeries deaccumulate(const FieldSeries& running, int window_steps) {
    if (window_steps < 1) throw std::invalid_argument("deaccumulate: window_steps must be >= 1");
    if (running.entries.empty()) throw std::invalid_argument("deaccumulate: empty series");
    running.validate();

    FieldSeries out;
    out.lead_hours = running.lead_hours;
    out.source = running.source;
    out.entries.reserve(running.entries.size());
    for (std::size_t k = 0; k < running.entries.size(); ++k) {
        const Raster& cur = running.entries[k].second;
        Raster amount = cur;
        if (k % std::size_t(window_steps) != 0) {
            const Raster& prev = running.entries[k - 1].second;
            for (std::size_t i = 0; i < amount.values.size(); ++i) {
                const double d = double(cur.values[i]) - double(prev.values[i]);
                if (d < -1e-6)
                    throw std::runtime_error("deaccumulate: accumulation decreased by " +
                                             std::to_string(-d) + " within a window");
                amount.values[i] = d < 0.0 ? 0.0f : float(d);
            }
        } else {
            for (auto& v : amount.values)
                if (v < 0.0f) v = 0.0f;
        }
        out.entries.emplace_back(running.entries[k].first, std::move(amount));
    }
    return out;
}

FieldSeries gefs_to_hourly_rate(const FieldSeries& three_hour_amounts) {
    three_hour_amounts.validate();
    FieldSeries out = three_hour_amounts;
    for (auto& e : out.entries)
        for (auto& v : e.second.values) v /= 3.0f;
    return out;
}

namespace {

// Index of the source row/column whose center is nearest to coordinate q,
// breaking exact ties toward the smaller index.
int nearest_index(double q, double origin, double step, int n) {
    const double f = (q - origin) / step;
    int i = int(std::floor(f + 0.5));
    // floor(f + 0.5) rounds halfway cases up; the tie rule wants the lower index
    if (f - std::floor(f) == 0.5) i = int(std::floor(f));
    if (i < 0 || i >= n) return -1;
    return i;
}

} // namespace

Raster regrid_nearest(const Raster& src, const RasterGeometry& dst_geometry) {
    src.check_shape();
    dst_geometry.validate();
    const RasterGeometry& sg = src.geometry;
    if (sg.y_axis_flipped != dst_geometry.y_axis_flipped)
        throw std::invalid_argument("regrid_nearest: mixed y-axis orientations");
    Raster out(dst_geometry);
    const double ystep = sg.y_axis_flipped ? -sg.cell_size_km : sg.cell_size_km;
    for (int r = 0; r < dst_geometry.height_px; ++r) {
        const double y = dst_geometry.row_y_km(r);
        const int sr = nearest_index(y, sg.origin_y_km, ystep, sg.height_px);
        for (int c = 0; c < dst_geometry.width_px; ++c) {
            const double x = dst_geometry.col_x_km(c);
            const int sc = nearest_index(x, sg.origin_x_km, sg.cell_size_km, sg.width_px);
            if (sr < 0 || sc < 0)
                throw std::runtime_error("regrid_nearest: destination extends outside source coverage");
            out.at(r, c) = src.at(sr, sc);
        }
    }
    return out;
}

RasterGeometry window_geometry(const Mask& mask, int side_px, double margin_km) {
    mask.geometry.validate();
    if (side_px < 1) throw std::invalid_argument("window: side_px must be >= 1");
    const auto e = mask.extent();
    const int margin_px = int(std::ceil(margin_km / mask.geometry.cell_size_km));
    const int ext_w = e.col1 - e.col0 + 1;
    const int ext_h = e.row1 - e.row0 + 1;
    if (ext_w > side_px - 2 * margin_px || ext_h > side_px - 2 * margin_px)
        throw std::runtime_error("window: mask extent does not fit side_px minus margins");

    // Center the window on the mask extent; slack is split evenly with the
    // extra pixel going right/down.
    const int col0 = e.col0 - (side_px - ext_w) / 2;
    const int row0 = e.row0 - (side_px - ext_h) / 2;

    RasterGeometry w;
    w.width_px = side_px;
    w.height_px = side_px;
    w.cell_size_km = mask.geometry.cell_size_km;
    w.origin_x_km = mask.geometry.col_x_km(col0);
    w.origin_y_km = mask.geometry.row_y_km(row0);
    w.y_axis_flipped = mask.geometry.y_axis_flipped;
    return w;
}

Raster crop_to(const Raster& src, const RasterGeometry& window) {
    src.check_shape();
    const RasterGeometry& sg = src.geometry;
    if (sg.cell_size_km != window.cell_size_km || sg.y_axis_flipped != window.y_axis_flipped)
        throw std::invalid_argument("crop: window must share cell size and orientation with source");
    const double fc = (window.origin_x_km - sg.origin_x_km) / sg.cell_size_km;
    const double fr = (sg.y_axis_flipped ? (sg.origin_y_km - window.origin_y_km)
                                         : (window.origin_y_km - sg.origin_y_km)) /
                      sg.cell_size_km;
    const int c0 = int(std::lround(fc));
    const int r0 = int(std::lround(fr));
    if (std::abs(fc - c0) > 1e-9 || std::abs(fr - r0) > 1e-9)
        throw std::invalid_argument("crop: window is not grid-aligned with source");
    if (r0 < 0 || c0 < 0 || r0 + window.height_px > sg.height_px || c0 + window.width_px > sg.width_px)
        throw std::runtime_error("crop: window not coverable by source");
    Raster out(window);
    for (int r = 0; r < window.height_px; ++r)
        for (int c = 0; c < window.width_px; ++c) out.at(r, c) = src.at(r0 + r, c0 + c);
    return out;
}

Raster crop_window(const Raster& src, const RasterGeometry& output_mask_geometry, const Mask& mask,
                   int side_px, double margin_km) {
    if (mask.geometry != output_mask_geometry)
        throw std::invalid_argument("crop_window: mask/geometry mismatch");
    return crop_to(src, window_geometry(mask, side_px, margin_km));
}

LagCorrelationReport lag_correlation_check(const FieldSeries& forecast, const FieldSeries& obs,
                                           const Mask& mask, const std::vector<int>& lags) {
    forecast.validate();
    obs.validate();
    if (!forecast.entries.empty() && forecast.entries[0].second.geometry != mask.geometry)
        throw std::invalid_argument("lag_correlation_check: forecast/mask geometry mismatch");

    LagCorrelationReport report;
    double best_r = -2.0;
    for (int lag : lags) {
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        std::size_t n = 0;
        for (const auto& fe : forecast.entries) {
            const Raster* o = obs.find(fe.first.plus_hours(lag));
            if (!o) continue;
            if (o->geometry != mask.geometry)
                throw std::invalid_argument("lag_correlation_check: obs/mask geometry mismatch");
            for (std::size_t i = 0; i < mask.valid.size(); ++i) {
                if (!mask.valid[i]) continue;
                const double a = fe.second.values[i];
                const double b = o->values[i];
                if (std::isnan(a) || std::isnan(b)) continue;
                sx += a;
                sy += b;
                sxx += a * a;
                syy += b * b;
                sxy += a * b;
                ++n;
            }
        }
        if (n < 2) throw std::runtime_error("lag_correlation_check: fewer than 2 overlapping samples at lag " +
                                            std::to_string(lag));
        const double vx = sxx - sx * sx / double(n);
        const double vy = syy - sy * sy / double(n);
        LagCorrelation row{lag, 0.0, false};
        if (vx > 0.0 && vy > 0.0) {
            row.pearson_r = (sxy - sx * sy / double(n)) / std::sqrt(vx * vy);
            row.defined = true;
            if (row.pearson_r > best_r) {
                best_r = row.pearson_r;
                report.argmax_lag = lag;
            }
        }
        report.rows.push_back(row);
    }
    return report;
}

} // namespace stratus
