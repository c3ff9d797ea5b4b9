#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stratus/time.hpp"

namespace stratus {

// Projected-grid geometry. (origin_x_km, origin_y_km) is the center of the
// top-left cell; x grows with the column index. When y_axis_flipped is true
// the projected y coordinate decreases as the row index grows (the usual
// image convention for the radar grids this mimics).
struct RasterGeometry {
    int width_px = 0;
    int height_px = 0;
    double cell_size_km = 0.0;
    double origin_x_km = 0.0;
    double origin_y_km = 0.0;
    bool y_axis_flipped = true;

    void validate() const {
        if (width_px < 1 || height_px < 1) throw std::invalid_argument("geometry: empty grid");
        if (!(cell_size_km > 0.0)) throw std::invalid_argument("geometry: cell size must be positive");
    }

    std::size_t cells() const { return std::size_t(width_px) * std::size_t(height_px); }

    double col_x_km(int col) const { return origin_x_km + col * cell_size_km; }
    double row_y_km(int row) const {
        return y_axis_flipped ? origin_y_km - row * cell_size_km : origin_y_km + row * cell_size_km;
    }

    // Extent covered by cells (outer cell edges).
    double min_x_km() const { return origin_x_km - 0.5 * cell_size_km; }
    double max_x_km() const { return origin_x_km + (width_px - 0.5) * cell_size_km; }
    double top_y_km() const { return origin_y_km + (y_axis_flipped ? 0.5 : -0.5) * cell_size_km; }
    double bottom_y_km() const {
        return y_axis_flipped ? origin_y_km - (height_px - 0.5) * cell_size_km
                              : origin_y_km + (height_px - 0.5) * cell_size_km;
    }

    friend bool operator==(const RasterGeometry& a, const RasterGeometry& b) {
        return a.width_px == b.width_px && a.height_px == b.height_px &&
               a.cell_size_km == b.cell_size_km && a.origin_x_km == b.origin_x_km &&
               a.origin_y_km == b.origin_y_km && a.y_axis_flipped == b.y_axis_flipped;
    }
    friend bool operator!=(const RasterGeometry& a, const RasterGeometry& b) { return !(a == b); }
};

// One 2D grid of values (mm/h or derived feature units), row-major.
// NaN is the fill sentinel for invalid cells.
struct Raster {
    RasterGeometry geometry;
    std::vector<float> values;

    Raster() = default;
    Raster(RasterGeometry g, float fill = 0.0f) : geometry(g), values(g.cells(), fill) {
        geometry.validate();
    }

    float& at(int row, int col) { return values[std::size_t(row) * geometry.width_px + col]; }
    float at(int row, int col) const { return values[std::size_t(row) * geometry.width_px + col]; }

    static bool is_fill(float v) { return std::isnan(v); }

    void check_shape() const {
        if (values.size() != geometry.cells()) throw std::invalid_argument("raster: value count does not match geometry");
    }
};

// Binary validity mask on a grid.
struct Mask {
    RasterGeometry geometry;
    std::vector<std::uint8_t> valid;
    std::size_t valid_count = 0;

    Mask() = default;
    explicit Mask(RasterGeometry g) : geometry(g), valid(g.cells(), 0) {}

    bool at(int row, int col) const { return valid[std::size_t(row) * geometry.width_px + col] != 0; }
    void set(int row, int col, bool v) { valid[std::size_t(row) * geometry.width_px + col] = v ? 1 : 0; }

    void recount() {
        valid_count = 0;
        for (auto v : valid) valid_count += v ? 1 : 0;
    }

    // Tight bounding box of valid cells: {row0, col0, row1, col1} inclusive.
    struct Extent { int row0, col0, row1, col1; };
    Extent extent() const {
        Extent e{geometry.height_px, geometry.width_px, -1, -1};
        for (int r = 0; r < geometry.height_px; ++r)
            for (int c = 0; c < geometry.width_px; ++c)
                if (at(r, c)) {
                    e.row0 = std::min(e.row0, r);
                    e.col0 = std::min(e.col0, c);
                    e.row1 = std::max(e.row1, r);
                    e.col1 = std::max(e.col1, c);
                }
        if (e.row1 < 0) throw std::runtime_error("mask: no valid cells");
        return e;
    }
};

// Time-indexed sequence of rasters sharing one geometry.
struct FieldSeries {
    int lead_hours = 0;
    std::string source;  // "obs", "member<k>", "fine", or a derived name
    std::vector<std::pair<UtcTime, Raster>> entries;

    void validate() const {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            entries[i].second.check_shape();
            if (i > 0) {
                if (!(entries[i - 1].first < entries[i].first))
                    throw std::invalid_argument("series: timestamps must be strictly increasing");
                if (entries[i].second.geometry != entries[0].second.geometry)
                    throw std::invalid_argument("series: geometry mismatch across entries");
            }
        }
    }

    const Raster* find(UtcTime t) const {
        for (const auto& e : entries)
            if (e.first == t) return &e.second;
        return nullptr;
    }
};

} // namespace stratus
