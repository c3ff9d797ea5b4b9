#include "stratus/features.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <stdexcept>

namespace stratus {

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = {
        "harmonie", "hm2",   "hm1",    "hp1",          "hp2",
        "gefs_avg", "ga_prev", "ga_next", "gefs_control", "gefs_q1",
        "gefs_q3",  "gefs_t", "init_obs", "ydim",         "xdim",
        "tdim",     "harmonie_past_error", "gefs_avg_past_error", "gefs_avg_lmax"};
    return names;
}

int FeatureTable::col(const std::string& name) const {
    for (std::size_t i = 0; i < column_names.size(); ++i)
        if (column_names[i] == name) return int(i);
    throw std::invalid_argument("feature table: no column named " + name);
}

bool FeatureTable::has_col(const std::string& name) const {
    return std::find(column_names.begin(), column_names.end(), name) != column_names.end();
}

FeatureTable FeatureTable::select_rows(const std::vector<std::uint32_t>& rows) const {
    FeatureTable out;
    out.column_names = column_names;
    out.columns.resize(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out.columns[c].reserve(rows.size());
        for (auto r : rows) out.columns[c].push_back(columns[c][r]);
    }
    out.row_index.reserve(rows.size());
    for (auto r : rows) out.row_index.push_back(row_index[r]);
    return out;
}

FeatureTable FeatureTable::select_cols(const std::vector<std::string>& names) const {
    FeatureTable out;
    out.row_index = row_index;
    for (const auto& n : names) {
        out.column_names.push_back(n);
        out.columns.push_back(columns[std::size_t(col(n))]);
    }
    return out;
}

EnsembleStats ensemble_stats(const std::vector<Raster>& members, int control_index) {
    if (members.size() != 11)
        throw std::invalid_argument("ensemble_stats: quartile rule requires exactly 11 members, got " +
                                    std::to_string(members.size()));
    if (control_index < 0 || control_index >= 11)
        throw std::invalid_argument("ensemble_stats: control index out of range");
    const RasterGeometry g = members[0].geometry;
    for (const auto& m : members)
        if (m.geometry != g) throw std::invalid_argument("ensemble_stats: member geometry mismatch");

    EnsembleStats out{Raster(g), Raster(g), Raster(g), members[std::size_t(control_index)]};
    float vals[11];
    for (std::size_t i = 0; i < g.cells(); ++i) {
        double sum = 0.0;
        for (int m = 0; m < 11; ++m) {
            vals[m] = members[std::size_t(m)].values[i];
            sum += vals[m];
        }
        std::sort(vals, vals + 11);
        out.gefs_avg.values[i] = float(sum / 11.0);
        out.gefs_q1.values[i] = vals[2];  // third lowest
        out.gefs_q3.values[i] = vals[8];  // third highest
    }
    return out;
}

Raster raw_ensemble_fraction(const std::vector<Raster>& members, double h, bool strict) {
    if (members.empty()) throw std::invalid_argument("raw_ensemble_fraction: no members");
    const RasterGeometry g = members[0].geometry;
    for (const auto& m : members)
        if (m.geometry != g) throw std::invalid_argument("raw_ensemble_fraction: geometry mismatch");
    Raster out(g);
    const double n = double(members.size());
    for (std::size_t i = 0; i < g.cells(); ++i) {
        int count = 0;
        for (const auto& m : members) {
            const double v = m.values[i];
            if (strict ? v > h : v >= h) ++count;
        }
        out.values[i] = float(count / n);
    }
    return out;
}

namespace {

// 1D sliding maximum (monotone deque), window 2*hw+1, valid positions only.
void sliding_max_1d(const float* in, int n, int hw, float* out) {
    std::deque<int> q;
    for (int i = 0; i < n; ++i) {
        while (!q.empty() && in[q.back()] <= in[i]) q.pop_back();
        q.push_back(i);
        const int center = i - hw;
        if (center >= hw) {
            while (q.front() < center - hw) q.pop_front();
            out[center - hw] = in[q.front()];
        }
    }
}

} // namespace

Raster local_max(const Raster& src, int half_width_px) {
    src.check_shape();
    if (half_width_px < 0) throw std::invalid_argument("local_max: negative half width");
    const int hw = half_width_px;
    const int H = src.geometry.height_px, W = src.geometry.width_px;
    if (H < 2 * hw + 1 || W < 2 * hw + 1)
        throw std::runtime_error("local_max: source smaller than the window");

    // horizontal pass: W-2hw columns, all rows
    std::vector<float> mid(std::size_t(H) * (W - 2 * hw));
    for (int r = 0; r < H; ++r)
        sliding_max_1d(&src.values[std::size_t(r) * W], W, hw, &mid[std::size_t(r) * (W - 2 * hw)]);

    RasterGeometry og = src.geometry;
    og.width_px = W - 2 * hw;
    og.height_px = H - 2 * hw;
    og.origin_x_km = src.geometry.col_x_km(hw);
    og.origin_y_km = src.geometry.row_y_km(hw);
    Raster out(og);

    // vertical pass per column
    std::vector<float> colbuf(std::size_t(H)), colout(std::size_t(H - 2 * hw));
    for (int c = 0; c < og.width_px; ++c) {
        for (int r = 0; r < H; ++r) colbuf[std::size_t(r)] = mid[std::size_t(r) * (W - 2 * hw) + c];
        sliding_max_1d(colbuf.data(), H, hw, colout.data());
        for (int r = 0; r < og.height_px; ++r) out.at(r, c) = colout[std::size_t(r)];
    }
    return out;
}

namespace {

const Raster& require_entry(const FieldSeries& s, UtcTime t, const char* what) {
    const Raster* r = s.find(t);
    if (!r)
        throw std::runtime_error(std::string("missing feature: no ") + what + " entry at " + t.iso());
    return *r;
}

} // namespace

HourlyNeighbors temporal_neighbor_features(const FieldSeries& hourly, UtcTime verification) {
    return HourlyNeighbors{require_entry(hourly, verification.plus_hours(-2), "lead-2"),
                           require_entry(hourly, verification.plus_hours(-1), "lead-1"),
                           require_entry(hourly, verification.plus_hours(1), "lead+1"),
                           require_entry(hourly, verification.plus_hours(2), "lead+2")};
}

BlockNeighbors temporal_block_neighbors(const FieldSeries& blocks, UtcTime block_end) {
    return BlockNeighbors{require_entry(blocks, block_end.plus_hours(-3), "previous block"),
                          require_entry(blocks, block_end.plus_hours(3), "next block")};
}

PastError past_error(const FieldSeries& forecast, const FieldSeries& obs, UtcTime verification) {
    const UtcTime prev = verification.plus_hours(-24);
    const Raster* f = forecast.find(prev);
    const Raster* o = obs.find(prev);
    if (!f || !o) {
        const Raster* any = forecast.find(verification);
        if (!any) throw std::runtime_error("past_error: no forecast at " + verification.iso());
        Raster zeros(any->geometry, 0.0f);
        return {zeros, true};
    }
    if (f->geometry != o->geometry) throw std::invalid_argument("past_error: geometry mismatch");
    Raster err(f->geometry);
    for (std::size_t i = 0; i < err.values.size(); ++i)
        err.values[i] = f->values[i] - o->values[i];
    return {err, false};
}

CoordinateTimeFeatures coordinate_time_features(const RasterGeometry& geometry, UtcTime date) {
    geometry.validate();
    const int d = date.day_of_year();
    if (d < 1 || d > 366) throw std::invalid_argument("coordinate_time_features: bad day of year");
    CoordinateTimeFeatures out{Raster(geometry), Raster(geometry), Raster(geometry)};
    const float t = float(std::cos(double(d) * 2.0 * 3.14159265358979323846 / 365.0));
    for (int r = 0; r < geometry.height_px; ++r)
        for (int c = 0; c < geometry.width_px; ++c) {
            out.xdim.at(r, c) = float(c);
            out.ydim.at(r, c) = float(r);
            out.tdim.at(r, c) = t;
        }
    return out;
}

Raster init_obs_feature(const FieldSeries& obs, UtcTime init_time) {
    return require_entry(obs, init_time, "initialization-hour observation");
}

StandardizationStats compute_standardization(const FeatureTable& table,
                                             const std::vector<std::uint32_t>& training_rows) {
    if (training_rows.empty()) throw std::invalid_argument("standardization: no training rows");
    StandardizationStats st;
    st.column_names = table.column_names;
    const double n = double(training_rows.size());
    for (const auto& col : table.columns) {
        double sum = 0.0;
        for (auto r : training_rows) sum += col[r];
        const double mean = sum / n;
        double ss = 0.0;
        for (auto r : training_rows) {
            const double d = col[r] - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / n);
        st.mean.push_back(mean);
        st.sd.push_back(sd);
        st.zero_variance.push_back(sd == 0.0 ? 1 : 0);
    }
    return st;
}

FeatureTable standardize(const FeatureTable& table, const StandardizationStats& stats) {
    if (stats.column_names != table.column_names)
        throw std::invalid_argument("standardize: column names do not match the fitted stats");
    FeatureTable out = table;
    for (std::size_t c = 0; c < out.columns.size(); ++c) {
        auto& col = out.columns[c];
        if (stats.zero_variance[c]) {
            std::fill(col.begin(), col.end(), 0.0);
            continue;
        }
        const double mean = stats.mean[c], inv = 1.0 / stats.sd[c];
        for (auto& v : col) v = (v - mean) * inv;
    }
    return out;
}

void tabularize(FeatureTable& table, LabelVector& labels, UtcTime t,
                const NamedRasters& feature_rasters, const Raster& label_raster, const Mask& mask) {
    if (label_raster.geometry != mask.geometry)
        throw std::invalid_argument("tabularize: label raster geometry mismatch");
    for (const auto& [name, r] : feature_rasters)
        if (r->geometry != mask.geometry)
            throw std::invalid_argument("tabularize: raster '" + name + "' geometry mismatch");

    if (table.column_names.empty()) {
        for (const auto& [name, r] : feature_rasters) {
            (void)r;
            table.column_names.push_back(name);
        }
        table.columns.resize(table.column_names.size());
    } else {
        std::size_t i = 0;
        for (const auto& [name, r] : feature_rasters) {
            (void)r;
            if (i >= table.column_names.size() || table.column_names[i] != name)
                throw std::invalid_argument("tabularize: column set differs from previous timestamps");
            ++i;
        }
        if (i != table.column_names.size())
            throw std::invalid_argument("tabularize: column set differs from previous timestamps");
    }

    for (int r = 0; r < mask.geometry.height_px; ++r)
        for (int c = 0; c < mask.geometry.width_px; ++c) {
            if (!mask.at(r, c)) continue;
            const float lv = label_raster.at(r, c);
            if (lv != 0.0f && lv != 1.0f)
                throw std::invalid_argument("tabularize: labels must be 0 or 1");
            std::size_t ci = 0;
            for (const auto& [name, raster] : feature_rasters) {
                (void)name;
                table.columns[ci++].push_back(raster->at(r, c));
            }
            table.row_index.push_back(RowKey{t.seconds(), std::uint16_t(r), std::uint16_t(c)});
            labels.push_back(lv == 1.0f ? 1 : 0);
        }
}

Raster scatter_column(const FeatureTable& table, const std::string& column, UtcTime t,
                      const Mask& mask) {
    const auto& col = table.columns[std::size_t(table.col(column))];
    Raster out(mask.geometry, std::nanf(""));
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        if (table.row_index[i].time_sec != t.seconds()) continue;
        out.at(table.row_index[i].px_row, table.row_index[i].px_col) = float(col[i]);
    }
    return out;
}

void write_feature_csv(const std::string& path, const FeatureTable& table,
                       const LabelVector& labels) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "timestamp,px_row,px_col";
    for (const auto& n : table.column_names) out << "," << n;
    out << ",label\n";
    char buf[32];
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        out << UtcTime(table.row_index[i].time_sec).iso() << "," << table.row_index[i].px_row << ","
            << table.row_index[i].px_col;
        for (const auto& col : table.columns) {
            std::snprintf(buf, sizeof(buf), "%.17g", col[i]);
            out << "," << buf;
        }
        out << "," << int(labels[i]) << "\n";
    }
    if (!out) throw std::runtime_error("short write: " + path);
}

} // namespace stratus
