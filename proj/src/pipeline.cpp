#include "stratus/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "stratus/gridops.hpp"

namespace stratus {

namespace {

Mask crop_mask(const Mask& mask, const RasterGeometry& window) {
    Raster as_raster(mask.geometry);
    for (std::size_t i = 0; i < mask.valid.size(); ++i)
        as_raster.values[i] = mask.valid[i] ? 1.0f : 0.0f;
    const Raster cropped = crop_to(as_raster, window);
    Mask out(window);
    for (std::size_t i = 0; i < out.valid.size(); ++i) out.valid[i] = cropped.values[i] > 0.5f;
    out.recount();
    if (out.valid_count != mask.valid_count)
        throw std::runtime_error("window does not contain every valid mask cell");
    return out;
}

} // namespace

FeatureBuilder::FeatureBuilder(const Scenario& scenario, int lead_hours, double threshold_mm)
    : scenario_(&scenario), lead_(lead_hours), threshold_(threshold_mm) {
    const ScenarioConfig& cfg = scenario.config;
    if (std::find(cfg.leads.begin(), cfg.leads.end(), lead_hours) == cfg.leads.end())
        throw std::invalid_argument("feature builder: scenario has no data for lead " +
                                    std::to_string(lead_hours));
    if (int(scenario.coarse_members.size()) != 11)
        throw std::invalid_argument("feature builder: the quartile features need 11 members");

    window_ = window_geometry(scenario.mask, cfg.window_side_px, cfg.window_margin_km);
    window_mask_ = crop_mask(scenario.mask, window_);

    lmax_half_width_px_ = int(std::lround(50.0 / cfg.obs_cell_km));
    lmax_source_geom_ = window_;
    lmax_source_geom_.width_px += 2 * lmax_half_width_px_;
    lmax_source_geom_.height_px += 2 * lmax_half_width_px_;
    lmax_source_geom_.origin_x_km -= lmax_half_width_px_ * cfg.obs_cell_km;
    lmax_source_geom_.origin_y_km += lmax_half_width_px_ * cfg.obs_cell_km;  // flipped axis

    const UtcTime start = cfg.start();

    obs_w_.source = "obs";
    std::set<std::int64_t> obs_needed;
    for (int d = 0; d < cfg.n_days; ++d) {
        obs_needed.insert(start.plus_days(d).seconds());                    // init hour
        obs_needed.insert(start.plus_days(d).plus_hours(lead_).seconds());  // label hour
        obs_needed.insert(current_block_end(start.plus_days(d)).seconds()); // gefs error hour
    }
    for (auto sec : obs_needed) {
        const Raster* r = scenario.observations.find(UtcTime(sec));
        if (!r) throw std::runtime_error("scenario lacks an observation at " + UtcTime(sec).iso());
        obs_w_.entries.emplace_back(UtcTime(sec), crop_to(*r, window_));
    }

    fine_w_.source = "fine";
    for (const auto& [t, raster] : scenario.fine_deterministic.entries)
        fine_w_.entries.emplace_back(t, regrid_nearest(raster, window_));

    gmean_w_.source = "gefs_avg";
    for (std::size_t e = 0; e < scenario.coarse_members[0].entries.size(); ++e) {
        const UtcTime t = scenario.coarse_members[0].entries[e].first;
        Raster mean(scenario.coarse_members[0].entries[e].second.geometry, 0.0f);
        for (const auto& member : scenario.coarse_members) {
            const Raster* r = member.find(t);
            if (!r) throw std::runtime_error("member series misaligned at " + t.iso());
            for (std::size_t i = 0; i < mean.values.size(); ++i) mean.values[i] += r->values[i];
        }
        for (auto& v : mean.values) v /= float(scenario.coarse_members.size());
        gmean_w_.entries.emplace_back(t, regrid_nearest(mean, window_));
    }
}

UtcTime FeatureBuilder::init_day(int day_index) const {
    return scenario_->config.start().plus_days(day_index);
}

UtcTime FeatureBuilder::verification(int day_index) const {
    return init_day(day_index).plus_hours(lead_);
}

UtcTime FeatureBuilder::current_block_end(UtcTime init) const {
    return init.plus_hours(3 * ((lead_ + 2) / 3));
}

NamedRasters FeatureBuilder::DayFeatures::named() const {
    NamedRasters out;
    out.reserve(rasters.size());
    for (const auto& [name, raster] : rasters) out.emplace_back(name, &raster);
    return out;
}

FeatureBuilder::DayFeatures FeatureBuilder::build_day(int day_index) const {
    const ScenarioConfig& cfg = scenario_->config;
    DayFeatures day;
    day.init = init_day(day_index);
    day.verification = day.init.plus_hours(lead_);
    const UtcTime block_end = current_block_end(day.init);

    // Regrid this day's member forecasts for the current block once.
    std::vector<Raster> members_w;
    members_w.reserve(scenario_->coarse_members.size());
    for (const auto& member : scenario_->coarse_members) {
        const Raster* r = member.find(block_end);
        if (!r) throw std::runtime_error("missing member block at " + block_end.iso());
        members_w.push_back(regrid_nearest(*r, window_));
    }
    const EnsembleStats stats = ensemble_stats(members_w, 0);
    const Raster gefs_t = raw_ensemble_fraction(members_w, threshold_);

    // Local maximum needs coverage beyond the window; take it from the
    // coarse-grid mean of the current block.
    Raster coarse_mean(scenario_->coarse_members[0].find(block_end)->geometry, 0.0f);
    for (const auto& member : scenario_->coarse_members) {
        const Raster* r = member.find(block_end);
        for (std::size_t i = 0; i < coarse_mean.values.size(); ++i)
            coarse_mean.values[i] += r->values[i];
    }
    for (auto& v : coarse_mean.values) v /= float(scenario_->coarse_members.size());
    const Raster lmax =
        local_max(regrid_nearest(coarse_mean, lmax_source_geom_), lmax_half_width_px_);
    if (lmax.geometry != window_)
        throw std::logic_error("local_max output does not line up with the window");

    const HourlyNeighbors hn = temporal_neighbor_features(fine_w_, day.verification);
    const Raster* harmonie = fine_w_.find(day.verification);
    if (!harmonie) throw std::runtime_error("missing fine forecast at " + day.verification.iso());
    const BlockNeighbors bn = temporal_block_neighbors(gmean_w_, block_end);
    const Raster* gefs_avg = gmean_w_.find(block_end);

    const PastError h_err = past_error(fine_w_, obs_w_, day.verification);
    const PastError g_err = past_error(gmean_w_, obs_w_, block_end);
    day.past_flagged = h_err.flagged || g_err.flagged;

    const CoordinateTimeFeatures coords = coordinate_time_features(window_, day.verification);
    const Raster init_obs = init_obs_feature(obs_w_, day.init);

    const Raster* label_obs = obs_w_.find(day.verification);
    if (!label_obs) throw std::runtime_error("missing observation at " + day.verification.iso());
    day.label_raster = threshold_labels(*label_obs, threshold_);

    day.rasters.emplace_back("harmonie", *harmonie);
    day.rasters.emplace_back("hm2", hn.hm2);
    day.rasters.emplace_back("hm1", hn.hm1);
    day.rasters.emplace_back("hp1", hn.hp1);
    day.rasters.emplace_back("hp2", hn.hp2);
    day.rasters.emplace_back("gefs_avg", *gefs_avg);
    day.rasters.emplace_back("ga_prev", bn.ga_prev);
    day.rasters.emplace_back("ga_next", bn.ga_next);
    day.rasters.emplace_back("gefs_control", stats.gefs_control);
    day.rasters.emplace_back("gefs_q1", stats.gefs_q1);
    day.rasters.emplace_back("gefs_q3", stats.gefs_q3);
    day.rasters.emplace_back("gefs_t", gefs_t);
    day.rasters.emplace_back("init_obs", init_obs);
    day.rasters.emplace_back("ydim", coords.ydim);
    day.rasters.emplace_back("xdim", coords.xdim);
    day.rasters.emplace_back("tdim", coords.tdim);
    day.rasters.emplace_back("harmonie_past_error", h_err.error);
    day.rasters.emplace_back("gefs_avg_past_error", g_err.error);
    day.rasters.emplace_back("gefs_avg_lmax", lmax);
    day.rasters.emplace_back(kPastErrorFlag,
                             Raster(window_, day.past_flagged ? 1.0f : 0.0f));
    (void)cfg;
    return day;
}

TabularData build_tabular(const Scenario& scenario, int lead_hours, double threshold_mm) {
    FeatureBuilder builder(scenario, lead_hours, threshold_mm);
    TabularData data;
    data.window = builder.window();
    data.window_mask = builder.window_mask();
    for (int d = 0; d < builder.n_days(); ++d) {
        data.day_row_begin.push_back(std::uint32_t(data.table.n_rows()));
        const auto day = builder.build_day(d);
        tabularize(data.table, data.labels, day.verification, day.named(), day.label_raster,
                   data.window_mask);
        data.days.push_back(day.init);
    }
    data.day_row_begin.push_back(std::uint32_t(data.table.n_rows()));
    return data;
}

std::vector<std::uint32_t> rows_for(const TabularData& data, const SplitPlan& plan,
                                    DayAssignment assignment) {
    std::vector<std::uint32_t> rows;
    for (std::size_t d = 0; d < data.days.size(); ++d) {
        bool wanted = false;
        for (const auto& pd : plan.days)
            if (pd.date == data.days[d] && pd.assignment == assignment) {
                wanted = true;
                break;
            }
        if (!wanted) continue;
        for (std::uint32_t r = data.day_row_begin[d]; r < data.day_row_begin[d + 1]; ++r)
            rows.push_back(r);
    }
    return rows;
}

const std::vector<std::string>& network_main_channels() {
    static const std::vector<std::string> names = {
        "harmonie", "hm2",     "hm1",      "hp1",          "hp2",     "gefs_avg", "ga_prev",
        "ga_next",  "gefs_control", "gefs_q1", "gefs_q3",  "gefs_t",  "init_obs", "gefs_avg_lmax"};
    return names;
}

const std::vector<std::string>& network_late_channels() {
    static const std::vector<std::string> names = {"xdim", "ydim", "tdim"};
    return names;
}

NetDataset build_net_dataset(const FeatureBuilder& builder, const StandardizationStats& stats,
                             const std::vector<int>& day_indices) {
    const auto& main_names = network_main_channels();
    const auto& late_names = network_late_channels();
    const RasterGeometry& w = builder.window();
    const Mask& mask = builder.window_mask();

    auto stat_of = [&](const std::string& name) -> std::pair<double, double> {
        for (std::size_t i = 0; i < stats.column_names.size(); ++i)
            if (stats.column_names[i] == name)
                return {stats.mean[i], stats.zero_variance[i] ? 0.0 : 1.0 / stats.sd[i]};
        throw std::invalid_argument("net dataset: no standardization stats for " + name);
    };

    NetDataset out;
    for (int d : day_indices) {
        const auto day = builder.build_day(d);
        auto raster_of = [&](const std::string& name) -> const Raster& {
            for (const auto& [n, r] : day.rasters)
                if (n == name) return r;
            throw std::logic_error("net dataset: day features lack " + name);
        };

        Tensor<float> main(1, w.height_px, w.width_px, int(main_names.size()));
        for (std::size_t ch = 0; ch < main_names.size(); ++ch) {
            const auto [mean, inv] = stat_of(main_names[ch]);
            const Raster& r = raster_of(main_names[ch]);
            for (int y = 0; y < w.height_px; ++y)
                for (int x = 0; x < w.width_px; ++x)
                    main.at(0, y, x, int(ch)) = float((double(r.at(y, x)) - mean) * inv);
        }
        Tensor<float> late(1, w.height_px, w.width_px, int(late_names.size()));
        for (std::size_t ch = 0; ch < late_names.size(); ++ch) {
            const auto [mean, inv] = stat_of(late_names[ch]);
            const Raster& r = raster_of(late_names[ch]);
            for (int y = 0; y < w.height_px; ++y)
                for (int x = 0; x < w.width_px; ++x)
                    late.at(0, y, x, int(ch)) = float((double(r.at(y, x)) - mean) * inv);
        }

        std::vector<std::uint8_t> labels;
        labels.reserve(mask.valid_count);
        for (int y = 0; y < w.height_px; ++y)
            for (int x = 0; x < w.width_px; ++x)
                if (mask.at(y, x)) labels.push_back(day.label_raster.at(y, x) == 1.0f ? 1 : 0);

        out.main.push_back(std::move(main));
        out.late.push_back(std::move(late));
        out.labels.push_back(std::move(labels));
    }
    return out;
}

} // namespace stratus
