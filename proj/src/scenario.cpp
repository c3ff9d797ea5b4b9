#include "stratus/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "stratus/raster_io.hpp"
#include "stratus/rng.hpp"

namespace fs = std::filesystem;

namespace stratus {

void ScenarioConfig::validate() const {
    if (n_days < 1) throw std::invalid_argument("scenario: n_days must be >= 1");
    if (n_members < 1) throw std::invalid_argument("scenario: n_members must be >= 1");
    if (!(coarse_cell_km > 0) || !(fine_cell_km > 0) || !(obs_cell_km > 0))
        throw std::invalid_argument("scenario: cell sizes must be positive");
    if (coarse_bias.noise_sd < 0 || fine_bias.noise_sd < 0)
        throw std::invalid_argument("scenario: noise_sd must be >= 0");
    if (cover_targets.empty()) throw std::invalid_argument("scenario: need at least one cover target");
    for (auto [h, t] : cover_targets) {
        if (!(h > 0)) throw std::invalid_argument("scenario: threshold must be positive");
        if (t <= 0.0 || t > 0.5)
            throw std::invalid_argument("scenario: cover target must be in (0, 0.5]");
    }
    if (leads.empty()) throw std::invalid_argument("scenario: need at least one lead");
    for (int l : leads)
        if (l < 3) throw std::invalid_argument("scenario: leads must be >= 3 hours");
    if (mask_side_px < 4) throw std::invalid_argument("scenario: mask side too small");
}

namespace {

struct Blob {
    double cx, cy;      // km at day start
    double amp, sigma;  // amplitude (relative), radius km
};

struct DayWeather {
    std::vector<Blob> blobs;
    double vx, vy;  // advection km/h
};

struct TruthField {
    std::vector<DayWeather> days;
    std::int64_t start_hour;  // absolute hours of day 0, 00 UTC

    // Unscaled rate at projected point (x, y) km and absolute time t (hours).
    double eval(double x, double y, double t) const {
        std::int64_t rel_fl = std::int64_t(std::floor((t - double(start_hour)) / 24.0));
        std::int64_t d = std::clamp<std::int64_t>(rel_fl, 0, std::int64_t(days.size()) - 1);
        const DayWeather& w = days[std::size_t(d)];
        const double dt = t - double(start_hour + d * 24);
        double v = 0.0;
        for (const Blob& b : w.blobs) {
            const double dx = x - (b.cx + w.vx * dt);
            const double dy = y - (b.cy + w.vy * dt);
            const double q = (dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma);
            if (q < 40.0) v += b.amp * std::exp(-q);
        }
        return v;
    }
};

TruthField make_truth(const ScenarioConfig& cfg, const RasterGeometry& obs_geom) {
    TruthField f;
    f.start_hour = cfg.start().hours();
    Pcg32 rng(cfg.seed, 2);
    const double pad = 30.0;
    const double x0 = obs_geom.min_x_km() - pad, x1 = obs_geom.max_x_km() + pad;
    const double ytop = obs_geom.top_y_km() + pad, ybot = obs_geom.bottom_y_km() - pad;
    for (int d = 0; d < cfg.n_days; ++d) {
        DayWeather w;
        auto drift = [&] {
            const double m = rng.uniform(cfg.drift_min_km_h, cfg.drift_max_km_h);
            return rng.next_double() < 0.5 ? -m : m;
        };
        w.vx = drift();
        w.vy = drift();
        for (int b = 0; b < cfg.blobs_per_day; ++b) {
            Blob blob;
            blob.cx = rng.uniform(x0, x1);
            blob.cy = rng.uniform(std::min(ytop, ybot), std::max(ytop, ybot));
            blob.amp = std::exp(0.6 * rng.next_gaussian());
            blob.sigma = rng.uniform(cfg.blob_sigma_min_km, cfg.blob_sigma_max_km);
            w.blobs.push_back(blob);
        }
        f.days.push_back(std::move(w));
    }
    return f;
}

// Hour-ending raster of the truth rate on a grid: sampled at the hour midpoint.
Raster sample_truth(const TruthField& f, const RasterGeometry& g, UtcTime stamp, double amplitude,
                    double offset_km, double shift_hours, double amp_scale, Pcg32* noise,
                    double noise_sd) {
    Raster r(g);
    const double t = double(stamp.hours()) - 0.5 + shift_hours;
    for (int row = 0; row < g.height_px; ++row) {
        const double y = g.row_y_km(row);
        for (int col = 0; col < g.width_px; ++col) {
            const double x = g.col_x_km(col);
            double v = amp_scale * (amplitude * f.eval(x - offset_km, y, t));
            if (noise) v += noise_sd * noise->next_gaussian();
            r.at(row, col) = float(v < 0.0 ? 0.0 : v);
        }
    }
    return r;
}

Mask make_mask(const ScenarioConfig& cfg, const RasterGeometry& obs_geom) {
    Mask m(obs_geom);
    const int r0 = (obs_geom.height_px - cfg.mask_side_px) / 2;
    const int c0 = (obs_geom.width_px - cfg.mask_side_px) / 2;
    for (int r = 0; r < cfg.mask_side_px; ++r)
        for (int c = 0; c < cfg.mask_side_px; ++c) m.set(r0 + r, c0 + c, true);
    Pcg32 rng(cfg.seed, 1);
    for (int h = 0; h < cfg.mask_holes; ++h) {
        const int hr = r0 + int(rng.next_below(std::uint32_t(cfg.mask_side_px)));
        const int hc = c0 + int(rng.next_below(std::uint32_t(cfg.mask_side_px)));
        const int rad = cfg.mask_hole_radius_px;
        for (int dr = -rad; dr <= rad; ++dr)
            for (int dc = -rad; dc <= rad; ++dc) {
                if (dr * dr + dc * dc > rad * rad) continue;
                const int r = hr + dr, c = hc + dc;
                if (r >= 0 && r < obs_geom.height_px && c >= 0 && c < obs_geom.width_px)
                    m.set(r, c, false);
            }
    }
    m.recount();
    if (m.valid_count < 1) throw std::runtime_error("scenario: holes removed every valid cell");
    return m;
}

// Hours (relative to a day's 00 UTC init) that the pipeline needs.
std::set<int> obs_hours(const ScenarioConfig& cfg) {
    std::set<int> hours{0};
    for (int l : cfg.leads)
        for (int d = -2; d <= 2; ++d) hours.insert(l + d);
    return hours;
}

std::set<int> block_end_hours(const ScenarioConfig& cfg) {
    std::set<int> hours;
    for (int l : cfg.leads) {
        const int b = 3 * ((l + 2) / 3);
        hours.insert(b - 3);
        hours.insert(b);
        hours.insert(b + 3);
    }
    return hours;
}

} // namespace

Scenario generate_scenario(const ScenarioConfig& cfg) {
    cfg.validate();

    Scenario s;
    s.config = cfg;

    RasterGeometry obs_geom;
    obs_geom.cell_size_km = cfg.obs_cell_km;
    obs_geom.width_px = cfg.window_side_px + 32;
    obs_geom.height_px = cfg.window_side_px + 32;
    obs_geom.origin_x_km = 0.0;
    obs_geom.origin_y_km = 0.0;
    obs_geom.y_axis_flipped = true;

    s.mask = make_mask(cfg, obs_geom);
    const TruthField truth = make_truth(cfg, obs_geom);

    // Tune the global amplitude by bisection so that the masked exceedance
    // fraction at label hours hits the first cover target.
    std::vector<double> base;
    const UtcTime start = cfg.start();
    for (int d = 0; d < cfg.n_days; ++d)
        for (int l : cfg.leads) {
            const double t = double(start.plus_days(d).plus_hours(l).hours()) - 0.5;
            for (int r = 0; r < obs_geom.height_px; ++r)
                for (int c = 0; c < obs_geom.width_px; ++c) {
                    if (!s.mask.at(r, c)) continue;
                    base.push_back(truth.eval(obs_geom.col_x_km(c), obs_geom.row_y_km(r), t));
                }
        }
    std::sort(base.begin(), base.end());
    const double h0 = cfg.cover_targets[0].first;
    const double target = cfg.cover_targets[0].second;
    auto cover_at = [&](double amp) {
        // fraction of base values with amp * v > h0
        auto it = std::upper_bound(base.begin(), base.end(), h0 / amp);
        return double(base.end() - it) / double(base.size());
    };
    double lo = 1e-6, hi = 1e9;
    if (cover_at(hi) < target)
        throw std::runtime_error("scenario: cover target unreachable with this truth field");
    for (int it = 0; it < 200 && cover_at(lo) > target; ++it) lo /= 2;
    for (int it = 0; it < 100; ++it) {
        const double mid = std::sqrt(lo * hi);  // geometric: amplitude spans decades
        (cover_at(mid) >= target ? hi : lo) = mid;
    }
    s.amplitude = hi;

    // Observations
    s.observations.lead_hours = 0;
    s.observations.source = "obs";
    std::set<std::int64_t> obs_stamps;
    for (int d = 0; d < cfg.n_days; ++d)
        for (int h : obs_hours(cfg)) obs_stamps.insert(start.plus_days(d).plus_hours(h).seconds());
    for (auto sec : obs_stamps) {
        UtcTime t(sec);
        s.observations.entries.emplace_back(
            t, sample_truth(truth, obs_geom, t, s.amplitude, 0.0, 0.0, 1.0, nullptr, 0.0));
    }

    // Fine deterministic forecast, hourly around each lead
    RasterGeometry fine_geom;
    fine_geom.cell_size_km = cfg.fine_cell_km;
    fine_geom.width_px = int(std::ceil((obs_geom.width_px * cfg.obs_cell_km + 40.0) / cfg.fine_cell_km));
    fine_geom.height_px = int(std::ceil((obs_geom.height_px * cfg.obs_cell_km + 40.0) / cfg.fine_cell_km));
    fine_geom.origin_x_km = -20.0;
    fine_geom.origin_y_km = 20.0;
    fine_geom.y_axis_flipped = true;

    Pcg32 fine_noise(cfg.seed, 100);
    s.fine_deterministic.lead_hours = 0;
    s.fine_deterministic.source = "fine";
    std::set<std::int64_t> fine_stamps;
    for (int d = 0; d < cfg.n_days; ++d)
        for (int l : cfg.leads)
            for (int dd = -2; dd <= 2; ++dd)
                fine_stamps.insert(start.plus_days(d).plus_hours(l + dd).seconds());
    const SourceBias& fb = cfg.fine_bias;
    for (auto sec : fine_stamps) {
        UtcTime t(sec);
        s.fine_deterministic.entries.emplace_back(
            t, sample_truth(truth, fine_geom, t, s.amplitude, fb.advection_offset_px * cfg.fine_cell_km,
                            fb.timing_shift_hours, fb.amplitude_scale,
                            fb.noise_sd > 0 ? &fine_noise : nullptr, fb.noise_sd));
    }

    // Coarse ensemble, 3 h blocks; member 0 is the control
    RasterGeometry coarse_geom;
    coarse_geom.cell_size_km = cfg.coarse_cell_km;
    coarse_geom.width_px = int(std::ceil((obs_geom.width_px * cfg.obs_cell_km + 140.0) / cfg.coarse_cell_km));
    coarse_geom.height_px = int(std::ceil((obs_geom.height_px * cfg.obs_cell_km + 140.0) / cfg.coarse_cell_km));
    coarse_geom.origin_x_km = -58.0;
    coarse_geom.origin_y_km = 58.0;
    coarse_geom.y_axis_flipped = true;

    std::set<std::int64_t> block_stamps;
    for (int d = 0; d < cfg.n_days; ++d)
        for (int h : block_end_hours(cfg)) block_stamps.insert(start.plus_days(d).plus_hours(h).seconds());
    const SourceBias& cb = cfg.coarse_bias;
    for (int m = 0; m < cfg.n_members; ++m) {
        Pcg32 noise(cfg.seed, 200 + std::uint64_t(m));
        FieldSeries member;
        member.lead_hours = 0;
        member.source = "member" + std::to_string(m);
        for (auto sec : block_stamps) {
            UtcTime t(sec);
            member.entries.emplace_back(
                t, sample_truth(truth, coarse_geom, t, s.amplitude,
                                cb.advection_offset_px * cfg.coarse_cell_km, cb.timing_shift_hours,
                                cb.amplitude_scale, cb.noise_sd > 0 ? &noise : nullptr, cb.noise_sd));
        }
        s.coarse_members.push_back(std::move(member));
    }

    // Achieved covers from the emitted float32 observations
    for (auto [h, t] : cfg.cover_targets) {
        std::size_t above = 0, total = 0;
        for (int d = 0; d < cfg.n_days; ++d)
            for (int l : cfg.leads) {
                const Raster* o = s.observations.find(start.plus_days(d).plus_hours(l));
                for (std::size_t i = 0; i < s.mask.valid.size(); ++i) {
                    if (!s.mask.valid[i]) continue;
                    ++total;
                    if (o->values[i] > h) ++above;
                }
            }
        s.achieved_cover[h] = double(above) / double(total);
    }
    return s;
}

namespace {

void save_series(const FieldSeries& series, const fs::path& dir, nlohmann::json& list) {
    fs::create_directories(dir);
    for (const auto& [t, raster] : series.entries) {
        const std::string name = t.iso() + ".grid";
        write_raster((dir / name).string(), raster, t);
        list.push_back(name);
    }
}

FieldSeries load_series(const fs::path& dir, const nlohmann::json& list, const std::string& source) {
    FieldSeries s;
    s.source = source;
    for (const auto& name : list) {
        UtcTime t;
        Raster r = read_raster((dir / name.get<std::string>()).string(), &t);
        s.entries.emplace_back(t, std::move(r));
    }
    std::sort(s.entries.begin(), s.entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    s.validate();
    return s;
}

nlohmann::json config_json(const ScenarioConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["n_days"] = c.n_days;
    j["start"] = {c.start_year, c.start_month, c.start_day};
    j["leads"] = c.leads;
    nlohmann::json ct = nlohmann::json::array();
    for (auto [h, t] : c.cover_targets) ct.push_back({h, t});
    j["cover_targets"] = ct;
    j["coarse_cell_km"] = c.coarse_cell_km;
    j["fine_cell_km"] = c.fine_cell_km;
    j["obs_cell_km"] = c.obs_cell_km;
    j["n_members"] = c.n_members;
    auto bias = [](const SourceBias& b) {
        return nlohmann::json{{"advection_offset_px", b.advection_offset_px},
                              {"timing_shift_hours", b.timing_shift_hours},
                              {"amplitude_scale", b.amplitude_scale},
                              {"noise_sd", b.noise_sd}};
    };
    j["coarse_bias"] = bias(c.coarse_bias);
    j["fine_bias"] = bias(c.fine_bias);
    j["mask_side_px"] = c.mask_side_px;
    j["mask_holes"] = c.mask_holes;
    j["mask_hole_radius_px"] = c.mask_hole_radius_px;
    j["window_side_px"] = c.window_side_px;
    j["window_margin_km"] = c.window_margin_km;
    j["blobs_per_day"] = c.blobs_per_day;
    j["blob_sigma_min_km"] = c.blob_sigma_min_km;
    j["blob_sigma_max_km"] = c.blob_sigma_max_km;
    j["drift_min_km_h"] = c.drift_min_km_h;
    j["drift_max_km_h"] = c.drift_max_km_h;
    return j;
}

ScenarioConfig config_from_json(const nlohmann::json& j) {
    ScenarioConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.n_days = j.at("n_days").get<int>();
    c.start_year = j.at("start").at(0).get<int>();
    c.start_month = j.at("start").at(1).get<unsigned>();
    c.start_day = j.at("start").at(2).get<unsigned>();
    c.leads = j.at("leads").get<std::vector<int>>();
    c.cover_targets.clear();
    for (const auto& e : j.at("cover_targets"))
        c.cover_targets.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
    c.coarse_cell_km = j.at("coarse_cell_km").get<double>();
    c.fine_cell_km = j.at("fine_cell_km").get<double>();
    c.obs_cell_km = j.at("obs_cell_km").get<double>();
    c.n_members = j.at("n_members").get<int>();
    auto bias = [](const nlohmann::json& b) {
        return SourceBias{b.at("advection_offset_px").get<double>(),
                          b.at("timing_shift_hours").get<double>(),
                          b.at("amplitude_scale").get<double>(), b.at("noise_sd").get<double>()};
    };
    c.coarse_bias = bias(j.at("coarse_bias"));
    c.fine_bias = bias(j.at("fine_bias"));
    c.mask_side_px = j.at("mask_side_px").get<int>();
    c.mask_holes = j.at("mask_holes").get<int>();
    c.mask_hole_radius_px = j.at("mask_hole_radius_px").get<int>();
    c.window_side_px = j.at("window_side_px").get<int>();
    c.window_margin_km = j.at("window_margin_km").get<double>();
    c.blobs_per_day = j.at("blobs_per_day").get<int>();
    c.blob_sigma_min_km = j.at("blob_sigma_min_km").get<double>();
    c.blob_sigma_max_km = j.at("blob_sigma_max_km").get<double>();
    c.drift_min_km_h = j.at("drift_min_km_h").get<double>();
    c.drift_max_km_h = j.at("drift_max_km_h").get<double>();
    return c;
}

} // namespace

void save_scenario(const Scenario& s, const std::string& dir) {
    fs::create_directories(dir);
    write_mask((fs::path(dir) / "mask.grid").string(), s.mask);

    nlohmann::json manifest;
    manifest["config"] = config_json(s.config);
    manifest["amplitude"] = s.amplitude;
    nlohmann::json cover;
    for (auto [h, c] : s.achieved_cover) cover[std::to_string(h)] = c;
    manifest["achieved_cover"] = cover;

    nlohmann::json files;
    save_series(s.observations, fs::path(dir) / "obs", files["obs"]);
    save_series(s.fine_deterministic, fs::path(dir) / "fine", files["fine"]);
    for (std::size_t m = 0; m < s.coarse_members.size(); ++m) {
        char sub[32];
        std::snprintf(sub, sizeof(sub), "member_%02zu", m);
        save_series(s.coarse_members[m], fs::path(dir) / sub, files[sub]);
    }
    manifest["files"] = files;

    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(1) << "\n";
    if (!out) throw std::runtime_error("cannot write manifest in " + dir);
}

Scenario load_scenario(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw std::runtime_error("no manifest.json in " + dir);
    nlohmann::json manifest;
    in >> manifest;

    Scenario s;
    s.config = config_from_json(manifest.at("config"));
    s.amplitude = manifest.at("amplitude").get<double>();
    for (auto& [k, v] : manifest.at("achieved_cover").items())
        s.achieved_cover[std::stod(k)] = v.get<double>();
    s.mask = read_mask((fs::path(dir) / "mask.grid").string());

    const auto& files = manifest.at("files");
    s.observations = load_series(fs::path(dir) / "obs", files.at("obs"), "obs");
    s.fine_deterministic = load_series(fs::path(dir) / "fine", files.at("fine"), "fine");
    for (int m = 0; m < s.config.n_members; ++m) {
        char sub[32];
        std::snprintf(sub, sizeof(sub), "member_%02d", m);
        s.coarse_members.push_back(load_series(fs::path(dir) / sub, files.at(sub),
                                               "member" + std::to_string(m)));
    }
    return s;
}

} // namespace stratus
