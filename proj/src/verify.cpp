#include "stratus/verify.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "stratus/raster_io.hpp"

namespace stratus {

double brier(const std::vector<double>& predictions, const LabelVector& labels) {
    if (predictions.size() != labels.size()) throw std::invalid_argument("brier: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("brier: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - double(labels[i]);
        s += d * d;
    }
    return s / double(predictions.size());
}

std::optional<double> bss(double model_brier, double baseline_brier) {
    if (!(baseline_brier > 0.0)) return std::nullopt;
    return 1.0 - model_brier / baseline_brier;
}

double Climatology::at(std::uint16_t px_row, std::uint16_t px_col) const {
    const std::uint32_t key = (std::uint32_t(px_row) << 16) | px_col;
    auto it = std::lower_bound(pixel_key.begin(), pixel_key.end(), key);
    if (it == pixel_key.end() || *it != key)
        throw std::runtime_error("climatology: pixel has no fitted probability");
    return probability[std::size_t(it - pixel_key.begin())];
}

std::vector<double> Climatology::predict(const std::vector<RowKey>& rows) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(at(r.px_row, r.px_col));
    return out;
}

Climatology climatology_baseline(const std::vector<RowKey>& rows, const LabelVector& labels) {
    if (rows.size() != labels.size() || rows.empty())
        throw std::invalid_argument("climatology: rows/labels mismatch or empty");
    std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> acc;  // key -> (positives, total)
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& a = acc[(std::uint32_t(rows[i].px_row) << 16) | rows[i].px_col];
        a.first += labels[i];
        a.second += 1;
    }
    Climatology c;
    for (const auto& [key, a] : acc) {
        c.pixel_key.push_back(key);
        c.probability.push_back(double(a.first) / double(a.second));
    }
    return c;
}

CalibrationMap pava_fit(const std::vector<double>& predictions, const LabelVector& labels) {
    std::vector<double> targets(labels.begin(), labels.end());
    return pava_fit_values(predictions, targets);
}

CalibrationMap pava_fit_values(const std::vector<double>& predictions,
                               const std::vector<double>& targets) {
    if (predictions.size() != targets.size()) throw std::invalid_argument("pava: length mismatch");
    if (predictions.size() < 2) throw std::invalid_argument("pava: need at least 2 samples");

    std::vector<std::size_t> order(predictions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return predictions[a] < predictions[b]; });

    // Pre-pool ties in the predictions (average their targets).
    struct Block {
        double x;
        double mean;
        double weight;
    };
    std::vector<Block> blocks;
    for (std::size_t k = 0; k < order.size();) {
        std::size_t j = k;
        double sum = 0.0;
        while (j < order.size() && predictions[order[j]] == predictions[order[k]]) {
            sum += targets[order[j]];
            ++j;
        }
        blocks.push_back({predictions[order[k]], sum / double(j - k), double(j - k)});
        k = j;
    }

    // Pool adjacent violators: merge while the fitted sequence decreases.
    std::vector<Block> stack;
    for (Block b : blocks) {
        stack.push_back(b);
        while (stack.size() > 1 && stack[stack.size() - 2].mean >= stack.back().mean) {
            Block top = stack.back();
            stack.pop_back();
            Block& prev = stack.back();
            // keep the leftmost x of the merged run; weighted mean value
            prev.mean = (prev.mean * prev.weight + top.mean * top.weight) / (prev.weight + top.weight);
            prev.weight += top.weight;
        }
    }

    CalibrationMap map;
    for (const Block& b : stack) {
        map.input.push_back(b.x);
        map.output.push_back(b.mean);
    }
    map.min_seen = blocks.front().x;
    map.max_seen = blocks.back().x;
    return map;
}

double calibrate_one(const CalibrationMap& map, double prediction) {
    if (map.input.empty()) throw std::invalid_argument("calibrate: unfitted map");
    if (prediction <= map.input.front()) return map.output.front();
    // greatest breakpoint <= prediction
    auto it = std::upper_bound(map.input.begin(), map.input.end(), prediction);
    return map.output[std::size_t(it - map.input.begin()) - 1];
}

std::vector<double> calibrate(const CalibrationMap& map, const std::vector<double>& predictions) {
    std::vector<double> out;
    out.reserve(predictions.size());
    for (double p : predictions) out.push_back(calibrate_one(map, p));
    return out;
}

std::vector<ReliabilityBin> reliability_curve(const std::vector<double>& predictions,
                                              const LabelVector& labels, int n_bins) {
    if (n_bins < 2) throw std::invalid_argument("reliability: n_bins must be >= 2");
    if (predictions.size() != labels.size()) throw std::invalid_argument("reliability: length mismatch");
    std::vector<ReliabilityBin> bins(std::size_t(n_bins));
    std::vector<double> psum(std::size_t(n_bins), 0.0), ysum(std::size_t(n_bins), 0.0);
    for (int b = 0; b < n_bins; ++b) {
        bins[std::size_t(b)].lo = double(b) / n_bins;
        bins[std::size_t(b)].hi = double(b + 1) / n_bins;
        bins[std::size_t(b)].count = 0;
    }
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        int b = int(predictions[i] * n_bins);
        b = std::clamp(b, 0, n_bins - 1);  // p == 1 lands in the last bin
        bins[std::size_t(b)].count += 1;
        psum[std::size_t(b)] += predictions[i];
        ysum[std::size_t(b)] += labels[i];
    }
    for (int b = 0; b < n_bins; ++b) {
        auto& bin = bins[std::size_t(b)];
        if (bin.count > 0) {
            bin.mean_prediction = psum[std::size_t(b)] / double(bin.count);
            bin.observed_frequency = ysum[std::size_t(b)] / double(bin.count);
        } else {
            bin.mean_prediction = 0.0;
            bin.observed_frequency = 0.0;
        }
    }
    return bins;
}

EvalReport breakdowns(const std::vector<double>& predictions, const LabelVector& labels,
                      const std::vector<RowKey>& rows, const Climatology& baseline,
                      const RasterGeometry& pixel_geometry, int n_reliability_bins,
                      double histogram_bin_width) {
    if (predictions.size() != labels.size() || predictions.size() != rows.size())
        throw std::invalid_argument("breakdowns: length mismatch");

    EvalReport rep;
    rep.n_samples = predictions.size();
    rep.brier = brier(predictions, labels);
    const std::vector<double> base_pred = baseline.predict(rows);
    rep.baseline_brier = brier(base_pred, labels);
    rep.bss = bss(rep.brier, rep.baseline_brier);
    rep.reliability = reliability_curve(predictions, labels, n_reliability_bins);

    // histogram
    rep.histogram_bin_width = histogram_bin_width;
    const int hb = int(std::ceil(1.0 / histogram_bin_width));
    rep.histogram.assign(std::size_t(hb), 0);
    for (double p : predictions) {
        int b = std::clamp(int(p / histogram_bin_width), 0, hb - 1);
        rep.histogram[std::size_t(b)] += 1;
    }

    // per-pixel BSS
    struct PxAcc {
        double model = 0.0, base = 0.0;
        std::size_t n = 0;
    };
    std::map<std::uint32_t, PxAcc> by_pixel;
    std::map<std::int64_t, std::pair<double, std::size_t>> by_day;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double dm = predictions[i] - double(labels[i]);
        const double db = base_pred[i] - double(labels[i]);
        auto& px = by_pixel[(std::uint32_t(rows[i].px_row) << 16) | rows[i].px_col];
        px.model += dm * dm;
        px.base += db * db;
        px.n += 1;
        auto& day = by_day[UtcTime(rows[i].time_sec).day_start().seconds()];
        day.first += dm * dm;
        day.second += 1;
    }
    rep.per_pixel_bss = Raster(pixel_geometry, std::nanf(""));
    for (const auto& [key, acc] : by_pixel) {
        const int r = int(key >> 16), c = int(key & 0xffff);
        const double base_px = acc.base / double(acc.n);
        if (base_px > 0.0)
            rep.per_pixel_bss.at(r, c) = float(1.0 - (acc.model / double(acc.n)) / base_px);
    }
    for (const auto& [day_sec, acc] : by_day)
        rep.daily.push_back(DailyBrier{UtcTime(day_sec), acc.first / double(acc.second), acc.second});
    return rep;
}

void write_report(const EvalReport& rep, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    nlohmann::json summary;
    summary["brier"] = rep.brier;
    summary["baseline_brier"] = rep.baseline_brier;
    if (rep.bss) summary["bss"] = *rep.bss;
    else summary["bss"] = nullptr;
    summary["n_samples"] = rep.n_samples;
    std::ofstream js(fs::path(dir) / "summary.json");
    js << summary.dump(1) << "\n";
    if (!js) throw std::runtime_error("cannot write summary.json in " + dir);

    char buf[64];
    std::ofstream rel(fs::path(dir) / "reliability.csv");
    rel << "bin_lo,bin_hi,count,mean_prediction,observed_frequency\n";
    for (const auto& b : rep.reliability) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%zu,%.17g,%.17g\n", b.lo, b.hi, b.count,
                      b.mean_prediction, b.observed_frequency);
        rel << buf;
    }

    std::ofstream daily(fs::path(dir) / "daily_brier.csv");
    daily << "day,brier,count\n";
    for (const auto& d : rep.daily) {
        std::snprintf(buf, sizeof(buf), ",%.17g,%zu\n", d.brier, d.count);
        daily << d.day.iso() << buf;
    }

    std::ofstream hist(fs::path(dir) / "histogram.csv");
    hist << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < rep.histogram.size(); ++b) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%zu\n", double(b) * rep.histogram_bin_width,
                      double(b + 1) * rep.histogram_bin_width, rep.histogram[b]);
        hist << buf;
    }

    if (rep.per_pixel_bss.geometry.width_px > 0)
        write_raster((fs::path(dir) / "per_pixel_bss.grid").string(), rep.per_pixel_bss, UtcTime(0));
}

} // namespace stratus
