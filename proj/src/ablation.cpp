#include "stratus/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "stratus/rng.hpp"
#include "stratus/segnet.hpp"

namespace stratus {

ModelFamily model_parse(const std::string& name) {
    if (name == "isotonic_input") return ModelFamily::isotonic_input;
    if (name == "linear") return ModelFamily::linear;
    if (name == "forest") return ModelFamily::forest;
    if (name == "network") return ModelFamily::network;
    throw std::invalid_argument("unknown model family: " + name);
}

const char* model_name(ModelFamily m) {
    switch (m) {
        case ModelFamily::isotonic_input: return "isotonic_input";
        case ModelFamily::linear: return "linear";
        case ModelFamily::forest: return "forest";
        case ModelFamily::network: return "network";
    }
    return "?";
}

namespace {

std::vector<std::uint32_t> subsample(const std::vector<std::uint32_t>& rows, std::size_t cap,
                                     std::uint64_t seed) {
    if (cap == 0 || rows.size() <= cap) return rows;
    std::vector<std::uint32_t> out = rows;
    Pcg32 rng(seed, 17);
    for (std::size_t i = 0; i < cap; ++i)
        std::swap(out[i], out[i + rng.next_below(std::uint32_t(out.size() - i))]);
    out.resize(cap);
    std::sort(out.begin(), out.end());
    return out;
}

LabelVector pick_labels(const LabelVector& labels, const std::vector<std::uint32_t>& rows) {
    LabelVector out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(labels[r]);
    return out;
}

std::vector<RowKey> pick_keys(const std::vector<RowKey>& keys,
                              const std::vector<std::uint32_t>& rows) {
    std::vector<RowKey> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(keys[r]);
    return out;
}

struct PreparedData {
    TabularData data;
    SplitPlan plan;
    std::vector<std::uint32_t> train_rows, val_rows, test_rows;
    StandardizationStats stats;      // over all columns, training rows only
    FeatureTable std_table;
    Climatology climatology;         // train + validation labels
};

PreparedData prepare(const Scenario& scenario, const ExperimentSpec& spec) {
    PreparedData p;
    p.data = build_tabular(scenario, spec.lead_hours, spec.threshold_mm);
    p.plan = make_splits(p.data.days, spec.fold_year, spec.season, {});
    p.plan.lead_hours = spec.lead_hours;
    p.plan.threshold_mm = spec.threshold_mm;
    p.train_rows = rows_for(p.data, p.plan, DayAssignment::train);
    p.val_rows = rows_for(p.data, p.plan, DayAssignment::validation);
    p.test_rows = rows_for(p.data, p.plan, DayAssignment::test);
    if (p.test_rows.empty()) throw std::runtime_error("run_config: empty test partition");
    p.stats = compute_standardization(p.data.table, p.train_rows);
    p.std_table = standardize(p.data.table, p.stats);

    std::vector<std::uint32_t> fit_rows = p.train_rows;
    fit_rows.insert(fit_rows.end(), p.val_rows.begin(), p.val_rows.end());
    p.climatology =
        climatology_baseline(pick_keys(p.data.table.row_index, fit_rows),
                             pick_labels(p.data.labels, fit_rows));
    return p;
}

// Uncalibrated predictions of the requested family on the validation and
// test rows.
struct RawPredictions {
    std::vector<double> val, test;
    std::optional<std::vector<double>> mdi;
    std::vector<std::string> mdi_features;
    std::vector<EpochStats> history;
};

RawPredictions fit_and_predict(const Scenario& scenario, const ExperimentSpec& spec,
                               const PreparedData& p) {
    const std::vector<std::string> feats = spec.effective_features();
    RawPredictions out;

    switch (spec.family) {
        case ModelFamily::isotonic_input: {
            if (feats.size() != 1)
                throw std::invalid_argument("isotonic_input: exactly one input feature expected");
            const auto& col = p.std_table.columns[std::size_t(p.std_table.col(feats[0]))];
            std::vector<double> x_train;
            for (auto r : p.train_rows) x_train.push_back(col[r]);
            const CalibrationMap map =
                pava_fit(x_train, pick_labels(p.data.labels, p.train_rows));
            for (auto r : p.val_rows) out.val.push_back(calibrate_one(map, col[r]));
            for (auto r : p.test_rows) out.test.push_back(calibrate_one(map, col[r]));
            break;
        }

        case ModelFamily::linear: {
            const FeatureTable sub = p.std_table.select_cols(feats);
            const FeatureTable train = sub.select_rows(p.train_rows);
            const LabelVector ytr = pick_labels(p.data.labels, p.train_rows);
            LinearFitConfig cfg = spec.linear;
            cfg.sgd.seed = spec.seed;
            if (spec.linear_balanced) cfg.class_weights = balanced_weights(ytr);
            LinearParams params;
            if (cfg.optimizer == LinearFitConfig::Optimizer::sgd_early_stop) {
                const FeatureTable val = sub.select_rows(p.val_rows);
                params = lr_fit_sgd_earlystop(train, ytr, val,
                                              pick_labels(p.data.labels, p.val_rows), cfg);
            } else {
                params = lr_fit_batch(train, ytr, cfg);
            }
            out.val = lr_predict(params, sub.select_rows(p.val_rows));
            out.test = lr_predict(params, sub.select_rows(p.test_rows));
            break;
        }

        case ModelFamily::forest: {
            const FeatureTable sub = p.std_table.select_cols(feats);
            const std::vector<std::uint32_t> fit_rows =
                subsample(p.train_rows, spec.forest_max_rows, spec.seed);
            ForestConfig cfg = spec.forest;
            cfg.seed = spec.seed;
            const Forest forest =
                forest_fit(sub.select_rows(fit_rows), pick_labels(p.data.labels, fit_rows), cfg);
            out.val = forest_predict_proba(forest, sub.select_rows(p.val_rows));
            out.test = forest_predict_proba(forest, sub.select_rows(p.test_rows));
            const MdiReport rep = mdi(forest);
            out.mdi = rep.importance;
            out.mdi_features = feats;
            break;
        }

        case ModelFamily::network: {
            FeatureBuilder builder(scenario, spec.lead_hours, spec.threshold_mm);
            SegnetParams sp;
            sp.input_side = scenario.config.window_side_px;
            sp.input_channels = int(network_main_channels().size());
            sp.late_channels = int(network_late_channels().size());
            sp.base_filters = spec.segnet_base_filters;
            const NetworkSpec net = build_segnet(sp);

            auto day_indices = [&](DayAssignment a) {
                std::vector<int> ids;
                for (std::size_t d = 0; d < p.data.days.size(); ++d)
                    for (const auto& pd : p.plan.days)
                        if (pd.date == p.data.days[d] && pd.assignment == a) ids.push_back(int(d));
                return ids;
            };
            const NetDataset train_set =
                build_net_dataset(builder, p.stats, day_indices(DayAssignment::train));
            const NetDataset val_set =
                build_net_dataset(builder, p.stats, day_indices(DayAssignment::validation));
            const NetDataset test_set =
                build_net_dataset(builder, p.stats, day_indices(DayAssignment::test));

            const std::vector<std::int32_t> gather = gather_offsets(builder.window_mask());
            TrainerConfig tc = spec.trainer;
            tc.seed = spec.seed;
            const Weights<float> init = init_weights<float>(net, spec.seed);
            TrainResult trained = train(net, init, train_set, val_set, gather, tc);
            if (trained.diverged) throw std::runtime_error("network training diverged");
            out.history = trained.history;
            out.val = predict(net, trained.weights, val_set, gather);
            out.test = predict(net, trained.weights, test_set, gather);
            break;
        }
    }
    return out;
}

} // namespace

EvalRecord run_config(const Scenario& scenario, const ExperimentSpec& spec) {
    const PreparedData p = prepare(scenario, spec);
    const RawPredictions raw = fit_and_predict(scenario, spec, p);

    EvalRecord rec;
    rec.spec = spec;
    rec.mdi = raw.mdi;
    rec.mdi_features = raw.mdi_features;
    rec.history = raw.history;

    const LabelVector yva = pick_labels(p.data.labels, p.val_rows);
    const LabelVector yte = pick_labels(p.data.labels, p.test_rows);
    const std::vector<RowKey> kva = pick_keys(p.data.table.row_index, p.val_rows);
    const std::vector<RowKey> kte = pick_keys(p.data.table.row_index, p.test_rows);

    rec.val_brier = brier(raw.val, yva);
    rec.val_baseline_brier = brier(p.climatology.predict(kva), yva);
    rec.val_bss = bss(rec.val_brier, rec.val_baseline_brier);

    const CalibrationMap map = pava_fit(raw.val, yva);
    const std::vector<double> test_cal = calibrate(map, raw.test);
    rec.test_report = breakdowns(test_cal, yte, kte, p.climatology, p.data.window.width_px > 0
                                                                        ? p.data.window
                                                                        : RasterGeometry{});
    rec.test_brier = rec.test_report.brier;
    rec.test_baseline_brier = rec.test_report.baseline_brier;
    rec.test_bss = rec.test_report.bss;
    return rec;
}

namespace {

std::string pairing_key(const ExperimentSpec& s) {
    return std::string(model_name(s.family)) + "|" + season_name(s.season) + "|" +
           std::to_string(s.lead_hours) + "|" + std::to_string(s.threshold_mm) + "|" +
           std::to_string(s.fold_year) + "|" + std::to_string(s.seed) + "|" + s.config_label;
}

bool same_feature_set(std::vector<std::string> a, std::vector<std::string> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

} // namespace

DeltaSummary delta_bss(const std::vector<EvalRecord>& records,
                       const std::vector<std::string>& base_set,
                       const std::string& candidate_feature, AblateDirection direction) {
    std::vector<std::string> modified = base_set;
    if (direction == AblateDirection::add) {
        modified.push_back(candidate_feature);
    } else {
        auto it = std::find(modified.begin(), modified.end(), candidate_feature);
        if (it == modified.end())
            throw std::invalid_argument("delta_bss: feature to remove is not in the base set");
        modified.erase(it);
    }

    DeltaSummary sum;
    for (const EvalRecord& base : records) {
        if (!same_feature_set(base.spec.effective_features(), base_set)) continue;
        for (const EvalRecord& mod : records) {
            if (!same_feature_set(mod.spec.effective_features(), modified)) continue;
            if (pairing_key(base.spec) != pairing_key(mod.spec)) continue;
            if (!base.test_bss || !mod.test_bss) continue;
            sum.deltas.push_back(*mod.test_bss - *base.test_bss);
        }
    }
    if (sum.deltas.empty()) throw std::runtime_error("delta_bss: no matched record pairs for " +
                                                     candidate_feature);
    std::vector<double> sorted = sum.deltas;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    sum.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    sum.min = sorted.front();
    sum.max = sorted.back();
    return sum;
}

MdiAggregate mdi_report(const std::vector<EvalRecord>& records) {
    MdiAggregate agg;
    std::vector<std::vector<double>> per_feature;
    for (const EvalRecord& r : records) {
        if (!r.mdi) continue;
        if (agg.features.empty()) {
            agg.features = r.mdi_features;
            per_feature.resize(agg.features.size());
        }
        if (r.mdi_features != agg.features)
            throw std::invalid_argument("mdi_report: records use different feature sets");
        for (std::size_t f = 0; f < agg.features.size(); ++f)
            per_feature[f].push_back((*r.mdi)[f]);
    }
    if (agg.features.empty()) throw std::invalid_argument("mdi_report: no forest records");
    for (auto& vals : per_feature) {
        std::sort(vals.begin(), vals.end());
        const std::size_t n = vals.size();
        agg.median.push_back(n % 2 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]));
        agg.lo.push_back(vals.front());
        agg.hi.push_back(vals.back());
    }
    return agg;
}

DuplicateDiagnostic duplicate_feature_diagnostic(const Scenario& scenario, std::uint64_t seed) {
    const int lead = scenario.config.leads.front();
    const double threshold = scenario.config.cover_targets.front().first;

    ExperimentSpec spec;
    spec.family = ModelFamily::forest;
    spec.lead_hours = lead;
    spec.threshold_mm = threshold;
    spec.fold_year = scenario.config.start_year + 1;
    spec.seed = seed;
    spec.forest.n_estimators = 50;   // the contrast is stable well below the full forest
    spec.forest_max_rows = 12000;
    spec.config_label = "dup_diagnostic";

    PreparedData p = prepare(scenario, spec);

    // Twin the informative fine forecast; add a pure-noise control column.
    FeatureTable& t = p.std_table;
    t.column_names.push_back("harmonie_twin");
    t.columns.push_back(t.columns[std::size_t(t.col("harmonie"))]);
    Pcg32 rng(seed, 23);
    std::vector<double> noise(t.n_rows());
    for (auto& v : noise) v = rng.next_gaussian();
    t.column_names.push_back("noise");
    t.columns.push_back(std::move(noise));

    const std::vector<std::string> companions = {"gefs_avg", "init_obs", "xdim", "ydim", "tdim"};
    auto with = [&](std::initializer_list<const char*> extra) {
        std::vector<std::string> f(companions);
        for (const char* e : extra) f.insert(f.begin(), e);
        return f;
    };

    const std::vector<std::uint32_t> fit_rows = subsample(p.train_rows, spec.forest_max_rows, seed);
    const LabelVector yfit = pick_labels(p.data.labels, fit_rows);
    const LabelVector yva = pick_labels(p.data.labels, p.val_rows);
    const LabelVector yte = pick_labels(p.data.labels, p.test_rows);

    auto run_forest = [&](const std::vector<std::string>& feats, std::vector<double>* mdi_out) {
        ForestConfig cfg = spec.forest;
        cfg.seed = seed;
        const FeatureTable sub = t.select_cols(feats);
        const Forest forest = forest_fit(sub.select_rows(fit_rows), yfit, cfg);
        if (mdi_out) *mdi_out = mdi(forest).importance;
        const std::vector<double> val = forest_predict_proba(forest, sub.select_rows(p.val_rows));
        const std::vector<double> test = forest_predict_proba(forest, sub.select_rows(p.test_rows));
        const CalibrationMap map = pava_fit(val, yva);
        const double test_brier = brier(calibrate(map, test), yte);
        const double base =
            brier(p.climatology.predict(pick_keys(p.data.table.row_index, p.test_rows)), yte);
        return *bss(test_brier, base);
    };

    DuplicateDiagnostic diag;
    std::vector<double> mdi_full;
    const auto feats_full = with({"harmonie_twin", "harmonie"});
    diag.full_test_bss = run_forest(feats_full, &mdi_full);
    const double mdi_a = mdi_full[0];  // "harmonie" (inserted first, ends up at index 0)
    const double mdi_b = mdi_full[1];  // "harmonie_twin"
    diag.mdi_share_first = mdi_a / (mdi_a + mdi_b);
    diag.mdi_share_second = mdi_b / (mdi_a + mdi_b);

    diag.delta_remove_one = run_forest(with({"harmonie"}), nullptr) - diag.full_test_bss;
    diag.delta_remove_both = run_forest(with({}), nullptr) - diag.full_test_bss;

    // Control: no duplication, the twin replaced by noise. Removing the
    // informative feature should now cost real skill.
    const double with_noise = run_forest(with({"noise", "harmonie"}), nullptr);
    const double without_informative = run_forest(with({"noise"}), nullptr);
    diag.delta_remove_informative_no_dup = without_informative - with_noise;
    return diag;
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "season,lead,threshold,config,valmedian,testmedian\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,", r.lead, r.threshold);
        out << r.season << "," << buf << r.config;
        std::snprintf(buf, sizeof(buf), ",%.4f,%.4f\n", r.valmedian, r.testmedian);
        out << buf;
    }
}

} // namespace stratus
