#include "stratus/runconfig.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stratus {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: expected a boolean, got '" + v + "'");
}

struct Applier {
    RunConfigFile* cfg;

    void apply(const std::string& section, const std::string& key, const std::string& value) {
        if (section.empty()) {
            if (key == "output_dir") { cfg->output_dir = value; return; }
            throw std::invalid_argument("config: unknown top-level key '" + key + "'");
        }
        if (section == "scenario") return scenario(key, value);
        if (section == "experiment") return experiment(key, value);
        if (section == "trainer") return trainer(key, value);
        if (section == "linear") return linear(key, value);
        if (section == "forest") return forest(key, value);
        throw std::invalid_argument("config: unknown section [" + section + "]");
    }

    void scenario(const std::string& key, const std::string& value) {
        ScenarioConfig& s = cfg->scenario;
        if (key == "seed") s.seed = std::stoull(value);
        else if (key == "n_days") s.n_days = std::stoi(value);
        else if (key == "start_date") {
            int y; unsigned m, d;
            if (std::sscanf(value.c_str(), "%d-%u-%u", &y, &m, &d) != 3)
                throw std::invalid_argument("config: start_date must be YYYY-MM-DD");
            s.start_year = y; s.start_month = m; s.start_day = d;
        }
        else if (key == "leads") {
            s.leads.clear();
            for (const auto& item : split_list(value)) s.leads.push_back(std::stoi(item));
        }
        else if (key == "cover_targets") {
            // "0.5:0.055,1:0.030"
            s.cover_targets.clear();
            for (const auto& item : split_list(value)) {
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw std::invalid_argument("config: cover_targets entries are thr:cover");
                s.cover_targets.emplace_back(std::stod(item.substr(0, colon)),
                                             std::stod(item.substr(colon + 1)));
            }
        }
        else if (key == "coarse_cell_km") s.coarse_cell_km = std::stod(value);
        else if (key == "fine_cell_km") s.fine_cell_km = std::stod(value);
        else if (key == "obs_cell_km") s.obs_cell_km = std::stod(value);
        else if (key == "n_members") s.n_members = std::stoi(value);
        else if (key == "coarse_advection_offset_px") s.coarse_bias.advection_offset_px = std::stod(value);
        else if (key == "coarse_timing_shift_hours") s.coarse_bias.timing_shift_hours = std::stod(value);
        else if (key == "coarse_amplitude_scale") s.coarse_bias.amplitude_scale = std::stod(value);
        else if (key == "coarse_noise_sd") s.coarse_bias.noise_sd = std::stod(value);
        else if (key == "fine_advection_offset_px") s.fine_bias.advection_offset_px = std::stod(value);
        else if (key == "fine_timing_shift_hours") s.fine_bias.timing_shift_hours = std::stod(value);
        else if (key == "fine_amplitude_scale") s.fine_bias.amplitude_scale = std::stod(value);
        else if (key == "fine_noise_sd") s.fine_bias.noise_sd = std::stod(value);
        else if (key == "mask_side_px") s.mask_side_px = std::stoi(value);
        else if (key == "mask_holes") s.mask_holes = std::stoi(value);
        else if (key == "mask_hole_radius_px") s.mask_hole_radius_px = std::stoi(value);
        else if (key == "window_side_px") s.window_side_px = std::stoi(value);
        else if (key == "window_margin_km") s.window_margin_km = std::stod(value);
        else if (key == "blobs_per_day") s.blobs_per_day = std::stoi(value);
        else if (key == "blob_sigma_min_km") s.blob_sigma_min_km = std::stod(value);
        else if (key == "blob_sigma_max_km") s.blob_sigma_max_km = std::stod(value);
        else if (key == "drift_min_km_h") s.drift_min_km_h = std::stod(value);
        else if (key == "drift_max_km_h") s.drift_max_km_h = std::stod(value);
        else throw std::invalid_argument("config: unknown key scenario." + key);
    }

    void experiment(const std::string& key, const std::string& value) {
        ExperimentSpec& e = cfg->experiment;
        if (key == "model") e.family = model_parse(value);
        else if (key == "features") e.features = split_list(value);
        else if (key == "season") e.season = season_parse(value);
        else if (key == "lead") e.lead_hours = std::stoi(value);
        else if (key == "threshold") e.threshold_mm = std::stod(value);
        else if (key == "fold") e.fold_year = std::stoi(value);
        else if (key == "seed") e.seed = std::stoull(value);
        else if (key == "label") e.config_label = value;
        else throw std::invalid_argument("config: unknown key experiment." + key);
    }

    void trainer(const std::string& key, const std::string& value) {
        TrainerConfig& t = cfg->experiment.trainer;
        if (key == "learning_rate") t.learning_rate = std::stod(value);
        else if (key == "momentum") t.momentum = std::stod(value);
        else if (key == "batch_size") t.batch_size = std::stoul(value);
        else if (key == "patience") t.patience = std::stoi(value);
        else if (key == "plateau_epochs") t.plateau_epochs = std::stoi(value);
        else if (key == "plateau_factor") t.plateau_factor = std::stod(value);
        else if (key == "max_epochs") t.max_epochs = std::stoi(value);
        else if (key == "prob_clamp") t.prob_clamp = std::stof(value);
        else if (key == "base_filters") cfg->experiment.segnet_base_filters = std::stoi(value);
        else throw std::invalid_argument("config: unknown key trainer." + key);
    }

    void linear(const std::string& key, const std::string& value) {
        LinearFitConfig& l = cfg->experiment.linear;
        if (key == "c") l.inverse_regularization = std::stod(value);
        else if (key == "max_iterations") l.max_iterations = std::stoi(value);
        else if (key == "tolerance") l.tolerance = std::stod(value);
        else if (key == "optimizer") {
            if (value == "batch") l.optimizer = LinearFitConfig::Optimizer::batch;
            else if (value == "sgd_early_stop") l.optimizer = LinearFitConfig::Optimizer::sgd_early_stop;
            else throw std::invalid_argument("config: linear.optimizer must be batch or sgd_early_stop");
        }
        else if (key == "balanced") cfg->experiment.linear_balanced = parse_bool(value);
        else if (key == "sgd_learning_rate") l.sgd.learning_rate = std::stod(value);
        else if (key == "sgd_momentum") l.sgd.momentum = std::stod(value);
        else if (key == "sgd_batch_size") l.sgd.batch_size = std::stoul(value);
        else if (key == "sgd_patience") l.sgd.patience = std::stoi(value);
        else if (key == "sgd_max_epochs") l.sgd.max_epochs = std::stoi(value);
        else throw std::invalid_argument("config: unknown key linear." + key);
    }

    void forest(const std::string& key, const std::string& value) {
        ForestConfig& f = cfg->experiment.forest;
        if (key == "n_estimators") f.n_estimators = std::stoi(value);
        else if (key == "criterion") {
            if (value == "gini") f.criterion = SplitCriterion::gini;
            else if (value == "entropy") f.criterion = SplitCriterion::entropy;
            else throw std::invalid_argument("config: forest.criterion must be gini or entropy");
        }
        else if (key == "max_features") {
            if (value == "sqrt") f.use_sqrt_features = true;
            else { f.use_sqrt_features = false; f.max_features = std::stod(value); }
        }
        else if (key == "min_samples_split") f.min_samples_split = std::stoi(value);
        else if (key == "min_samples_leaf") f.min_samples_leaf = std::stoi(value);
        else if (key == "bootstrap") f.bootstrap = parse_bool(value);
        else if (key == "max_rows") cfg->experiment.forest_max_rows = std::stoul(value);
        else throw std::invalid_argument("config: unknown key forest." + key);
    }
};

void apply_env_seed(RunConfigFile& cfg, bool seed_was_set) {
    if (seed_was_set) return;
    if (const char* env = std::getenv("STRATUS_SEED")) {
        cfg.scenario.seed = std::strtoull(env, nullptr, 10);
        cfg.experiment.seed = cfg.scenario.seed;
    }
}

} // namespace

RunConfigFile parse_run_config(const std::string& path,
                               const std::map<std::string, std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    RunConfigFile cfg;
    Applier app{&cfg};
    bool seed_set = false;

    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "seed") seed_set = true;
        app.apply(section, key, value);
    }

    for (const auto& [k, v] : overrides) {
        const auto dot = k.find('.');
        if (k == "seed") {
            app.apply("scenario", "seed", v);
            app.apply("experiment", "seed", v);
            seed_set = true;
        } else if (dot == std::string::npos) {
            app.apply("", k, v);
        } else {
            if (k.substr(dot + 1) == "seed") seed_set = true;
            app.apply(k.substr(0, dot), k.substr(dot + 1), v);
        }
    }
    apply_env_seed(cfg, seed_set);
    return cfg;
}

RunConfigFile run_config_from_overrides(const std::map<std::string, std::string>& overrides) {
    RunConfigFile cfg;
    Applier app{&cfg};
    bool seed_set = false;
    for (const auto& [k, v] : overrides) {
        const auto dot = k.find('.');
        if (k == "seed") {
            app.apply("scenario", "seed", v);
            app.apply("experiment", "seed", v);
            seed_set = true;
        } else if (dot == std::string::npos) {
            app.apply("", k, v);
        } else {
            if (k.substr(dot + 1) == "seed") seed_set = true;
            app.apply(k.substr(0, dot), k.substr(dot + 1), v);
        }
    }
    apply_env_seed(cfg, seed_set);
    return cfg;
}

void write_resolved_config(const std::string& path, const RunConfigFile& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << "output_dir = " << cfg.output_dir << "\n\n";

    const ScenarioConfig& s = cfg.scenario;
    out << "[scenario]\n";
    out << "seed = " << s.seed << "\n";
    out << "n_days = " << s.n_days << "\n";
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", s.start_year, s.start_month, s.start_day);
    out << "start_date = " << buf << "\n";
    out << "leads = ";
    for (std::size_t i = 0; i < s.leads.size(); ++i) out << (i ? "," : "") << s.leads[i];
    out << "\ncover_targets = ";
    for (std::size_t i = 0; i < s.cover_targets.size(); ++i)
        out << (i ? "," : "") << num(s.cover_targets[i].first) << ":" << num(s.cover_targets[i].second);
    out << "\n";
    out << "coarse_cell_km = " << num(s.coarse_cell_km) << "\n";
    out << "fine_cell_km = " << num(s.fine_cell_km) << "\n";
    out << "obs_cell_km = " << num(s.obs_cell_km) << "\n";
    out << "n_members = " << s.n_members << "\n";
    out << "coarse_advection_offset_px = " << num(s.coarse_bias.advection_offset_px) << "\n";
    out << "coarse_timing_shift_hours = " << num(s.coarse_bias.timing_shift_hours) << "\n";
    out << "coarse_amplitude_scale = " << num(s.coarse_bias.amplitude_scale) << "\n";
    out << "coarse_noise_sd = " << num(s.coarse_bias.noise_sd) << "\n";
    out << "fine_advection_offset_px = " << num(s.fine_bias.advection_offset_px) << "\n";
    out << "fine_timing_shift_hours = " << num(s.fine_bias.timing_shift_hours) << "\n";
    out << "fine_amplitude_scale = " << num(s.fine_bias.amplitude_scale) << "\n";
    out << "fine_noise_sd = " << num(s.fine_bias.noise_sd) << "\n";
    out << "mask_side_px = " << s.mask_side_px << "\n";
    out << "mask_holes = " << s.mask_holes << "\n";
    out << "mask_hole_radius_px = " << s.mask_hole_radius_px << "\n";
    out << "window_side_px = " << s.window_side_px << "\n";
    out << "window_margin_km = " << num(s.window_margin_km) << "\n";
    out << "blobs_per_day = " << s.blobs_per_day << "\n";
    out << "blob_sigma_min_km = " << num(s.blob_sigma_min_km) << "\n";
    out << "blob_sigma_max_km = " << num(s.blob_sigma_max_km) << "\n";
    out << "drift_min_km_h = " << num(s.drift_min_km_h) << "\n";
    out << "drift_max_km_h = " << num(s.drift_max_km_h) << "\n";

    const ExperimentSpec& e = cfg.experiment;
    out << "\n[experiment]\n";
    out << "model = " << model_name(e.family) << "\n";
    out << "features = ";
    for (std::size_t i = 0; i < e.features.size(); ++i) out << (i ? "," : "") << e.features[i];
    out << "\n";
    out << "season = " << season_name(e.season) << "\n";
    out << "lead = " << e.lead_hours << "\n";
    out << "threshold = " << num(e.threshold_mm) << "\n";
    out << "fold = " << e.fold_year << "\n";
    out << "seed = " << e.seed << "\n";
    out << "label = " << e.config_label << "\n";

    const TrainerConfig& t = e.trainer;
    out << "\n[trainer]\n";
    out << "learning_rate = " << num(t.learning_rate) << "\n";
    out << "momentum = " << num(t.momentum) << "\n";
    out << "batch_size = " << t.batch_size << "\n";
    out << "patience = " << t.patience << "\n";
    out << "plateau_epochs = " << t.plateau_epochs << "\n";
    out << "plateau_factor = " << num(t.plateau_factor) << "\n";
    out << "max_epochs = " << t.max_epochs << "\n";
    out << "prob_clamp = " << num(double(t.prob_clamp)) << "\n";
    out << "base_filters = " << e.segnet_base_filters << "\n";

    const LinearFitConfig& l = e.linear;
    out << "\n[linear]\n";
    out << "c = " << num(l.inverse_regularization) << "\n";
    out << "max_iterations = " << l.max_iterations << "\n";
    out << "tolerance = " << num(l.tolerance) << "\n";
    out << "optimizer = "
        << (l.optimizer == LinearFitConfig::Optimizer::batch ? "batch" : "sgd_early_stop") << "\n";
    out << "balanced = " << (e.linear_balanced ? "true" : "false") << "\n";
    out << "sgd_learning_rate = " << num(l.sgd.learning_rate) << "\n";
    out << "sgd_momentum = " << num(l.sgd.momentum) << "\n";
    out << "sgd_batch_size = " << l.sgd.batch_size << "\n";
    out << "sgd_patience = " << l.sgd.patience << "\n";
    out << "sgd_max_epochs = " << l.sgd.max_epochs << "\n";

    const ForestConfig& f = e.forest;
    out << "\n[forest]\n";
    out << "n_estimators = " << f.n_estimators << "\n";
    out << "criterion = " << (f.criterion == SplitCriterion::gini ? "gini" : "entropy") << "\n";
    out << "max_features = ";
    if (f.use_sqrt_features) out << "sqrt\n";
    else out << num(f.max_features) << "\n";
    out << "min_samples_split = " << f.min_samples_split << "\n";
    out << "min_samples_leaf = " << f.min_samples_leaf << "\n";
    out << "bootstrap = " << (f.bootstrap ? "true" : "false") << "\n";
    out << "max_rows = " << e.forest_max_rows << "\n";
}

} // namespace stratus
