#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stratus/forest.hpp"
#include "stratus/linear.hpp"
#include "stratus/pipeline.hpp"
#include "stratus/scenario.hpp"
#include "stratus/splits.hpp"
#include "stratus/trainer.hpp"
#include "stratus/verify.hpp"

namespace stratus {

enum class ModelFamily { isotonic_input, linear, forest, network };

ModelFamily model_parse(const std::string& name);
const char* model_name(ModelFamily m);

struct ExperimentSpec {
    ModelFamily family = ModelFamily::linear;
    std::vector<std::string> features;  // empty means all 19
    Season season = Season::all;
    int lead_hours = 12;
    double threshold_mm = 0.5;
    int fold_year = 2016;
    std::uint64_t seed = 1;

    LinearFitConfig linear;
    bool linear_balanced = false;  // resolve King-Zeng weights from the training labels
    ForestConfig forest;
    std::size_t forest_max_rows = 20000;  // 0 = no cap; trees on every row are slow
    TrainerConfig trainer;
    int segnet_base_filters = 8;

    std::string config_label;  // hyperparameter identity used for pairing/reporting

    std::vector<std::string> effective_features() const {
        return features.empty() ? feature_names() : features;
    }
};

struct EvalRecord {
    ExperimentSpec spec;
    // validation scores are for the uncalibrated model; test scores for the
    // calibrated one
    double val_brier = 0.0, val_baseline_brier = 0.0;
    std::optional<double> val_bss;
    double test_brier = 0.0, test_baseline_brier = 0.0;
    std::optional<double> test_bss;
    EvalReport test_report;
    std::optional<std::vector<double>> mdi;      // forest records
    std::vector<std::string> mdi_features;
    std::vector<EpochStats> history;             // network records
};

EvalRecord run_config(const Scenario& scenario, const ExperimentSpec& spec);

enum class AblateDirection { add, remove };

struct DeltaSummary {
    std::vector<double> deltas;  // one per matched record pair
    double median = 0.0, min = 0.0, max = 0.0;
};

// Pairwise test-BSS differences between records whose feature set is
// base_set and records where candidate_feature was added/removed; all other
// spec fields must match.
DeltaSummary delta_bss(const std::vector<EvalRecord>& records,
                       const std::vector<std::string>& base_set,
                       const std::string& candidate_feature, AblateDirection direction);

struct MdiAggregate {
    std::vector<std::string> features;
    std::vector<double> median, lo, hi;
};
MdiAggregate mdi_report(const std::vector<EvalRecord>& records);

struct DuplicateDiagnostic {
    double mdi_share_first = 0.0;   // fraction of the twins' combined MDI
    double mdi_share_second = 0.0;
    double delta_remove_one = 0.0;   // test-BSS change from dropping one twin
    double delta_remove_both = 0.0;  // ... from dropping both
    double delta_remove_informative_no_dup = 0.0;  // twin replaced by noise
    double full_test_bss = 0.0;
};

// The duplicated-feature contrast: MDI splits importance across identical
// twins while removing one of them barely moves the test BSS.
DuplicateDiagnostic duplicate_feature_diagnostic(const Scenario& scenario, std::uint64_t seed);

// Appendix-style results table row.
struct ResultRow {
    std::string season;
    int lead;
    double threshold;
    std::string config;
    double valmedian;
    double testmedian;
};
void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);

} // namespace stratus
