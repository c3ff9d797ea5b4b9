#pragma once

#include <map>
#include <string>

#include "stratus/ablation.hpp"
#include "stratus/scenario.hpp"

namespace stratus {

// A full run description: scenario generation plus one experiment.
struct RunConfigFile {
    ScenarioConfig scenario;
    ExperimentSpec experiment;
    std::string output_dir;
};

// INI-style file: top-level `output_dir`, sections [scenario], [experiment],
// [trainer], [linear], [forest]. Unknown sections or keys are errors.
// `overrides` maps "section.key" (or "output_dir") to replacement values and
// is applied after the file.
RunConfigFile parse_run_config(const std::string& path,
                               const std::map<std::string, std::string>& overrides = {});
RunConfigFile run_config_from_overrides(const std::map<std::string, std::string>& overrides);

// Echo of the fully resolved configuration, reparseable by parse_run_config.
void write_resolved_config(const std::string& path, const RunConfigFile& cfg);

} // namespace stratus
