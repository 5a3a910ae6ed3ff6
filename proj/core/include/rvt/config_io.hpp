#pragma once

#include <string>

#include "rvt/trainer.hpp"

namespace rvt {

// JSON (de)serialization for the run configuration. Field names mirror the
// struct fields exactly; unknown keys are configuration errors so that
// typos fail instead of silently falling back to defaults.

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json_text(const std::string& text);

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace rvt
