#pragma once

#include "discreg/pipeline.hpp"

#include <json.hpp>

#include <filesystem>

namespace discreg {

// Registration config as JSON. Every key is optional; missing keys keep the
// defaults of RegistrationConfig.
//
// {
//   "feature": "intensity" | "edge" | "ssc" | "external",
//   "ssc": {"patch_radius": 1, "noise_floor": 1e-6},
//   "intensity_percentiles": [0, 100],
//   "external": {"fixed": "f_feat", "moving": "m_feat", "zscore": false},
//   "standardize": "none" | "pair" | "reference" | true | false,
//   "standardize_reference": "ref_volume",
//   "levels": [{"factor": 2, "q": 1, "l_max": 4, "patch_radius": 2, "alpha": 2}, ...],
//   "memory_budget_mb": 1024
// }
//
// Relative paths are resolved against `base_dir`.

RegistrationConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const RegistrationConfig& cfg);
RegistrationConfig load_config(const std::filesystem::path& path);

} // namespace discreg
