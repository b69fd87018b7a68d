#pragma once

#include "discreg/features.hpp"
#include "discreg/regcore.hpp"
#include "discreg/volume.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace discreg {

/// One resolution level. q, l_max and patch_radius are in voxels of that
/// level's grid; the cost maps are smoothed with sigma = sqrt(alpha).
struct LevelParams {
    int factor = 1;
    double q = 1.0;
    double l_max = 2.0;
    int patch_radius = 2;
    double alpha = 2.0;

    double smooth_sigma() const;
};

enum class StandardizeMode {
    none,
    pair,      ///< moving mapped onto fixed
    reference, ///< both mapped onto a shared reference volume
};

const char* to_string(StandardizeMode m);
StandardizeMode standardize_mode_from_string(const std::string& s);

struct RegistrationConfig {
    FeatureKind feature = FeatureKind::ssc;
    SscParams ssc;
    double intensity_p_low = 0.0;
    double intensity_p_high = 100.0;

    // Learned features computed elsewhere, on the same grids as the images.
    std::filesystem::path external_fixed;
    std::filesystem::path external_moving;
    bool external_zscore = false;

    StandardizeMode standardize = StandardizeMode::none;
    std::filesystem::path standardize_reference;

    /// Coarse to fine.
    std::vector<LevelParams> levels = default_levels();

    std::size_t memory_budget_bytes = default_memory_budget();

    /// Two levels: half resolution with q=1, l_max=4 (a +-8 voxel search in
    /// steps of 2 at full resolution), then full resolution with l_max=2.
    static std::vector<LevelParams> default_levels();

    /// REG_MEMORY_BUDGET_MB if set, otherwise 1024 MB.
    static std::size_t default_memory_budget();

    /// Throws Error(config) on an empty schedule, a non-integer factor
    /// ratio between levels, increasing factors, or a final factor other than 1.
    void validate() const;
};

/// Learned feature volumes for both images, on the images' grids.
struct ExternalFeatures {
    FeatureVolume fixed;
    FeatureVolume moving;
};

struct RegistrationResult {
    DisplacementField field;
    ScalarVolume warped;
};

/// u(x) = coarse_up(x) + increment(x).
DisplacementField compose_fields(const DisplacementField& coarse_up, const DisplacementField& increment);

/// Gaussian prefilter per channel and keep every factor-th voxel.
FeatureVolume downsample_features(const FeatureVolume& f, int factor);

/// Per-channel trilinear backward warp.
FeatureVolume warp_features(const FeatureVolume& f, const DisplacementField& field);

/// Multi-resolution driver. For external features `ext` is used when given,
/// otherwise the volumes are loaded from the config paths.
RegistrationResult register_pair(const ScalarVolume& fixed, const ScalarVolume& moving, const RegistrationConfig& cfg,
                                 const std::optional<ExternalFeatures>& ext = std::nullopt);

} // namespace discreg
