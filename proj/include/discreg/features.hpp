#pragma once

#include "discreg/volume.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>

namespace discreg {

/// Percentile with linear interpolation between order statistics
/// (position p/100*(n-1) in the sorted sample).
double percentile(std::span<const float> values, double p);

/// Linear intensity window mapping `lo` to 0 and `hi` to 1.
struct IntensityWindow {
    double lo = 0.0;
    double hi = 1.0;
    bool degenerate = false;

    static IntensityWindow from_percentiles(const ScalarVolume& vol, double p_low, double p_high);

    /// Rescaled and clipped to [0,1]; a degenerate window maps everything to 0.5.
    float apply(float v) const;
};

struct NormalizedIntensity {
    FeatureVolume features;
    bool degenerate = false; ///< zero percentile spread, output is all 0.5
};

NormalizedIntensity normalize_intensity(const ScalarVolume& vol, double p_low, double p_high);
FeatureVolume normalize_intensity(const ScalarVolume& vol, const IntensityWindow& window);

// Intensity standardization: decile landmarks of the foreground (voxels
// strictly above the 5th percentile) are matched piecewise-linearly.

struct StandardizationMap {
    std::array<double, 11> source{};
    std::array<double, 11> target{};

    /// Piecewise-linear through the landmark pairs; values outside the
    /// source range follow the first/last non-flat segment.
    double apply(double v) const;
};

/// Foreground decile landmarks (0th..100th percentile in steps of 10).
std::array<double, 11> foreground_deciles(const ScalarVolume& vol);

StandardizationMap standardization_map(const ScalarVolume& vol, const ScalarVolume& reference);
ScalarVolume intensity_standardize(const ScalarVolume& vol, const ScalarVolume& reference);

/// Gradient magnitude of the min-max normalized volume; central differences
/// inside, one-sided at the borders. Requires at least 3 voxels per axis.
FeatureVolume edge_features(const ScalarVolume& vol);
FeatureVolume edge_features(const ScalarVolume& vol, const IntensityWindow& window);

struct SscParams {
    int patch_radius = 1;
    double noise_floor = 1e-6;

    static constexpr int channel_count = 12;

    void validate() const;
};

/// Offsets of the six face neighbours, indexed 0..5 as +x,-x,+y,-y,+z,-z.
inline constexpr std::array<std::array<int, 3>, 6> ssc_neighbours{{
    {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1},
}};

/// The 12 neighbour pairs at distance sqrt(2), in channel order.
std::array<std::array<int, 2>, 12> ssc_pairs();

/// Self-similarity context: for each of the 12 pairs, the patch SSD between
/// the two neighbour-centred patches, divided by the mean of the 12 distances
/// (floored at noise_floor) and mapped through exp(-d). Samples outside the
/// grid are edge-clamped.
FeatureVolume ssc_features(const ScalarVolume& vol, const SscParams& params = {});

/// Learned features produced elsewhere, in the raw+JSON layout.
FeatureVolume load_external_features(const std::filesystem::path& path, bool zscore = false);

/// Per-channel zero-mean unit-variance rescaling; constant channels become 0.
FeatureVolume zscore_channels(const FeatureVolume& f);

enum class FeatureKind { intensity, edge, ssc, external };

const char* to_string(FeatureKind k);
FeatureKind feature_kind_from_string(const std::string& s);

} // namespace discreg
