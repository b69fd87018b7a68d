#pragma once

#include "discreg/volume.hpp"

#include <filesystem>
#include <variant>

namespace discreg {

// On-disk format: `<name>.raw` holds the little-endian payload (x fastest,
// channels contiguous per voxel) and `<name>.json` the header:
//   {"dims":[x,y,z], "spacing":[sx,sy,sz], "channels":C, "dtype":"float32"}
// Any of `<name>`, `<name>.raw` or `<name>.json` may be passed as the path.

struct VolumePaths {
    std::filesystem::path header;
    std::filesystem::path payload;
};

VolumePaths volume_paths(const std::filesystem::path& path);

VolumeHeader read_header(const std::filesystem::path& path);

using AnyVolume = std::variant<ScalarVolume, FeatureVolume, LabelVolume>;

/// Multi-channel files load as FeatureVolume, single-channel integer files as
/// LabelVolume, single-channel float32 files as ScalarVolume.
AnyVolume load_volume(const std::filesystem::path& path);

/// Typed loaders convert where it makes sense: integer payloads load as
/// scalar images, single-channel files as 1-channel features.
ScalarVolume load_scalar(const std::filesystem::path& path);
FeatureVolume load_features(const std::filesystem::path& path);
LabelVolume load_labels(const std::filesystem::path& path);
DisplacementField load_field(const std::filesystem::path& path);

void save_volume(const ScalarVolume& vol, const std::filesystem::path& path);
void save_volume(const FeatureVolume& vol, const std::filesystem::path& path);
void save_volume(const LabelVolume& vol, const std::filesystem::path& path);
void save_volume(const DisplacementField& field, const std::filesystem::path& path);
void save_volume(const AnyVolume& vol, const std::filesystem::path& path);

} // namespace discreg
