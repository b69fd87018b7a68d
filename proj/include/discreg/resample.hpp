#pragma once

#include "discreg/volume.hpp"

#include <array>
#include <span>

namespace discreg {

using Point3 = std::array<double, 3>;

/// Trilinear sample at a continuous voxel coordinate. Coordinates outside the
/// grid are clamped to the nearest edge voxel, so the function is total.
float sample_trilinear(const ScalarVolume& vol, const Point3& p);

/// Per-channel trilinear sample of a feature volume into `out` (size = channels).
void sample_trilinear(const FeatureVolume& vol, const Point3& p, std::span<float> out);

/// Nearest-neighbour sample (round half up), edge-clamped.
std::int32_t sample_nearest(const LabelVolume& labels, const Point3& p);

/// Backward warp: out(x) = moving(x + u(x)). The output grid is the field's.
ScalarVolume warp_scalar(const ScalarVolume& moving, const DisplacementField& field);

/// Backward warp with nearest-neighbour sampling; never invents labels.
LabelVolume warp_labels(const LabelVolume& labels, const DisplacementField& field);

/// Gaussian prefilter (sigma = 0.5*factor) and keep every factor-th voxel.
ScalarVolume downsample(const ScalarVolume& vol, int factor);

/// Trilinear interpolation of a coarse field onto `target` dims with the
/// components rescaled by `factor`. Target voxel x maps to coarse x/factor.
DisplacementField upsample_field(const DisplacementField& field, int factor, const Dims& target);

} // namespace discreg
