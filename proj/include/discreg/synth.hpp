#pragma once

#include "discreg/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace discreg {

// Seeded synthetic registration cases. Same parameters and seed give
// bit-identical volumes.

enum class SynthKind {
    translation, ///< moving is fixed shifted by a constant integer vector
    sinusoid,    ///< moving is fixed under a band-limited sinusoidal warp
    blobs,       ///< image built from the blob labels, then sinusoidally warped
};

const char* to_string(SynthKind k);
SynthKind synth_kind_from_string(const std::string& s);

struct SynthParams {
    SynthKind kind = SynthKind::sinusoid;
    Dims dims{64, 64, 64};
    std::uint64_t seed = 1;
    Vec3 shift{2.0f, 0.0f, 0.0f};
    double amplitude = 3.0;
    double period = 32.0;
    int blob_count = 12;
    double noise_sigma = 2.0; ///< smoothing applied to the white noise
};

struct SynthCase {
    ScalarVolume fixed;
    ScalarVolume moving;
    LabelVolume fixed_labels;
    LabelVolume moving_labels;
    /// Generating warp: moving = warp_scalar(fixed, forward).
    DisplacementField forward;
    /// What registration should recover: warp_scalar(moving, truth) ≈ fixed.
    DisplacementField truth;
};

/// Gaussian-smoothed white noise rescaled to [0, 1000].
ScalarVolume smooth_random_volume(const Dims& dims, std::uint64_t seed, double sigma = 2.0);

/// Up to `count` spherical blobs with random centres and radii in
/// [min_radius, max_radius]; overlapping blobs split by relative distance.
LabelVolume blob_labels(const Dims& dims, int count, std::uint64_t seed, double min_radius, double max_radius);

/// Each component is amplitude * sin(2*pi*<w,x>/period + phase) with its own
/// random unit direction w and phase.
DisplacementField sinusoid_field(const Dims& dims, double amplitude, double period, std::uint64_t seed);

/// Fixed-point inverse v(x) = -u(x + v(x)); converges when |grad u| < 1.
DisplacementField invert_field(const DisplacementField& u, int iterations = 40);

SynthCase make_synth_case(const SynthParams& p);

/// Writes <prefix>_fixed, _moving, _fixed_labels, _moving_labels,
/// _forward_field, _truth_field and <prefix>_synth.json (parameters and seed).
void write_synth_case(const SynthCase& c, const SynthParams& p, const std::filesystem::path& prefix);

} // namespace discreg
