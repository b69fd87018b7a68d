#pragma once

#include "discreg/filters.hpp"
#include "discreg/volume.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace discreg {

/// Quantized candidate displacements {0, ±q, ..., ±l_max}^3, ordered
/// lexicographically by (dz, dy, dx).
class DisplacementSet {
public:
    DisplacementSet(double q, double l_max);

    double q() const { return q_; }
    double l_max() const { return l_max_; }
    int steps() const { return steps_; } ///< k with l_max = k*q
    std::size_t size() const { return displacements_.size(); }
    const Vec3& operator[](std::size_t label) const { return displacements_[label]; }
    std::span<const Vec3> displacements() const { return displacements_; }

    /// Label of the zero displacement.
    std::size_t zero_label() const;

    /// Tie-break priority per label: lower wins. Ranks by L1 norm, then by
    /// label order.
    std::span<const std::uint32_t> priority() const { return priority_; }

    /// True when every displacement has integer components.
    bool integral() const { return integral_; }

private:
    double q_;
    double l_max_;
    int steps_;
    bool integral_;
    std::vector<Vec3> displacements_;
    std::vector<std::uint32_t> priority_;
};

DisplacementSet build_displacement_set(double q, double l_max);

/// Displacement-space volume: one contiguous cost map per label.
class CostVolume {
public:
    CostVolume(Dims dims, std::size_t label_count);
    CostVolume(Dims dims, std::size_t label_count, std::vector<float> costs);

    const Dims& dims() const { return dims_; }
    std::size_t label_count() const { return label_count_; }
    std::size_t voxel_count() const { return dims_.count(); }

    std::span<const float> map(std::size_t label) const;
    std::span<float> map(std::size_t label);
    std::span<const float> costs() const { return costs_; }

    float operator()(std::size_t voxel, std::size_t label) const { return costs_[label * voxel_count() + voxel]; }

private:
    Dims dims_;
    std::size_t label_count_;
    std::vector<float> costs_;
};

/// Sum of absolute differences, accumulated in channel order.
float sad(std::span<const float> a, std::span<const float> b);

/// Rejects mismatched inputs and volumes with fewer than 2*ceil(l_max)+1
/// voxels along any axis.
void check_registration_inputs(const FeatureVolume& fixed, const FeatureVolume& moving, const DisplacementSet& disp);

/// Fills `out` with sad(fixed(x), moving(x + d)) for one label. Integer
/// displacements use clamped lookups, fractional ones trilinear sampling.
void label_costs(const FeatureVolume& fixed, const FeatureVolume& moving, const Vec3& d, std::span<float> out);

CostVolume build_dsv(const FeatureVolume& fixed, const FeatureVolume& moving, const DisplacementSet& disp);

/// Box sum over the (2r+1)^3 window around every voxel, per label, with
/// edge-clamped sampling. Radius 0 is the identity.
CostVolume aggregate_costs(const CostVolume& dsv, int patch_radius);

/// Gaussian smoothing of every label's cost map. Sigma 0 is the identity.
CostVolume regularize_dsv(const CostVolume& dsv, double smooth_sigma);

/// Per voxel, the displacement of least cost; ties go to the smaller L1
/// norm, then to the earlier (dz,dy,dx) label.
DisplacementField winner_takes_all(const CostVolume& dsv, const DisplacementSet& disp);

/// sum_x sad(fixed(x), moving(x+u(x))) + alpha * sum_x |grad u(x)|^2, with
/// forward differences (zero past the last voxel).
double energy(const FeatureVolume& fixed, const FeatureVolume& moving, const DisplacementField& field, double alpha);

struct CostFilter {
    int patch_radius = 0;
    double smooth_sigma = 0.0;
};

/// Whole-volume path: build, aggregate, regularize, argmin.
DisplacementField solve_unchunked(const FeatureVolume& fixed, const FeatureVolume& moving, const DisplacementSet& disp,
                                  const CostFilter& filter);

/// Streams labels in batches that fit `budget_bytes`, keeping a running
/// (best cost, best label) per voxel. Bit-identical to solve_unchunked.
/// Throws Error(budget) when one label's cost map does not fit.
DisplacementField chunked_dsv_execution(const FeatureVolume& fixed, const FeatureVolume& moving,
                                        const DisplacementSet& disp, const CostFilter& filter,
                                        std::size_t budget_bytes);

/// Number of labels per batch under `budget_bytes`, or 0 if a single cost map
/// does not fit.
std::size_t labels_per_batch(const Dims& dims, std::size_t budget_bytes);

} // namespace discreg
