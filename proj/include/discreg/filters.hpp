#pragma once

#include "discreg/volume.hpp"

#include <span>
#include <vector>

namespace discreg {

/// Normalized Gaussian taps with radius ceil(3*sigma); sigma <= 0 yields {1}.
std::vector<double> gaussian_kernel(double sigma);

/// All-ones taps of width 2*radius+1 (unnormalized box sum).
std::vector<double> box_kernel(int radius);

/// Reusable buffers so per-label filtering does not allocate.
struct FilterScratch {
    std::vector<double> a;
    std::vector<double> b;
};

/// Applies the same odd-length 1-D kernel along x, then y, then z, with
/// edge-clamped sampling. Accumulation is in double; `in` and `out` may alias.
void separable_filter(std::span<const float> in, const Dims& dims, std::span<const double> kernel,
                      std::span<float> out, FilterScratch& scratch);

std::vector<float> gaussian_smooth(std::span<const float> in, const Dims& dims, double sigma);

} // namespace discreg
