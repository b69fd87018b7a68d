#include "discreg/filters.hpp"

#include <algorithm>
#include <cmath>

namespace discreg {

std::vector<double> gaussian_kernel(double sigma)
{
    if (!(sigma > 0.0))
        return {1.0};
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        const double w = std::exp(-0.5 * (t * t) / (sigma * sigma));
        k[static_cast<std::size_t>(t + radius)] = w;
        sum += w;
    }
    for (double& w : k)
        w /= sum;
    return k;
}

std::vector<double> box_kernel(int radius)
{
    return std::vector<double>(static_cast<std::size_t>(2 * std::max(radius, 0) + 1), 1.0);
}

namespace {

// Filters along x. Source and destination are distinct buffers.
template <typename Src>
void pass_x(const Src* src, double* dst, const Dims& d, std::span<const double> k)
{
    const int r = static_cast<int>(k.size() / 2);
    const int nx = d.x;
    for (int row = 0; row < d.y * d.z; ++row) {
        const Src* s = src + static_cast<std::size_t>(row) * nx;
        double* o = dst + static_cast<std::size_t>(row) * nx;
        for (int i = 0; i < nx; ++i) {
            double acc = 0.0;
            if (i - r >= 0 && i + r < nx) {
                for (int t = -r; t <= r; ++t)
                    acc += k[t + r] * static_cast<double>(s[i + t]);
            } else {
                for (int t = -r; t <= r; ++t)
                    acc += k[t + r] * static_cast<double>(s[std::clamp(i + t, 0, nx - 1)]);
            }
            o[i] = acc;
        }
    }
}

// Filters along an outer axis whose consecutive lines are `stride` apart,
// vectorized over the contiguous inner run of length `run`.
void pass_outer(const double* src, double* dst, int n, std::size_t stride, std::size_t run, int blocks,
                std::size_t block_stride, std::span<const double> k)
{
    const int r = static_cast<int>(k.size() / 2);
    for (int b = 0; b < blocks; ++b) {
        const double* sb = src + static_cast<std::size_t>(b) * block_stride;
        double* ob = dst + static_cast<std::size_t>(b) * block_stride;
        for (int j = 0; j < n; ++j) {
            double* o = ob + static_cast<std::size_t>(j) * stride;
            std::fill(o, o + run, 0.0);
            for (int t = -r; t <= r; ++t) {
                const double w = k[t + r];
                const double* s = sb + static_cast<std::size_t>(std::clamp(j + t, 0, n - 1)) * stride;
                for (std::size_t i = 0; i < run; ++i)
                    o[i] += w * s[i];
            }
        }
    }
}

} // namespace

void separable_filter(std::span<const float> in, const Dims& d, std::span<const double> kernel,
                      std::span<float> out, FilterScratch& scratch)
{
    const std::size_t n = d.count();
    if (kernel.size() == 1) {
        const double w = kernel[0];
        for (std::size_t i = 0; i < n; ++i)
            out[i] = static_cast<float>(w * w * w * static_cast<double>(in[i]));
        return;
    }
    scratch.a.resize(n);
    scratch.b.resize(n);
    pass_x(in.data(), scratch.a.data(), d, kernel);
    const std::size_t nx = static_cast<std::size_t>(d.x);
    const std::size_t plane = nx * static_cast<std::size_t>(d.y);
    pass_outer(scratch.a.data(), scratch.b.data(), d.y, nx, nx, d.z, plane, kernel);
    pass_outer(scratch.b.data(), scratch.a.data(), d.z, plane, plane, 1, 0, kernel);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<float>(scratch.a[i]);
}

std::vector<float> gaussian_smooth(std::span<const float> in, const Dims& dims, double sigma)
{
    std::vector<float> out(in.begin(), in.end());
    if (!(sigma > 0.0))
        return out;
    FilterScratch scratch;
    const auto k = gaussian_kernel(sigma);
    separable_filter(in, dims, k, out, scratch);
    return out;
}

} // namespace discreg
