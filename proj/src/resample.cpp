#include "discreg/resample.hpp"

#include "discreg/filters.hpp"

#include <algorithm>
#include <cmath>

namespace discreg {

namespace {

struct Corner {
    int i0, i1;
    double f;
};

Corner locate(double p, int n)
{
    const double c = std::clamp(p, 0.0, static_cast<double>(n - 1));
    const int i0 = static_cast<int>(std::floor(c));
    const int i1 = std::min(i0 + 1, n - 1);
    return {i0, i1, c - i0};
}

int nearest(double p, int n)
{
    return std::clamp(static_cast<int>(std::floor(p + 0.5)), 0, n - 1);
}

template <typename Fetch>
double blend(const Corner& cx, const Corner& cy, const Corner& cz, Fetch&& at)
{
    const double c00 = at(cx.i0, cy.i0, cz.i0) * (1.0 - cx.f) + at(cx.i1, cy.i0, cz.i0) * cx.f;
    const double c10 = at(cx.i0, cy.i1, cz.i0) * (1.0 - cx.f) + at(cx.i1, cy.i1, cz.i0) * cx.f;
    const double c01 = at(cx.i0, cy.i0, cz.i1) * (1.0 - cx.f) + at(cx.i1, cy.i0, cz.i1) * cx.f;
    const double c11 = at(cx.i0, cy.i1, cz.i1) * (1.0 - cx.f) + at(cx.i1, cy.i1, cz.i1) * cx.f;
    const double c0 = c00 * (1.0 - cy.f) + c10 * cy.f;
    const double c1 = c01 * (1.0 - cy.f) + c11 * cy.f;
    return c0 * (1.0 - cz.f) + c1 * cz.f;
}

void require_same_dims(const Dims& a, const Dims& b, const char* what)
{
    if (!(a == b))
        throw Error(ErrorKind::dim_mismatch, std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
}

} // namespace

float sample_trilinear(const ScalarVolume& vol, const Point3& p)
{
    const Dims& d = vol.dims();
    const Corner cx = locate(p[0], d.x), cy = locate(p[1], d.y), cz = locate(p[2], d.z);
    return static_cast<float>(
        blend(cx, cy, cz, [&](int i, int j, int k) { return static_cast<double>(vol(i, j, k)); }));
}

void sample_trilinear(const FeatureVolume& vol, const Point3& p, std::span<float> out)
{
    const Dims& d = vol.dims();
    const Corner cx = locate(p[0], d.x), cy = locate(p[1], d.y), cz = locate(p[2], d.z);
    for (int c = 0; c < vol.channels(); ++c) {
        out[static_cast<std::size_t>(c)] = static_cast<float>(blend(
            cx, cy, cz, [&](int i, int j, int k) { return static_cast<double>(vol.at(i, j, k)[static_cast<std::size_t>(c)]); }));
    }
}

std::int32_t sample_nearest(const LabelVolume& labels, const Point3& p)
{
    const Dims& d = labels.dims();
    return labels(nearest(p[0], d.x), nearest(p[1], d.y), nearest(p[2], d.z));
}

ScalarVolume warp_scalar(const ScalarVolume& moving, const DisplacementField& field)
{
    require_same_dims(moving.dims(), field.dims(), "warp_scalar");
    const Dims& d = field.dims();
    std::vector<float> out(d.count());
#pragma omp parallel for schedule(static)
    for (int k = 0; k < d.z; ++k) {
        for (int j = 0; j < d.y; ++j) {
            for (int i = 0; i < d.x; ++i) {
                const std::size_t n = d.index(i, j, k);
                const Vec3& u = field[n];
                out[n] = sample_trilinear(moving, {i + static_cast<double>(u.x), j + static_cast<double>(u.y),
                                                   k + static_cast<double>(u.z)});
            }
        }
    }
    return ScalarVolume(d, moving.spacing(), std::move(out));
}

LabelVolume warp_labels(const LabelVolume& labels, const DisplacementField& field)
{
    require_same_dims(labels.dims(), field.dims(), "warp_labels");
    const Dims& d = field.dims();
    std::vector<std::int32_t> out(d.count());
#pragma omp parallel for schedule(static)
    for (int k = 0; k < d.z; ++k) {
        for (int j = 0; j < d.y; ++j) {
            for (int i = 0; i < d.x; ++i) {
                const std::size_t n = d.index(i, j, k);
                const Vec3& u = field[n];
                out[n] = sample_nearest(labels, {i + static_cast<double>(u.x), j + static_cast<double>(u.y),
                                                 k + static_cast<double>(u.z)});
            }
        }
    }
    return LabelVolume(d, labels.spacing(), std::move(out), labels.dtype());
}

ScalarVolume downsample(const ScalarVolume& vol, int factor)
{
    if (factor < 1)
        throw Error(ErrorKind::invalid_argument, "downsample factor must be >= 1");
    if (factor == 1)
        return vol;
    const Dims& d = vol.dims();
    const auto smooth = gaussian_smooth(vol.data(), d, 0.5 * factor);
    const Dims out_dims{(d.x + factor - 1) / factor, (d.y + factor - 1) / factor, (d.z + factor - 1) / factor};
    std::vector<float> out(out_dims.count());
    for (int k = 0; k < out_dims.z; ++k)
        for (int j = 0; j < out_dims.y; ++j)
            for (int i = 0; i < out_dims.x; ++i)
                out[out_dims.index(i, j, k)] = smooth[d.index(i * factor, j * factor, k * factor)];
    const Spacing& s = vol.spacing();
    return ScalarVolume(out_dims, {s[0] * factor, s[1] * factor, s[2] * factor}, std::move(out));
}

DisplacementField upsample_field(const DisplacementField& field, int factor, const Dims& target)
{
    if (factor < 1)
        throw Error(ErrorKind::invalid_argument, "upsample factor must be >= 1");
    const Dims& src = field.dims();
    std::vector<Vec3> out(target.count());
    const double inv = 1.0 / factor;
    for (int k = 0; k < target.z; ++k) {
        const Corner cz = locate(k * inv, src.z);
        for (int j = 0; j < target.y; ++j) {
            const Corner cy = locate(j * inv, src.y);
            for (int i = 0; i < target.x; ++i) {
                const Corner cx = locate(i * inv, src.x);
                Vec3& o = out[target.index(i, j, k)];
                o.x = static_cast<float>(factor * blend(cx, cy, cz, [&](int a, int b, int c) { return static_cast<double>(field(a, b, c).x); }));
                o.y = static_cast<float>(factor * blend(cx, cy, cz, [&](int a, int b, int c) { return static_cast<double>(field(a, b, c).y); }));
                o.z = static_cast<float>(factor * blend(cx, cy, cz, [&](int a, int b, int c) { return static_cast<double>(field(a, b, c).z); }));
            }
        }
    }
    const Spacing& s = field.spacing();
    return DisplacementField(target, {s[0] / factor, s[1] / factor, s[2] / factor}, std::move(out));
}

} // namespace discreg
