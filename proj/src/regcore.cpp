#include "discreg/regcore.hpp"

#include "discreg/resample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace discreg {

DisplacementSet::DisplacementSet(double q, double l_max)
    : q_(q), l_max_(l_max)
{
    if (!(q > 0.0) || !std::isfinite(q))
        throw Error(ErrorKind::invalid_argument, "quantization step q must be > 0");
    if (!(l_max >= 0.0) || !std::isfinite(l_max))
        throw Error(ErrorKind::invalid_argument, "l_max must be >= 0");
    const double k = l_max / q;
    const double kr = std::round(k);
    if (std::abs(k - kr) > 1e-9 * std::max(1.0, k))
        throw Error(ErrorKind::invalid_argument, "l_max must be an integer multiple of q");
    steps_ = static_cast<int>(kr);

    integral_ = true;
    for (int a = -steps_; a <= steps_; ++a) {
        const double v = a * q_;
        if (v != std::round(v))
            integral_ = false;
    }
    displacements_.reserve(static_cast<std::size_t>((2 * steps_ + 1) * (2 * steps_ + 1) * (2 * steps_ + 1)));
    for (int dz = -steps_; dz <= steps_; ++dz)
        for (int dy = -steps_; dy <= steps_; ++dy)
            for (int dx = -steps_; dx <= steps_; ++dx)
                displacements_.push_back({static_cast<float>(dx * q_), static_cast<float>(dy * q_), static_cast<float>(dz * q_)});

    std::vector<std::uint32_t> order(displacements_.size());
    std::iota(order.begin(), order.end(), 0u);
    auto l1 = [&](std::uint32_t l) {
        const Vec3& d = displacements_[l];
        return std::abs(d.x) + std::abs(d.y) + std::abs(d.z);
    };
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return l1(a) < l1(b); });
    priority_.resize(order.size());
    for (std::uint32_t rank = 0; rank < order.size(); ++rank)
        priority_[order[rank]] = rank;
}

std::size_t DisplacementSet::zero_label() const
{
    const std::size_t side = static_cast<std::size_t>(2 * steps_ + 1);
    const std::size_t mid = static_cast<std::size_t>(steps_);
    return (mid * side + mid) * side + mid;
}

DisplacementSet build_displacement_set(double q, double l_max)
{
    return DisplacementSet(q, l_max);
}

CostVolume::CostVolume(Dims dims, std::size_t label_count)
    : dims_(dims), label_count_(label_count), costs_(dims.count() * label_count, 0.0f)
{
}

CostVolume::CostVolume(Dims dims, std::size_t label_count, std::vector<float> costs)
    : dims_(dims), label_count_(label_count), costs_(std::move(costs))
{
    if (costs_.size() != dims_.count() * label_count_)
        throw Error(ErrorKind::length_mismatch, "cost volume length mismatch");
}

std::span<const float> CostVolume::map(std::size_t label) const
{
    return std::span<const float>(costs_).subspan(label * voxel_count(), voxel_count());
}

std::span<float> CostVolume::map(std::size_t label)
{
    return std::span<float>(costs_).subspan(label * voxel_count(), voxel_count());
}

float sad(std::span<const float> a, std::span<const float> b)
{
    if (a.size() != b.size())
        throw Error(ErrorKind::channel_mismatch, "sad: channel counts differ");
    float acc = 0.0f;
    for (std::size_t c = 0; c < a.size(); ++c)
        acc += std::abs(a[c] - b[c]);
    return acc;
}

void check_registration_inputs(const FeatureVolume& fixed, const FeatureVolume& moving, const DisplacementSet& disp)
{
    if (!(fixed.dims() == moving.dims()))
        throw Error(ErrorKind::dim_mismatch, "fixed " + to_string(fixed.dims()) + " vs moving " + to_string(moving.dims()));
    if (fixed.channels() != moving.channels())
        throw Error(ErrorKind::channel_mismatch, "fixed has " + std::to_string(fixed.channels()) + " channels, moving "
                                                     + std::to_string(moving.channels()));
    const int need = 2 * static_cast<int>(std::ceil(disp.l_max())) + 1;
    const Dims& d = fixed.dims();
    if (d.x < need || d.y < need || d.z < need)
        throw Error(ErrorKind::too_small, "volume " + to_string(d) + " smaller than 2*l_max+1 = " + std::to_string(need));
}

void label_costs(const FeatureVolume& fixed, const FeatureVolume& moving, const Vec3& d, std::span<float> out)
{
    const Dims& dims = fixed.dims();
    const std::size_t nc = static_cast<std::size_t>(fixed.channels());
    const bool integral = d.x == std::round(d.x) && d.y == std::round(d.y) && d.z == std::round(d.z);

    if (integral) {
        auto shifted = [](int n, int shift) {
            std::vector<int> idx(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i)
                idx[static_cast<std::size_t>(i)] = std::clamp(i + shift, 0, n - 1);
            return idx;
        };
        const auto ix = shifted(dims.x, static_cast<int>(d.x));
        const auto iy = shifted(dims.y, static_cast<int>(d.y));
        const auto iz = shifted(dims.z, static_cast<int>(d.z));
        const float* fdata = fixed.data().data();
        const float* mdata = moving.data().data();
        for (int k = 0; k < dims.z; ++k) {
            for (int j = 0; j < dims.y; ++j) {
                const std::size_t row = dims.index(0, j, k);
                const std::size_t mrow = dims.index(0, iy[static_cast<std::size_t>(j)], iz[static_cast<std::size_t>(k)]);
                for (int i = 0; i < dims.x; ++i) {
                    const float* a = fdata + (row + static_cast<std::size_t>(i)) * nc;
                    const float* b = mdata + (mrow + static_cast<std::size_t>(ix[static_cast<std::size_t>(i)])) * nc;
                    float acc = 0.0f;
                    for (std::size_t c = 0; c < nc; ++c)
                        acc += std::abs(a[c] - b[c]);
                    out[row + static_cast<std::size_t>(i)] = acc;
                }
            }
        }
        return;
    }

    std::vector<float> sample(nc);
    for (int k = 0; k < dims.z; ++k)
        for (int j = 0; j < dims.y; ++j)
            for (int i = 0; i < dims.x; ++i) {
                const std::size_t n = dims.index(i, j, k);
                sample_trilinear(moving, {i + static_cast<double>(d.x), j + static_cast<double>(d.y), k + static_cast<double>(d.z)},
                                 sample);
                out[n] = sad(fixed.at(n), sample);
            }
}

CostVolume build_dsv(const FeatureVolume& fixed, const FeatureVolume& moving, const DisplacementSet& disp)
{
    check_registration_inputs(fixed, moving, disp);
    CostVolume dsv(fixed.dims(), disp.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t l = 0; l < static_cast<std::ptrdiff_t>(disp.size()); ++l)
        label_costs(fixed, moving, disp[static_cast<std::size_t>(l)], dsv.map(static_cast<std::size_t>(l)));
    return dsv;
}

namespace {

CostVolume filter_labels(const CostVolume& dsv, const std::vector<double>& kernel)
{
    CostVolume out(dsv.dims(), dsv.label_count());
#pragma omp parallel
    {
        FilterScratch scratch;
#pragma omp for schedule(dynamic)
        for (std::ptrdiff_t l = 0; l < static_cast<std::ptrdiff_t>(dsv.label_count()); ++l)
            separable_filter(dsv.map(static_cast<std::size_t>(l)), dsv.dims(), kernel, out.map(static_cast<std::size_t>(l)),
                             scratch);
    }
    return out;
}

// One voxel's running minimum under the (cost, priority) order.
struct Best {
    std::vector<float> cost;
    std::vector<std::uint32_t> label;

    explicit Best(std::size_t n)
        : cost(n, std::numeric_limits<float>::infinity()), label(n, std::numeric_limits<std::uint32_t>::max())
    {
    }
};

inline bool better(float c, std::uint32_t prio, float best_c, std::uint32_t best_prio)
{
    return c < best_c || (c == best_c && prio < best_prio);
}

// Folds labels [first, first + count) of `maps` (label-major, `first` is the
// global label of maps[0]) into `best`.
void fold(std::span<const float> maps, std::size_t first, std::size_t count, const DisplacementSet& disp, Best& best)
{
    const std::size_t n = best.cost.size();
    const auto prio = disp.priority();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t v = 0; v < static_cast<std::ptrdiff_t>(n); ++v) {
        const std::size_t x = static_cast<std::size_t>(v);
        float bc = best.cost[x];
        std::uint32_t bl = best.label[x];
        std::uint32_t bp = bl == std::numeric_limits<std::uint32_t>::max() ? std::numeric_limits<std::uint32_t>::max() : prio[bl];
        for (std::size_t l = 0; l < count; ++l) {
            const float c = maps[l * n + x];
            const std::uint32_t label = static_cast<std::uint32_t>(first + l);
            if (better(c, prio[label], bc, bp)) {
                bc = c;
                bl = label;
                bp = prio[label];
            }
        }
        best.cost[x] = bc;
        best.label[x] = bl;
    }
}

DisplacementField field_from_labels(const Dims& dims, const Spacing& spacing, const Best& best, const DisplacementSet& disp)
{
    std::vector<Vec3> u(dims.count());
    for (std::size_t n = 0; n < u.size(); ++n)
        u[n] = disp[best.label[n]];
    return DisplacementField(dims, spacing, std::move(u));
}

} // namespace

CostVolume aggregate_costs(const CostVolume& dsv, int patch_radius)
{
    if (patch_radius < 0)
        throw Error(ErrorKind::invalid_argument, "patch_radius must be >= 0");
    if (patch_radius == 0)
        return dsv;
    return filter_labels(dsv, box_kernel(patch_radius));
}

CostVolume regularize_dsv(const CostVolume& dsv, double smooth_sigma)
{
    if (!(smooth_sigma >= 0.0))
        throw Error(ErrorKind::invalid_argument, "smooth_sigma must be >= 0");
    if (smooth_sigma == 0.0)
        return dsv;
    return filter_labels(dsv, gaussian_kernel(smooth_sigma));
}

DisplacementField winner_takes_all(const CostVolume& dsv, const DisplacementSet& disp)
{
    if (dsv.label_count() != disp.size())
        throw Error(ErrorKind::invalid_argument, "cost volume has " + std::to_string(dsv.label_count())
                                                     + " labels, displacement set " + std::to_string(disp.size()));
    Best best(dsv.voxel_count());
    fold(dsv.costs(), 0, dsv.label_count(), disp, best);
    return field_from_labels(dsv.dims(), {1.0, 1.0, 1.0}, best, disp);
}

double energy(const FeatureVolume& fixed, const FeatureVolume& moving, const DisplacementField& field, double alpha)
{
    if (!(fixed.dims() == moving.dims()) || !(fixed.dims() == field.dims()))
        throw Error(ErrorKind::dim_mismatch, "energy: fixed, moving and field dims must agree");
    if (fixed.channels() != moving.channels())
        throw Error(ErrorKind::channel_mismatch, "energy: channel counts differ");
    const Dims& d = fixed.dims();
    std::vector<float> sample(static_cast<std::size_t>(fixed.channels()));
    double data = 0.0;
    double smooth = 0.0;
    for (int k = 0; k < d.z; ++k)
        for (int j = 0; j < d.y; ++j)
            for (int i = 0; i < d.x; ++i) {
                const std::size_t n = d.index(i, j, k);
                const Vec3& u = field[n];
                sample_trilinear(moving, {i + static_cast<double>(u.x), j + static_cast<double>(u.y), k + static_cast<double>(u.z)},
                                 sample);
                data += sad(fixed.at(n), sample);
                const Vec3 ux = i + 1 < d.x ? field(i + 1, j, k) : u;
                const Vec3 uy = j + 1 < d.y ? field(i, j + 1, k) : u;
                const Vec3 uz = k + 1 < d.z ? field(i, j, k + 1) : u;
                for (int c = 0; c < 3; ++c) {
                    const double gx = static_cast<double>(ux[c]) - u[c];
                    const double gy = static_cast<double>(uy[c]) - u[c];
                    const double gz = static_cast<double>(uz[c]) - u[c];
                    smooth += gx * gx + gy * gy + gz * gz;
                }
            }
    return data + alpha * smooth;
}

DisplacementField solve_unchunked(const FeatureVolume& fixed, const FeatureVolume& moving, const DisplacementSet& disp,
                                  const CostFilter& filter)
{
    CostVolume dsv = build_dsv(fixed, moving, disp);
    dsv = aggregate_costs(dsv, filter.patch_radius);
    dsv = regularize_dsv(dsv, filter.smooth_sigma);
    Best best(dsv.voxel_count());
    fold(dsv.costs(), 0, dsv.label_count(), disp, best);
    return field_from_labels(fixed.dims(), fixed.spacing(), best, disp);
}

std::size_t labels_per_batch(const Dims& dims, std::size_t budget_bytes)
{
    return budget_bytes / (dims.count() * sizeof(float));
}

DisplacementField chunked_dsv_execution(const FeatureVolume& fixed, const FeatureVolume& moving,
                                        const DisplacementSet& disp, const CostFilter& filter,
                                        std::size_t budget_bytes)
{
    check_registration_inputs(fixed, moving, disp);
    if (filter.patch_radius < 0 || !(filter.smooth_sigma >= 0.0))
        throw Error(ErrorKind::invalid_argument, "patch_radius and smooth_sigma must be >= 0");
    const std::size_t per_batch = labels_per_batch(fixed.dims(), budget_bytes);
    if (per_batch == 0)
        throw Error(ErrorKind::budget, "memory budget of " + std::to_string(budget_bytes)
                                           + " bytes is smaller than one cost map ("
                                           + std::to_string(fixed.dims().count() * sizeof(float)) + " bytes)");
    if (per_batch >= disp.size())
        return solve_unchunked(fixed, moving, disp, filter);

    const Dims& dims = fixed.dims();
    const std::size_t n = dims.count();
    const auto box = box_kernel(filter.patch_radius);
    const auto gauss = gaussian_kernel(filter.smooth_sigma);
    std::vector<float> maps(per_batch * n);
    Best best(n);

    for (std::size_t first = 0; first < disp.size(); first += per_batch) {
        const std::size_t count = std::min(per_batch, disp.size() - first);
#pragma omp parallel
        {
            FilterScratch scratch;
#pragma omp for schedule(dynamic)
            for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(count); ++b) {
                std::span<float> m(maps.data() + static_cast<std::size_t>(b) * n, n);
                label_costs(fixed, moving, disp[first + static_cast<std::size_t>(b)], m);
                // Same kernels, same float round-trips as aggregate_costs and regularize_dsv.
                if (filter.patch_radius > 0)
                    separable_filter(m, dims, box, m, scratch);
                if (filter.smooth_sigma > 0.0)
                    separable_filter(m, dims, gauss, m, scratch);
            }
        }
        fold(std::span<const float>(maps.data(), count * n), first, count, disp, best);
    }
    return field_from_labels(dims, fixed.spacing(), best, disp);
}

} // namespace discreg
