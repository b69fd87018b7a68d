#include "discreg/features.hpp"

#include "discreg/volume_io.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace discreg {

double percentile(std::span<const float> values, double p)
{
    if (values.empty())
        throw Error(ErrorKind::invalid_argument, "percentile of an empty sample");
    if (!(p >= 0.0 && p <= 100.0))
        throw Error(ErrorKind::invalid_argument, "percentile must lie in [0,100]");
    std::vector<float> v(values.begin(), values.end());
    const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double a = v[lo];
    double b = a;
    if (hi != lo)
        b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(hi), v.end());
    return a + (pos - static_cast<double>(lo)) * (b - a);
}

IntensityWindow IntensityWindow::from_percentiles(const ScalarVolume& vol, double p_low, double p_high)
{
    if (!(p_low >= 0.0 && p_low < p_high && p_high <= 100.0))
        throw Error(ErrorKind::invalid_argument, "need 0 <= p_low < p_high <= 100");
    IntensityWindow w;
    w.lo = percentile(vol.data(), p_low);
    w.hi = percentile(vol.data(), p_high);
    w.degenerate = !(w.hi > w.lo);
    return w;
}

float IntensityWindow::apply(float v) const
{
    if (degenerate)
        return 0.5f;
    const double t = (static_cast<double>(v) - lo) / (hi - lo);
    return static_cast<float>(std::clamp(t, 0.0, 1.0));
}

FeatureVolume normalize_intensity(const ScalarVolume& vol, const IntensityWindow& window)
{
    std::vector<float> out(vol.size());
    for (std::size_t n = 0; n < out.size(); ++n)
        out[n] = window.apply(vol[n]);
    return FeatureVolume(vol.dims(), vol.spacing(), 1, std::move(out));
}

NormalizedIntensity normalize_intensity(const ScalarVolume& vol, double p_low, double p_high)
{
    const auto window = IntensityWindow::from_percentiles(vol, p_low, p_high);
    return {normalize_intensity(vol, window), window.degenerate};
}

double StandardizationMap::apply(double v) const
{
    // Non-flat segments only; a flat source segment carries no slope.
    int first = -1, last = -1;
    for (int i = 0; i < 10; ++i) {
        if (source[i + 1] > source[i]) {
            if (first < 0)
                first = i;
            last = i;
        }
    }
    if (first < 0)
        return target[0];
    auto along = [&](int i) {
        const double t = (v - source[i]) / (source[i + 1] - source[i]);
        return target[i] + t * (target[i + 1] - target[i]);
    };
    if (v <= source[first])
        return along(first);
    if (v >= source[last + 1])
        return along(last);
    for (int i = first; i <= last; ++i) {
        if (source[i + 1] > source[i] && v <= source[i + 1])
            return along(i);
    }
    return along(last);
}

std::array<double, 11> foreground_deciles(const ScalarVolume& vol)
{
    const double cut = percentile(vol.data(), 5.0);
    std::vector<float> fg;
    fg.reserve(vol.size());
    for (float v : vol.data()) {
        if (v > cut)
            fg.push_back(v);
    }
    if (fg.empty())
        throw Error(ErrorKind::degenerate, "intensity standardization: volume has no foreground above its 5th percentile");
    std::sort(fg.begin(), fg.end());
    std::array<double, 11> out{};
    for (int i = 0; i <= 10; ++i) {
        const double pos = i / 10.0 * static_cast<double>(fg.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, fg.size() - 1);
        out[static_cast<std::size_t>(i)] = fg[lo] + (pos - static_cast<double>(lo)) * (static_cast<double>(fg[hi]) - fg[lo]);
    }
    if (!(out[10] > out[0]))
        throw Error(ErrorKind::degenerate, "intensity standardization: foreground is constant");
    return out;
}

StandardizationMap standardization_map(const ScalarVolume& vol, const ScalarVolume& reference)
{
    return {foreground_deciles(vol), foreground_deciles(reference)};
}

ScalarVolume intensity_standardize(const ScalarVolume& vol, const ScalarVolume& reference)
{
    const auto map = standardization_map(vol, reference);
    std::vector<float> out(vol.size());
    for (std::size_t n = 0; n < out.size(); ++n)
        out[n] = static_cast<float>(map.apply(vol[n]));
    return ScalarVolume(vol.dims(), vol.spacing(), std::move(out));
}

FeatureVolume edge_features(const ScalarVolume& vol)
{
    return edge_features(vol, IntensityWindow::from_percentiles(vol, 0.0, 100.0));
}

FeatureVolume edge_features(const ScalarVolume& vol, const IntensityWindow& window)
{
    const Dims& d = vol.dims();
    if (d.x < 3 || d.y < 3 || d.z < 3)
        throw Error(ErrorKind::too_small, "edge features need at least 3 voxels per axis, got " + to_string(d));
    const FeatureVolume norm = normalize_intensity(vol, window);
    auto v = [&](int i, int j, int k) { return static_cast<double>(norm.at(i, j, k)[0]); };
    // Central difference inside, one-sided at the two ends.
    auto diff = [](int i, int n, auto&& at) {
        if (i == 0)
            return at(1) - at(0);
        if (i == n - 1)
            return at(n - 1) - at(n - 2);
        return 0.5 * (at(i + 1) - at(i - 1));
    };
    std::vector<float> out(d.count());
#pragma omp parallel for schedule(static)
    for (int k = 0; k < d.z; ++k) {
        for (int j = 0; j < d.y; ++j) {
            for (int i = 0; i < d.x; ++i) {
                const double gx = diff(i, d.x, [&](int a) { return v(a, j, k); });
                const double gy = diff(j, d.y, [&](int b) { return v(i, b, k); });
                const double gz = diff(k, d.z, [&](int c) { return v(i, j, c); });
                out[d.index(i, j, k)] = static_cast<float>(std::sqrt(gx * gx + gy * gy + gz * gz));
            }
        }
    }
    return FeatureVolume(d, vol.spacing(), 1, std::move(out));
}

void SscParams::validate() const
{
    if (patch_radius < 0)
        throw Error(ErrorKind::invalid_argument, "ssc patch_radius must be >= 0");
    if (!(noise_floor > 0.0))
        throw Error(ErrorKind::invalid_argument, "ssc noise_floor must be > 0");
}

std::array<std::array<int, 2>, 12> ssc_pairs()
{
    std::array<std::array<int, 2>, 12> pairs{};
    int n = 0;
    for (int a = 0; a < 6; ++a) {
        for (int b = a + 1; b < 6; ++b) {
            // Opposite neighbours (+x,-x etc.) are 2 apart, not sqrt(2).
            if (a / 2 == b / 2)
                continue;
            pairs[static_cast<std::size_t>(n++)] = {a, b};
        }
    }
    return pairs;
}

FeatureVolume ssc_features(const ScalarVolume& vol, const SscParams& params)
{
    params.validate();
    const Dims& d = vol.dims();
    const int r = params.patch_radius;
    const int min_dim = 2 * (r + 1) + 1;
    if (d.x < min_dim || d.y < min_dim || d.z < min_dim)
        throw Error(ErrorKind::too_small, "ssc needs at least " + std::to_string(min_dim) + " voxels per axis, got "
                                              + to_string(d));

    // Edge-clamped copy padded by r+1 so every patch sample is a plain lookup.
    const int pad = r + 1;
    const Dims pd{d.x + 2 * pad, d.y + 2 * pad, d.z + 2 * pad};
    std::vector<double> padded(pd.count());
    for (int k = 0; k < pd.z; ++k)
        for (int j = 0; j < pd.y; ++j)
            for (int i = 0; i < pd.x; ++i)
                padded[pd.index(i, j, k)] = vol(std::clamp(i - pad, 0, d.x - 1), std::clamp(j - pad, 0, d.y - 1),
                                                std::clamp(k - pad, 0, d.z - 1));

    // Squared differences live on the grid extended by r (patch reach).
    const Dims ed{d.x + 2 * r, d.y + 2 * r, d.z + 2 * r};
    const auto pairs = ssc_pairs();
    std::vector<double> dist(d.count() * 12);

#pragma omp parallel for schedule(static)
    for (int c = 0; c < 12; ++c) {
        const auto& o1 = ssc_neighbours[static_cast<std::size_t>(pairs[static_cast<std::size_t>(c)][0])];
        const auto& o2 = ssc_neighbours[static_cast<std::size_t>(pairs[static_cast<std::size_t>(c)][1])];
        std::vector<double> sq(ed.count());
        for (int k = 0; k < ed.z; ++k)
            for (int j = 0; j < ed.y; ++j)
                for (int i = 0; i < ed.x; ++i) {
                    // extended index e maps to padded index e + 1
                    const double a = padded[pd.index(i + 1 + o1[0], j + 1 + o1[1], k + 1 + o1[2])];
                    const double b = padded[pd.index(i + 1 + o2[0], j + 1 + o2[1], k + 1 + o2[2])];
                    sq[ed.index(i, j, k)] = (a - b) * (a - b);
                }
        // Box sums over the patch, x then y then z, shrinking the grid by 2r each pass.
        std::vector<double> sx(static_cast<std::size_t>(d.x) * ed.y * ed.z);
        for (int k = 0; k < ed.z; ++k)
            for (int j = 0; j < ed.y; ++j)
                for (int i = 0; i < d.x; ++i) {
                    double acc = 0.0;
                    for (int t = 0; t <= 2 * r; ++t)
                        acc += sq[ed.index(i + t, j, k)];
                    sx[(static_cast<std::size_t>(k) * ed.y + j) * d.x + i] = acc;
                }
        std::vector<double> sy(static_cast<std::size_t>(d.x) * d.y * ed.z);
        for (int k = 0; k < ed.z; ++k)
            for (int j = 0; j < d.y; ++j)
                for (int i = 0; i < d.x; ++i) {
                    double acc = 0.0;
                    for (int t = 0; t <= 2 * r; ++t)
                        acc += sx[(static_cast<std::size_t>(k) * ed.y + j + t) * d.x + i];
                    sy[(static_cast<std::size_t>(k) * d.y + j) * d.x + i] = acc;
                }
        for (int k = 0; k < d.z; ++k)
            for (int j = 0; j < d.y; ++j)
                for (int i = 0; i < d.x; ++i) {
                    double acc = 0.0;
                    for (int t = 0; t <= 2 * r; ++t)
                        acc += sy[(static_cast<std::size_t>(k + t) * d.y + j) * d.x + i];
                    dist[d.index(i, j, k) * 12 + static_cast<std::size_t>(c)] = acc;
                }
    }

    std::vector<float> out(d.count() * 12);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(d.count()); ++n) {
        const double* dn = &dist[static_cast<std::size_t>(n) * 12];
        double mean = 0.0;
        for (int c = 0; c < 12; ++c)
            mean += dn[c];
        mean = std::max(mean / 12.0, params.noise_floor);
        for (int c = 0; c < 12; ++c)
            out[static_cast<std::size_t>(n) * 12 + static_cast<std::size_t>(c)] = static_cast<float>(std::exp(-dn[c] / mean));
    }
    return FeatureVolume(d, vol.spacing(), 12, std::move(out));
}

FeatureVolume zscore_channels(const FeatureVolume& f)
{
    const std::size_t nc = static_cast<std::size_t>(f.channels());
    const std::size_t nv = f.dims().count();
    std::vector<double> mean(nc, 0.0), var(nc, 0.0);
    for (std::size_t n = 0; n < nv; ++n) {
        auto v = f.at(n);
        for (std::size_t c = 0; c < nc; ++c)
            mean[c] += v[c];
    }
    for (double& m : mean)
        m /= static_cast<double>(nv);
    for (std::size_t n = 0; n < nv; ++n) {
        auto v = f.at(n);
        for (std::size_t c = 0; c < nc; ++c)
            var[c] += (v[c] - mean[c]) * (v[c] - mean[c]);
    }
    std::vector<float> out(f.data().size());
    for (std::size_t n = 0; n < nv; ++n) {
        auto v = f.at(n);
        for (std::size_t c = 0; c < nc; ++c) {
            const double sd = std::sqrt(var[c] / static_cast<double>(nv));
            out[n * nc + c] = sd > 0.0 ? static_cast<float>((v[c] - mean[c]) / sd) : 0.0f;
        }
    }
    return FeatureVolume(f.dims(), f.spacing(), f.channels(), std::move(out));
}

FeatureVolume load_external_features(const std::filesystem::path& path, bool zscore)
{
    FeatureVolume f = load_features(path);
    return zscore ? zscore_channels(f) : f;
}

const char* to_string(FeatureKind k)
{
    switch (k) {
    case FeatureKind::intensity: return "intensity";
    case FeatureKind::edge: return "edge";
    case FeatureKind::ssc: return "ssc";
    case FeatureKind::external: return "external";
    }
    return "intensity";
}

FeatureKind feature_kind_from_string(const std::string& s)
{
    if (s == "intensity") return FeatureKind::intensity;
    if (s == "edge") return FeatureKind::edge;
    if (s == "ssc") return FeatureKind::ssc;
    if (s == "external") return FeatureKind::external;
    throw Error(ErrorKind::invalid_argument, "unknown descriptor '" + s + "' (expected intensity|edge|ssc|external)");
}

} // namespace discreg
