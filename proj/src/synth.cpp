#include "discreg/synth.hpp"

#include "discreg/filters.hpp"
#include "discreg/resample.hpp"
#include "discreg/volume_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace discreg {

const char* to_string(SynthKind k)
{
    switch (k) {
    case SynthKind::translation: return "translation";
    case SynthKind::sinusoid: return "sinusoid";
    case SynthKind::blobs: return "blobs";
    }
    return "sinusoid";
}

SynthKind synth_kind_from_string(const std::string& s)
{
    if (s == "translation") return SynthKind::translation;
    if (s == "sinusoid") return SynthKind::sinusoid;
    if (s == "blobs") return SynthKind::blobs;
    throw Error(ErrorKind::invalid_argument, "unknown synth kind '" + s + "' (expected translation|sinusoid|blobs)");
}

namespace {

// Independent streams per purpose, all derived from the user seed.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(purpose)};
    return std::mt19937_64(seq);
}

std::vector<float> rescale(std::vector<float> v, float lo, float hi)
{
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double a = *mn, b = *mx;
    const double span = b > a ? b - a : 1.0;
    for (float& x : v)
        x = static_cast<float>(lo + (x - a) / span * (hi - lo));
    return v;
}

double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace

ScalarVolume smooth_random_volume(const Dims& dims, std::uint64_t seed, double sigma)
{
    auto rng = stream(seed, 1);
    std::normal_distribution<float> noise(0.0f, 1.0f);
    std::vector<float> v(dims.count());
    for (float& x : v)
        x = noise(rng);
    return ScalarVolume(dims, {1.0, 1.0, 1.0}, rescale(gaussian_smooth(v, dims, sigma), 0.0f, 1000.0f));
}

LabelVolume blob_labels(const Dims& dims, int count, std::uint64_t seed, double min_radius, double max_radius)
{
    struct Blob {
        double cx, cy, cz, r;
    };
    auto rng = stream(seed, 2);
    std::vector<Blob> blobs;
    for (int b = 0; b < count; ++b)
        blobs.push_back({uniform(rng, 0.0, dims.x - 1.0), uniform(rng, 0.0, dims.y - 1.0), uniform(rng, 0.0, dims.z - 1.0),
                         uniform(rng, min_radius, max_radius)});

    std::vector<std::int32_t> out(dims.count(), 0);
    for (int k = 0; k < dims.z; ++k)
        for (int j = 0; j < dims.y; ++j)
            for (int i = 0; i < dims.x; ++i) {
                double best = 1.0;
                std::int32_t label = 0;
                for (std::size_t b = 0; b < blobs.size(); ++b) {
                    const Blob& s = blobs[b];
                    const double d = std::sqrt((i - s.cx) * (i - s.cx) + (j - s.cy) * (j - s.cy) + (k - s.cz) * (k - s.cz)) / s.r;
                    if (d < best) {
                        best = d;
                        label = static_cast<std::int32_t>(b + 1);
                    }
                }
                out[dims.index(i, j, k)] = label;
            }
    const DType dtype = count < 256 ? DType::uint8 : DType::uint16;
    return LabelVolume(dims, {1.0, 1.0, 1.0}, std::move(out), dtype);
}

DisplacementField sinusoid_field(const Dims& dims, double amplitude, double period, std::uint64_t seed)
{
    auto rng = stream(seed, 3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::array<std::array<double, 3>, 3> dir{};
    std::array<double, 3> phase{};
    for (int c = 0; c < 3; ++c) {
        double norm = 0.0;
        while (norm < 1e-3) {
            for (double& w : dir[static_cast<std::size_t>(c)])
                w = gauss(rng);
            norm = std::hypot(dir[c][0], dir[c][1], dir[c][2]);
        }
        for (double& w : dir[static_cast<std::size_t>(c)])
            w /= norm;
        phase[static_cast<std::size_t>(c)] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    }
    const double omega = 2.0 * std::numbers::pi / period;
    std::vector<Vec3> u(dims.count());
    for (int k = 0; k < dims.z; ++k)
        for (int j = 0; j < dims.y; ++j)
            for (int i = 0; i < dims.x; ++i) {
                float v[3];
                for (int c = 0; c < 3; ++c) {
                    const auto& w = dir[static_cast<std::size_t>(c)];
                    v[c] = static_cast<float>(amplitude * std::sin(omega * (w[0] * i + w[1] * j + w[2] * k) + phase[c]));
                }
                u[dims.index(i, j, k)] = {v[0], v[1], v[2]};
            }
    return DisplacementField(dims, {1.0, 1.0, 1.0}, std::move(u));
}

DisplacementField invert_field(const DisplacementField& u, int iterations)
{
    const Dims& d = u.dims();
    // Each component is sampled as its own scalar volume.
    std::array<ScalarVolume, 3> comp;
    for (int c = 0; c < 3; ++c) {
        std::vector<float> v(d.count());
        for (std::size_t n = 0; n < v.size(); ++n)
            v[n] = u[n][c];
        comp[static_cast<std::size_t>(c)] = ScalarVolume(d, u.spacing(), std::move(v));
    }
    std::vector<Vec3> inv(d.count());
    for (int k = 0; k < d.z; ++k)
        for (int j = 0; j < d.y; ++j)
            for (int i = 0; i < d.x; ++i) {
                const std::size_t n = d.index(i, j, k);
                double vx = -u[n].x, vy = -u[n].y, vz = -u[n].z;
                for (int it = 0; it < iterations; ++it) {
                    const Point3 p{i + vx, j + vy, k + vz};
                    vx = -sample_trilinear(comp[0], p);
                    vy = -sample_trilinear(comp[1], p);
                    vz = -sample_trilinear(comp[2], p);
                }
                inv[n] = {static_cast<float>(vx), static_cast<float>(vy), static_cast<float>(vz)};
            }
    return DisplacementField(d, u.spacing(), std::move(inv));
}

SynthCase make_synth_case(const SynthParams& p)
{
    VolumeHeader{p.dims, {1.0, 1.0, 1.0}, 1, DType::float32}.validate();
    const double max_radius = std::max(2.0, std::min({p.dims.x, p.dims.y, p.dims.z}) / 5.0);
    LabelVolume labels = blob_labels(p.dims, p.blob_count, p.seed, 0.5 * max_radius, max_radius);

    ScalarVolume fixed;
    if (p.kind == SynthKind::blobs) {
        // Piecewise-constant structures plus a faint texture.
        auto rng = stream(p.seed, 4);
        std::vector<float> level(static_cast<std::size_t>(p.blob_count) + 1);
        for (float& l : level)
            l = static_cast<float>(uniform(rng, 100.0, 900.0));
        level[0] = 50.0f;
        const ScalarVolume texture = smooth_random_volume(p.dims, p.seed, p.noise_sigma);
        std::vector<float> v(p.dims.count());
        for (std::size_t n = 0; n < v.size(); ++n)
            v[n] = level[static_cast<std::size_t>(labels[n])] + 0.1f * texture[n];
        fixed = ScalarVolume(p.dims, {1.0, 1.0, 1.0}, gaussian_smooth(v, p.dims, 1.0));
    } else {
        fixed = smooth_random_volume(p.dims, p.seed, p.noise_sigma);
    }

    DisplacementField forward, truth;
    if (p.kind == SynthKind::translation) {
        for (float c : {p.shift.x, p.shift.y, p.shift.z}) {
            if (c != std::round(c))
                throw Error(ErrorKind::invalid_argument, "translation shift must be integer");
        }
        forward = DisplacementField::constant(p.dims, {-p.shift.x, -p.shift.y, -p.shift.z});
        truth = DisplacementField::constant(p.dims, p.shift);
    } else {
        forward = sinusoid_field(p.dims, p.amplitude, p.period, p.seed);
        truth = invert_field(forward);
    }
    ScalarVolume moving = warp_scalar(fixed, forward);
    LabelVolume moving_labels = warp_labels(labels, forward);
    return {std::move(fixed), std::move(moving), std::move(labels), std::move(moving_labels), std::move(forward), std::move(truth)};
}

void write_synth_case(const SynthCase& c, const SynthParams& p, const std::filesystem::path& prefix)
{
    auto path = [&](const char* suffix) {
        std::filesystem::path out = prefix;
        out += suffix;
        return out;
    };
    save_volume(c.fixed, path("_fixed"));
    save_volume(c.moving, path("_moving"));
    save_volume(c.fixed_labels, path("_fixed_labels"));
    save_volume(c.moving_labels, path("_moving_labels"));
    save_volume(c.forward, path("_forward_field"));
    save_volume(c.truth, path("_truth_field"));

    nlohmann::ordered_json j;
    j["kind"] = to_string(p.kind);
    j["dims"] = {p.dims.x, p.dims.y, p.dims.z};
    j["seed"] = p.seed;
    if (p.kind == SynthKind::translation)
        j["shift"] = {p.shift.x, p.shift.y, p.shift.z};
    else {
        j["amplitude"] = p.amplitude;
        j["period"] = p.period;
    }
    j["blob_count"] = p.blob_count;
    j["noise_sigma"] = p.noise_sigma;
    std::ofstream out(path("_synth.json"), std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::io, "cannot write " + path("_synth.json").string());
    out << j.dump(2) << '\n';
}

} // namespace discreg
