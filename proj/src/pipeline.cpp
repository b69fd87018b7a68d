#include "discreg/pipeline.hpp"

#include "discreg/config_json.hpp"
#include "discreg/filters.hpp"
#include "discreg/resample.hpp"
#include "discreg/volume_io.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

namespace discreg {

double LevelParams::smooth_sigma() const
{
    return std::sqrt(alpha);
}

const char* to_string(StandardizeMode m)
{
    switch (m) {
    case StandardizeMode::none: return "none";
    case StandardizeMode::pair: return "pair";
    case StandardizeMode::reference: return "reference";
    }
    return "none";
}

StandardizeMode standardize_mode_from_string(const std::string& s)
{
    if (s == "none") return StandardizeMode::none;
    if (s == "pair") return StandardizeMode::pair;
    if (s == "reference") return StandardizeMode::reference;
    throw Error(ErrorKind::config, "unknown standardize mode '" + s + "' (expected none|pair|reference)");
}

std::vector<LevelParams> RegistrationConfig::default_levels()
{
    return {
        {2, 1.0, 4.0, 2, 2.0},
        {1, 1.0, 2.0, 2, 2.0},
    };
}

std::size_t RegistrationConfig::default_memory_budget()
{
    std::size_t mb = 1024;
    if (const char* env = std::getenv("REG_MEMORY_BUDGET_MB")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end != env && *end == '\0')
            mb = static_cast<std::size_t>(v);
    }
    return mb * 1024 * 1024;
}

void RegistrationConfig::validate() const
{
    if (levels.empty())
        throw Error(ErrorKind::config, "registration needs at least one level");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const LevelParams& l = levels[i];
        const std::string where = "level " + std::to_string(i) + ": ";
        if (l.factor < 1)
            throw Error(ErrorKind::config, where + "factor must be >= 1");
        if (i > 0) {
            const int prev = levels[i - 1].factor;
            if (l.factor > prev)
                throw Error(ErrorKind::config, where + "factors must be non-increasing (coarse to fine)");
            if (prev % l.factor != 0)
                throw Error(ErrorKind::config, where + "factor must divide the previous level's factor");
        }
        if (l.patch_radius < 0)
            throw Error(ErrorKind::config, where + "patch_radius must be >= 0");
        if (!(l.alpha >= 0.0))
            throw Error(ErrorKind::config, where + "alpha must be >= 0");
        try {
            DisplacementSet(l.q, l.l_max);
        } catch (const Error& e) {
            throw Error(ErrorKind::config, where + e.what());
        }
    }
    if (levels.back().factor != 1)
        throw Error(ErrorKind::config, "the finest level must have factor 1");
    if (!(intensity_p_low >= 0.0 && intensity_p_low < intensity_p_high && intensity_p_high <= 100.0))
        throw Error(ErrorKind::config, "intensity percentiles must satisfy 0 <= low < high <= 100");
    ssc.validate();
    if (standardize == StandardizeMode::reference && standardize_reference.empty())
        throw Error(ErrorKind::config, "standardize=reference needs standardize_reference");
}

DisplacementField compose_fields(const DisplacementField& coarse_up, const DisplacementField& increment)
{
    if (!(coarse_up.dims() == increment.dims()))
        throw Error(ErrorKind::dim_mismatch, "compose_fields: " + to_string(coarse_up.dims()) + " vs "
                                                 + to_string(increment.dims()));
    std::vector<Vec3> out(coarse_up.dims().count());
    for (std::size_t n = 0; n < out.size(); ++n) {
        const Vec3& a = coarse_up[n];
        const Vec3& b = increment[n];
        out[n] = {a.x + b.x, a.y + b.y, a.z + b.z};
    }
    return DisplacementField(coarse_up.dims(), coarse_up.spacing(), std::move(out));
}

FeatureVolume downsample_features(const FeatureVolume& f, int factor)
{
    if (factor == 1)
        return f;
    const std::size_t nc = static_cast<std::size_t>(f.channels());
    const std::size_t nv = f.dims().count();
    std::vector<float> out;
    Dims out_dims;
    Spacing out_spacing;
    std::vector<float> channel(nv);
    for (std::size_t c = 0; c < nc; ++c) {
        for (std::size_t n = 0; n < nv; ++n)
            channel[n] = f.data()[n * nc + c];
        const ScalarVolume low = downsample(ScalarVolume(f.dims(), f.spacing(), channel), factor);
        if (out.empty()) {
            out_dims = low.dims();
            out_spacing = low.spacing();
            out.resize(out_dims.count() * nc);
        }
        for (std::size_t n = 0; n < out_dims.count(); ++n)
            out[n * nc + c] = low[n];
    }
    return FeatureVolume(out_dims, out_spacing, f.channels(), std::move(out));
}

FeatureVolume warp_features(const FeatureVolume& f, const DisplacementField& field)
{
    if (!(f.dims() == field.dims()))
        throw Error(ErrorKind::dim_mismatch, "warp_features: dims differ");
    const Dims& d = f.dims();
    const std::size_t nc = static_cast<std::size_t>(f.channels());
    std::vector<float> out(d.count() * nc);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < d.z; ++k)
        for (int j = 0; j < d.y; ++j)
            for (int i = 0; i < d.x; ++i) {
                const std::size_t n = d.index(i, j, k);
                const Vec3& u = field[n];
                sample_trilinear(f, {i + static_cast<double>(u.x), j + static_cast<double>(u.y), k + static_cast<double>(u.z)},
                                 std::span<float>(out.data() + n * nc, nc));
            }
    return FeatureVolume(d, f.spacing(), f.channels(), std::move(out));
}

namespace {

struct FeaturePair {
    FeatureVolume fixed;
    FeatureVolume moving;
};

FeaturePair image_features(const ScalarVolume& fixed, const ScalarVolume& moving, const RegistrationConfig& cfg)
{
    switch (cfg.feature) {
    case FeatureKind::intensity: {
        // One window, taken from the fixed image, so equal intensities stay equal.
        const auto w = IntensityWindow::from_percentiles(fixed, cfg.intensity_p_low, cfg.intensity_p_high);
        return {normalize_intensity(fixed, w), normalize_intensity(moving, w)};
    }
    case FeatureKind::edge: {
        const auto w = IntensityWindow::from_percentiles(fixed, 0.0, 100.0);
        return {edge_features(fixed, w), edge_features(moving, w)};
    }
    case FeatureKind::ssc:
        return {ssc_features(fixed, cfg.ssc), ssc_features(moving, cfg.ssc)};
    case FeatureKind::external:
        break;
    }
    throw Error(ErrorKind::config, "external features are not computed from images");
}

} // namespace

RegistrationResult register_pair(const ScalarVolume& fixed_in, const ScalarVolume& moving_in, const RegistrationConfig& cfg,
                                 const std::optional<ExternalFeatures>& ext_in)
{
    cfg.validate();
    if (!(fixed_in.dims() == moving_in.dims()))
        throw Error(ErrorKind::dim_mismatch, "fixed " + to_string(fixed_in.dims()) + " vs moving "
                                                 + to_string(moving_in.dims()));

    ScalarVolume fixed = fixed_in;
    ScalarVolume moving = moving_in;
    switch (cfg.standardize) {
    case StandardizeMode::none: break;
    case StandardizeMode::pair: moving = intensity_standardize(moving, fixed); break;
    case StandardizeMode::reference: {
        const ScalarVolume ref = load_scalar(cfg.standardize_reference);
        fixed = intensity_standardize(fixed, ref);
        moving = intensity_standardize(moving, ref);
        break;
    }
    }

    std::optional<ExternalFeatures> ext;
    if (cfg.feature == FeatureKind::external) {
        if (ext_in) {
            ext = *ext_in;
            if (cfg.external_zscore)
                ext = ExternalFeatures{zscore_channels(ext->fixed), zscore_channels(ext->moving)};
        } else {
            if (cfg.external_fixed.empty() || cfg.external_moving.empty())
                throw Error(ErrorKind::config, "external features need both fixed and moving feature paths");
            ext = ExternalFeatures{load_external_features(cfg.external_fixed, cfg.external_zscore),
                                   load_external_features(cfg.external_moving, cfg.external_zscore)};
        }
        if (!(ext->fixed.dims() == fixed.dims()) || !(ext->moving.dims() == fixed.dims()))
            throw Error(ErrorKind::dim_mismatch, "external feature dims " + to_string(ext->fixed.dims()) + " / "
                                                     + to_string(ext->moving.dims()) + " do not match image dims "
                                                     + to_string(fixed.dims()));
    }

    std::optional<DisplacementField> field;
    int prev_factor = 0;
    for (const LevelParams& level : cfg.levels) {
        const ScalarVolume fixed_l = downsample(fixed, level.factor);
        const Dims& dims = fixed_l.dims();
        const DisplacementField up = field ? upsample_field(*field, prev_factor / level.factor, dims)
                                           : DisplacementField(dims, fixed_l.spacing());

        FeaturePair feats;
        if (ext) {
            feats.fixed = downsample_features(ext->fixed, level.factor);
            feats.moving = warp_features(downsample_features(ext->moving, level.factor), up);
        } else {
            // Features are recomputed on the warped image; SSC does not commute with warping.
            const ScalarVolume moving_l = warp_scalar(downsample(moving, level.factor), up);
            feats = image_features(fixed_l, moving_l, cfg);
        }

        const DisplacementSet disp(level.q, level.l_max);
        const DisplacementField increment = chunked_dsv_execution(
            feats.fixed, feats.moving, disp, CostFilter{level.patch_radius, level.smooth_sigma()}, cfg.memory_budget_bytes);
        field = compose_fields(up, increment);
        prev_factor = level.factor;
    }

    const DisplacementField final_field(field->dims(), fixed_in.spacing(),
                                        std::vector<Vec3>(field->data().begin(), field->data().end()));
    return {final_field, warp_scalar(moving_in, final_field)};
}

// --- JSON config ---

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty())
        return base / path;
    return path;
}

} // namespace

RegistrationConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir)
{
    RegistrationConfig cfg;
    try {
        if (!j.is_object())
            throw Error(ErrorKind::config, "config must be a JSON object");
        if (j.contains("feature"))
            cfg.feature = feature_kind_from_string(j.at("feature").get<std::string>());
        if (j.contains("ssc")) {
            const auto& s = j.at("ssc");
            cfg.ssc.patch_radius = s.value("patch_radius", cfg.ssc.patch_radius);
            cfg.ssc.noise_floor = s.value("noise_floor", cfg.ssc.noise_floor);
        }
        if (j.contains("intensity_percentiles")) {
            const auto p = j.at("intensity_percentiles").get<std::vector<double>>();
            if (p.size() != 2)
                throw Error(ErrorKind::config, "intensity_percentiles must have two entries");
            cfg.intensity_p_low = p[0];
            cfg.intensity_p_high = p[1];
        }
        if (j.contains("external")) {
            const auto& e = j.at("external");
            if (e.contains("fixed"))
                cfg.external_fixed = resolve(base_dir, e.at("fixed").get<std::string>());
            if (e.contains("moving"))
                cfg.external_moving = resolve(base_dir, e.at("moving").get<std::string>());
            cfg.external_zscore = e.value("zscore", false);
        }
        if (j.contains("standardize")) {
            const auto& s = j.at("standardize");
            if (s.is_boolean())
                cfg.standardize = s.get<bool>() ? StandardizeMode::pair : StandardizeMode::none;
            else
                cfg.standardize = standardize_mode_from_string(s.get<std::string>());
        }
        if (j.contains("standardize_reference"))
            cfg.standardize_reference = resolve(base_dir, j.at("standardize_reference").get<std::string>());
        if (j.contains("levels")) {
            cfg.levels.clear();
            for (const auto& l : j.at("levels")) {
                LevelParams p;
                p.factor = l.value("factor", p.factor);
                p.q = l.value("q", p.q);
                p.l_max = l.value("l_max", p.l_max);
                p.patch_radius = l.value("patch_radius", p.patch_radius);
                p.alpha = l.value("alpha", p.alpha);
                cfg.levels.push_back(p);
            }
        }
        if (j.contains("memory_budget_mb"))
            cfg.memory_budget_bytes = j.at("memory_budget_mb").get<std::size_t>() * 1024 * 1024;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

nlohmann::json config_to_json(const RegistrationConfig& cfg)
{
    nlohmann::json j;
    j["feature"] = to_string(cfg.feature);
    j["ssc"] = {{"patch_radius", cfg.ssc.patch_radius}, {"noise_floor", cfg.ssc.noise_floor}};
    j["intensity_percentiles"] = {cfg.intensity_p_low, cfg.intensity_p_high};
    if (cfg.feature == FeatureKind::external)
        j["external"] = {{"fixed", cfg.external_fixed.string()},
                         {"moving", cfg.external_moving.string()},
                         {"zscore", cfg.external_zscore}};
    j["standardize"] = to_string(cfg.standardize);
    if (!cfg.standardize_reference.empty())
        j["standardize_reference"] = cfg.standardize_reference.string();
    j["levels"] = nlohmann::json::array();
    for (const auto& l : cfg.levels)
        j["levels"].push_back({{"factor", l.factor}, {"q", l.q}, {"l_max", l.l_max}, {"patch_radius", l.patch_radius}, {"alpha", l.alpha}});
    j["memory_budget_mb"] = cfg.memory_budget_bytes / (1024 * 1024);
    return j;
}

RegistrationConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::missing_file, "cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

} // namespace discreg
