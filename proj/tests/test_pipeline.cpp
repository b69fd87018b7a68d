#include "discreg/config_json.hpp"
#include "discreg/pipeline.hpp"
#include "discreg/resample.hpp"
#include "discreg/synth.hpp"
#include "discreg/volume_io.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>

using namespace discreg;

namespace {

RegistrationConfig single_level(FeatureKind kind, double l_max = 3, int r = 1, double alpha = 1)
{
    RegistrationConfig cfg;
    cfg.feature = kind;
    cfg.levels = {{1, 1.0, l_max, r, alpha}};
    return cfg;
}

bool same_field(const DisplacementField& a, const DisplacementField& b)
{
    return a.dims() == b.dims() && std::memcmp(a.data().data(), b.data().data(), a.data().size_bytes()) == 0;
}

} // namespace

TEST_SUITE("pipeline")
{
    TEST_CASE("compose_fields adds componentwise")
    {
        std::mt19937_64 rng(1);
        const Dims d{5, 4, 3};
        const auto a = test::smooth_field(d, 2.0, rng), b = test::smooth_field(d, 1.0, rng);
        const auto c = compose_fields(a, b);
        for (std::size_t n = 0; n < d.count(); ++n)
            for (int k = 0; k < 3; ++k)
                CHECK(c[n][k] == a[n][k] + b[n][k]);
        CHECK_THROWS_AS(compose_fields(a, DisplacementField({5, 4, 4})), Error);
    }

    TEST_CASE("downsample_features and warp_features act per channel")
    {
        std::mt19937_64 rng(2);
        const Dims d{8, 6, 4};
        const auto f = oracle::random_features(d, 3, rng);
        const auto half = downsample_features(f, 2);
        CHECK(half.dims() == Dims{4, 3, 2});
        CHECK(half.channels() == 3);
        const auto u = test::smooth_field(d, 1.5, rng);
        const auto w = warp_features(f, u);
        const std::vector<float> fd(f.data().begin(), f.data().end());
        for (int c = 0; c < 3; ++c) {
            std::vector<float> ch(d.count());
            for (std::size_t n = 0; n < d.count(); ++n)
                ch[n] = f.at(n)[static_cast<std::size_t>(c)];
            const ScalarVolume sv(d, {1, 1, 1}, ch);
            const auto ds = downsample(sv, 2);
            for (std::size_t n = 0; n < half.dims().count(); ++n)
                CHECK(half.at(n)[static_cast<std::size_t>(c)] == ds[n]);
            for (int k = 0; k < d.z; ++k)
                for (int j = 0; j < d.y; ++j)
                    for (int i = 0; i < d.x; ++i) {
                        const Vec3 v = u(i, j, k);
                        CHECK(w.at(i, j, k)[static_cast<std::size_t>(c)]
                              == doctest::Approx(oracle::trilinear(fd, 3, c, d, i + v.x, j + v.y, k + v.z)).epsilon(1e-5));
                    }
        }
    }

    TEST_CASE("self-registration gives the zero field for every descriptor")
    {
        const ScalarVolume v = smooth_random_volume({20, 20, 20}, 4, 1.5);
        for (FeatureKind kind : {FeatureKind::intensity, FeatureKind::edge, FeatureKind::ssc}) {
            const auto res = register_pair(v, v, single_level(kind));
            CHECK(res.field.is_zero());
            CHECK(std::memcmp(res.warped.data().data(), v.data().data(), v.data().size_bytes()) == 0);
        }
        RegistrationConfig multi;
        multi.levels = {{2, 1, 2, 1, 1}, {1, 1, 1, 1, 1}};
        CHECK(register_pair(v, v, multi).field.is_zero());
    }

    TEST_CASE("single-level translation recovery")
    {
        SynthParams p;
        p.kind = SynthKind::translation;
        p.dims = {28, 28, 28};
        p.seed = 5;
        p.shift = {2, 0, 0};
        const auto c = make_synth_case(p);
        for (FeatureKind kind : {FeatureKind::intensity, FeatureKind::ssc}) {
            const auto res = register_pair(c.fixed, c.moving, single_level(kind, 4, 1, 0));
            const int margin = 4 + 1;
            std::size_t wrong = 0;
            for (int k = margin + 1; k < p.dims.z - margin - 1; ++k)
                for (int j = margin + 1; j < p.dims.y - margin - 1; ++j)
                    for (int i = margin + 1; i < p.dims.x - margin - 1; ++i)
                        wrong += !(res.field(i, j, k) == Vec3{2, 0, 0});
            CHECK(wrong == 0);
        }
    }

    TEST_CASE("multi-level registration recovers a large translation")
    {
        SynthParams p;
        p.kind = SynthKind::translation;
        p.dims = {32, 32, 32};
        p.seed = 6;
        p.shift = {6, -4, 0};
        const auto c = make_synth_case(p);
        RegistrationConfig cfg;
        cfg.levels = {{2, 1, 4, 1, 0.5}, {1, 1, 1, 1, 0.5}};
        const auto res = register_pair(c.fixed, c.moving, cfg);
        std::size_t good = 0, total = 0;
        for (int k = 12; k < 20; ++k)
            for (int j = 12; j < 20; ++j)
                for (int i = 12; i < 20; ++i) {
                    ++total;
                    const Vec3 v = res.field(i, j, k);
                    good += std::abs(v.x - 6) < 0.5 && std::abs(v.y + 4) < 0.5 && std::abs(v.z) < 0.5;
                }
        CHECK(good == total);
    }

    TEST_CASE("registration is deterministic and rejects mismatched inputs")
    {
        SynthParams p;
        p.dims = {24, 24, 24};
        p.seed = 7;
        p.amplitude = 2;
        p.period = 16;
        const auto c = make_synth_case(p);
        RegistrationConfig cfg;
        cfg.levels = {{2, 1, 2, 1, 1}, {1, 1, 2, 1, 1}};
        const auto a = register_pair(c.fixed, c.moving, cfg);
        const auto b = register_pair(c.fixed, c.moving, cfg);
        CHECK(same_field(a.field, b.field));
        CHECK(std::memcmp(a.warped.data().data(), b.warped.data().data(), a.warped.data().size_bytes()) == 0);

        const ScalarVolume other(Dims{24, 24, 23}, {1, 1, 1}, 1.0f);
        CHECK_THROWS_AS(register_pair(c.fixed, other, cfg), Error);
        // 2*l_max+1 voxels per axis at every level.
        RegistrationConfig wide = single_level(FeatureKind::ssc, 12);
        CHECK_THROWS_AS(register_pair(c.fixed, c.moving, wide), Error);
    }

    TEST_CASE("external features")
    {
        std::mt19937_64 rng(8);
        const Dims d{16, 16, 16};
        const ScalarVolume v = smooth_random_volume(d, 9, 1.5);
        RegistrationConfig cfg = single_level(FeatureKind::external, 2);
        const FeatureVolume feats = as_feature(v);
        const auto res = register_pair(v, v, cfg, ExternalFeatures{feats, feats});
        CHECK(res.field.is_zero());

        // Through files, and equal to the intensity path for a single channel.
        test::TempDir tmp;
        save_volume(feats, tmp / "f");
        cfg.external_fixed = tmp / "f";
        cfg.external_moving = tmp / "f";
        CHECK(register_pair(v, v, cfg).field.is_zero());

        const auto bad = oracle::random_features({16, 16, 15}, 2, rng);
        CHECK_THROWS_AS(register_pair(v, v, cfg, ExternalFeatures{bad, bad}), Error);
        RegistrationConfig none = single_level(FeatureKind::external, 2);
        CHECK_THROWS_AS(register_pair(v, v, none), Error);
    }

    TEST_CASE("standardization modes")
    {
        const ScalarVolume v = smooth_random_volume({16, 16, 16}, 10, 1.5);
        std::vector<float> scaled(v.data().begin(), v.data().end());
        for (float& x : scaled)
            x = 3.0f * x + 50.0f;
        const ScalarVolume w(v.dims(), v.spacing(), scaled);
        RegistrationConfig cfg = single_level(FeatureKind::intensity, 2);
        cfg.standardize = StandardizeMode::pair;
        CHECK(register_pair(v, w, cfg).field.is_zero());
        cfg.standardize = StandardizeMode::reference;
        CHECK_THROWS_AS(cfg.validate(), Error);
    }

    TEST_CASE("config validation")
    {
        RegistrationConfig cfg;
        CHECK_NOTHROW(cfg.validate());
        CHECK(cfg.levels.size() == 2);
        CHECK(cfg.levels.back().factor == 1);
        CHECK(LevelParams{1, 1, 2, 2, 4}.smooth_sigma() == 2.0);

        cfg.levels = {};
        CHECK_THROWS_AS(cfg.validate(), Error);
        cfg.levels = {{2, 1, 2, 1, 1}};
        CHECK_THROWS_AS(cfg.validate(), Error);
        cfg.levels = {{1, 1, 2, 1, 1}, {2, 1, 2, 1, 1}, {1, 1, 2, 1, 1}};
        CHECK_THROWS_AS(cfg.validate(), Error);
        cfg.levels = {{3, 1, 2, 1, 1}, {2, 1, 2, 1, 1}, {1, 1, 2, 1, 1}};
        CHECK_THROWS_AS(cfg.validate(), Error);
        cfg.levels = {{1, 3, 7, 1, 1}};
        CHECK_THROWS_AS(cfg.validate(), Error);
        cfg.levels = {{1, 1, 2, -1, 1}};
        CHECK_THROWS_AS(cfg.validate(), Error);
        cfg.levels = {{1, 1, 2, 1, -1}};
        CHECK_THROWS_AS(cfg.validate(), Error);
    }

    TEST_CASE("config JSON round trip")
    {
        test::TempDir tmp;
        const auto j = nlohmann::json::parse(R"({
            "feature": "edge",
            "ssc": {"patch_radius": 2, "noise_floor": 0.01},
            "intensity_percentiles": [2, 98],
            "external": {"fixed": "a", "moving": "b", "zscore": true},
            "standardize": true,
            "levels": [{"factor": 4, "q": 1, "l_max": 3, "patch_radius": 1, "alpha": 0.5},
                       {"factor": 1, "q": 1, "l_max": 1}],
            "memory_budget_mb": 64
        })");
        const auto cfg = config_from_json(j, tmp.path());
        CHECK(cfg.feature == FeatureKind::edge);
        CHECK(cfg.ssc.patch_radius == 2);
        CHECK(cfg.ssc.noise_floor == 0.01);
        CHECK(cfg.intensity_p_low == 2);
        CHECK(cfg.intensity_p_high == 98);
        CHECK(cfg.external_fixed == tmp / "a");
        CHECK(cfg.external_zscore);
        CHECK(cfg.standardize == StandardizeMode::pair);
        REQUIRE(cfg.levels.size() == 2);
        CHECK(cfg.levels[0].factor == 4);
        CHECK(cfg.levels[0].alpha == 0.5);
        CHECK(cfg.levels[1].patch_radius == LevelParams{}.patch_radius);
        CHECK(cfg.memory_budget_bytes == 64ull << 20);

        const auto again = config_from_json(config_to_json(cfg));
        CHECK(config_to_json(again) == config_to_json(cfg));

        CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"feature": "sift"})")), Error);
        CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"levels": []})")), Error);
        CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"([1, 2])")), Error);
        CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"intensity_percentiles": [90, 10]})")), Error);

        std::ofstream(tmp / "c.json") << R"({"feature": "intensity"})";
        CHECK(load_config(tmp / "c.json").feature == FeatureKind::intensity);
        CHECK_THROWS_AS(load_config(tmp / "missing.json"), Error);
        std::ofstream(tmp / "broken.json") << "{";
        CHECK_THROWS_AS(load_config(tmp / "broken.json"), Error);
    }

    TEST_CASE("memory budget from the environment")
    {
        ::setenv("REG_MEMORY_BUDGET_MB", "7", 1);
        CHECK(RegistrationConfig::default_memory_budget() == 7ull << 20);
        ::unsetenv("REG_MEMORY_BUDGET_MB");
        CHECK(RegistrationConfig::default_memory_budget() == 1024ull << 20);
    }
}
