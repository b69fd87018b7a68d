// Acceptance suite: one PASS/FAIL line per criterion.
//
//   discreg_acceptance            all criteria
//   discreg_acceptance 3 5        selected criteria (10 needs 1-9 and reruns them)

#include "cli.hpp"

#include "discreg/eval.hpp"
#include "discreg/features.hpp"
#include "discreg/parallel.hpp"
#include "discreg/pipeline.hpp"
#include "discreg/regcore.hpp"
#include "discreg/resample.hpp"
#include "discreg/synth.hpp"
#include "discreg/volume_io.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace discreg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Named digests of everything a criterion produces.
struct Artifacts {
    std::vector<std::pair<std::string, std::uint64_t>> items;

    template <typename T>
    void add(const std::string& name, std::span<const T> data)
    {
        items.emplace_back(name, test::digest(data));
    }
    void add(const std::string& name, const DisplacementField& f) { add(name, f.data()); }
    void add(const std::string& name, const ScalarVolume& v) { add(name, v.data()); }
    void add(const std::string& name, const FeatureVolume& v) { add(name, v.data()); }
    void add(const std::string& name, const CostVolume& c) { add(name, c.costs()); }
    void add(const std::string& name, const std::string& s) { items.emplace_back(name, test::fnv1a(s.data(), s.size())); }
    void add(const std::string& name, double x) { items.emplace_back(name, test::fnv1a(&x, sizeof x)); }
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int face_distance(const Dims& d, int i, int j, int k)
{
    return std::min({i, j, k, d.x - 1 - i, d.y - 1 - j, d.z - 1 - k});
}

RegistrationConfig single_level(FeatureKind kind, double q, double l_max)
{
    RegistrationConfig cfg;
    cfg.feature = kind;
    const LevelParams defaults;
    cfg.levels = {{1, q, l_max, defaults.patch_radius, defaults.alpha}};
    return cfg;
}

// 1. Self-registration gives the zero field for every built-in descriptor.
Outcome self_registration(Artifacts& art)
{
    const auto t0 = Clock::now();
    int zero = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const ScalarVolume v = smooth_random_volume({48, 48, 48}, seed);
        for (FeatureKind kind : {FeatureKind::intensity, FeatureKind::edge, FeatureKind::ssc}) {
            RegistrationConfig cfg;
            cfg.feature = kind;
            const auto r = register_pair(v, v, cfg);
            ++total;
            zero += r.field.is_zero();
            art.add(fmt("c1/%llu/%s/field", (unsigned long long)seed, to_string(kind)), r.field);
            art.add(fmt("c1/%llu/%s/warped", (unsigned long long)seed, to_string(kind)), r.warped);
        }
    }
    const double secs = seconds_since(t0);
    return {zero == total && secs < 60.0, fmt("%d/%d zero fields, %.1f s (limit 60 s)", zero, total, secs)};
}

// 2. Integer translations |t|inf <= 4 recovered on the interior.
Outcome translation_recovery(Artifacts& art)
{
    const Dims d{32, 32, 32};
    const int l_max = 4;
    const int margin = l_max + LevelParams{}.patch_radius;
    bool ok = true;
    double worst_edge = 1.0;
    int exact_cases = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> u(-l_max, l_max);
        SynthParams p;
        p.kind = SynthKind::translation;
        p.dims = d;
        p.seed = seed;
        p.shift = {float(u(rng)), float(u(rng)), float(u(rng))};
        const auto c = make_synth_case(p);
        bool exact_here = true;
        for (FeatureKind kind : {FeatureKind::intensity, FeatureKind::edge, FeatureKind::ssc}) {
            const auto r = register_pair(c.fixed, c.moving, single_level(kind, 1, l_max));
            art.add(fmt("c2/%llu/%s", (unsigned long long)seed, to_string(kind)), r.field);
            std::size_t good = 0, total = 0;
            for (int k = 0; k < d.z; ++k)
                for (int j = 0; j < d.y; ++j)
                    for (int i = 0; i < d.x; ++i)
                        if (face_distance(d, i, j, k) > margin) {
                            ++total;
                            good += r.field(i, j, k) == p.shift;
                        }
            const double frac = double(good) / double(total);
            if (kind == FeatureKind::edge) {
                worst_edge = std::min(worst_edge, frac);
                ok = ok && frac >= 0.99;
            } else {
                exact_here = exact_here && good == total;
            }
        }
        exact_cases += exact_here;
        ok = ok && exact_here;
    }
    return {ok, fmt("intensity+ssc exact in %d/10 cases, edge worst %.4f (need >= 0.99)", exact_cases, worst_edge)};
}

// 3. DSV, aggregation and argmin against naive loops.
Outcome dsv_oracles(Artifacts& art)
{
    const Dims d{8, 8, 8};
    const auto set = build_displacement_set(1, 1);
    std::vector<std::array<double, 3>> disp;
    for (const Vec3& v : set.displacements())
        disp.push_back({v.x, v.y, v.z});
    double worst_dsv = 0.0, worst_agg = 0.0;
    int argmin_bad = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        std::mt19937_64 rng(1000 + trial);
        const int channels = 1 + int(trial % 2);
        const int r = 1 + int(trial % 2);
        const auto f = oracle::random_features(d, channels, rng);
        const auto m = oracle::random_features(d, channels, rng);
        const auto dsv = build_dsv(f, m, set);
        const auto ref = oracle::dsv(f, m, disp);
        const auto agg = aggregate_costs(dsv, r);
        std::vector<std::vector<float>> agg_maps;
        for (std::size_t l = 0; l < set.size(); ++l) {
            const std::vector<float> map(dsv.map(l).begin(), dsv.map(l).end());
            const auto box = oracle::box_sum(map, d, r);
            for (std::size_t v = 0; v < d.count(); ++v) {
                worst_dsv = std::max(worst_dsv, std::abs(dsv(v, l) - ref[l][v]));
                worst_agg = std::max(worst_agg, std::abs(agg(v, l) - box[v]));
            }
            agg_maps.emplace_back(agg.map(l).begin(), agg.map(l).end());
        }
        const auto field = winner_takes_all(agg, set);
        const auto want = oracle::argmin_labels(agg_maps, disp);
        for (std::size_t v = 0; v < d.count(); ++v)
            argmin_bad += !(field[v] == set[want[v]]);
        art.add(fmt("c3/%llu/dsv", (unsigned long long)trial), dsv);
        art.add(fmt("c3/%llu/agg", (unsigned long long)trial), agg);
        art.add(fmt("c3/%llu/wta", (unsigned long long)trial), field);
    }
    return {worst_dsv < 1e-5 && worst_agg < 1e-5 && argmin_bad == 0,
            fmt("100 trials: dsv max err %.2e, aggregate max err %.2e (limit 1e-5), argmin mismatches %d", worst_dsv,
                worst_agg, argmin_bad)};
}

// 4. Chunked execution equals the whole-volume path bit for bit.
Outcome chunked_equivalence(Artifacts& art)
{
    const Dims d{14, 13, 12};
    const std::size_t map_bytes = d.count() * sizeof(float);
    const auto set = build_displacement_set(1, 2);
    int same = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ScalarVolume fv = smooth_random_volume(d, seed, 1.5), mv = smooth_random_volume(d, seed + 100, 1.5);
        const auto f = seed % 2 ? ssc_features(fv) : as_feature(fv);
        const auto m = seed % 2 ? ssc_features(mv) : as_feature(mv);
        const CostFilter filter{int(seed % 3), seed % 4 ? 1.2 : 0.0};
        const auto ref = solve_unchunked(f, m, set, filter);
        art.add(fmt("c4/%llu/ref", (unsigned long long)seed), ref);
        for (std::size_t budget : {map_bytes, map_bytes * 17, map_bytes * set.size()}) {
            const auto out = chunked_dsv_execution(f, m, set, filter, budget);
            ++total;
            same += std::memcmp(out.data().data(), ref.data().data(), ref.data().size_bytes()) == 0;
            art.add(fmt("c4/%llu/%zu", (unsigned long long)seed, budget), out);
        }
    }
    return {same == total, fmt("%d/%d bit-identical (budgets of 1, 17 and 125 cost maps)", same, total)};
}

// 5. SSC is unchanged by positive affine intensity maps.
Outcome ssc_affine(Artifacts& art)
{
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ScalarVolume v = smooth_random_volume({16, 16, 16}, seed, 1.0);
        const auto base = ssc_features(v);
        art.add(fmt("c5/%llu", (unsigned long long)seed), base);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> la(std::log(0.25), std::log(4.0)), ub(-100.0, 100.0);
        for (int t = 0; t < 5; ++t) {
            const double a = std::exp(la(rng)), b = ub(rng);
            std::vector<float> w(v.data().begin(), v.data().end());
            for (float& x : w)
                x = static_cast<float>(a * x + b);
            const auto other = ssc_features(ScalarVolume(v.dims(), v.spacing(), w));
            for (std::size_t n = 0; n < base.data().size(); ++n)
                worst = std::max(worst, double(std::abs(base.data()[n] - other.data()[n])));
        }
    }
    return {worst < 1e-5, fmt("100 (volume, a, b) cases, max deviation %.2e (limit 1e-5)", worst)};
}

// 6. Jaccard formula and two-level aggregation.
Outcome jaccard_correctness(Artifacts& art)
{
    auto row = [](int n, int from, int to) {
        std::vector<std::int32_t> v(static_cast<std::size_t>(n), 0);
        for (int i = from; i < to; ++i)
            v[static_cast<std::size_t>(i)] = 1;
        return LabelVolume({n, 1, 1}, {1, 1, 1}, std::move(v));
    };
    const double same = *jaccard(row(20, 0, 10), row(20, 0, 10), 1);
    const double disjoint = *jaccard(row(20, 0, 10), row(20, 10, 20), 1);
    const double third = *jaccard(row(20, 0, 10), row(20, 5, 15), 1);
    const bool formula = same == 100.0 && disjoint == 0.0 && std::abs(third - 33.33) <= 0.01;

    const Dims d{48, 48, 48};
    std::vector<PairJc> pairs;
    std::vector<double> oracle_means;
    double worst = 0.0;
    std::size_t min_structures = 1000;
    for (std::uint64_t s = 1; s <= 6; ++s) {
        const auto fixed = blob_labels(d, 130, s, 2.0, 5.0);
        const auto moved = warp_labels(fixed, sinusoid_field(d, 2.0, 24.0, s + 50));
        const auto ref = oracle::jaccard_all(fixed, moved);
        double sum = 0.0;
        for (const auto& [l, jc] : ref)
            sum += jc;
        oracle_means.push_back(sum / double(ref.size()));
        PairJc p = mean_jc_pair(fixed, moved);
        p.id = fmt("pair%02llu", (unsigned long long)s);
        for (const auto& [l, jc] : ref)
            worst = std::max(worst, std::abs(p.per_structure.at(l) - jc));
        worst = std::max(worst, std::abs(p.mean - oracle_means.back()));
        min_structures = std::min(min_structures, p.structure_count());
        pairs.push_back(std::move(p));
    }
    double scalar = 0.0;
    for (double m : oracle_means)
        scalar += m;
    scalar /= double(oracle_means.size());
    const auto report = make_report(pairs);
    art.add("c6/report", report_json(report));
    art.add("c6/csv", report_csv(report));
    const double dataset_err = std::abs(report.dataset_mean - scalar);
    return {formula && worst < 1e-9 && dataset_err < 1e-9 && min_structures >= 100,
            fmt("formula %s (5/15 -> %.4f); 6 pairs, >= %zu structures each, max err %.1e, dataset mean %.4f vs %.4f",
                formula ? "ok" : "WRONG", third, min_structures, worst, report.dataset_mean, scalar)};
}

// 7. Registration improves label overlap on sinusoidal warps.
Outcome jc_improvement(Artifacts& art)
{
    int better = 0, by_ten = 0;
    std::ostringstream gains;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SynthParams p;
        p.kind = SynthKind::sinusoid;
        p.dims = {64, 64, 64};
        p.amplitude = 3.0;
        p.seed = seed;
        const auto c = make_synth_case(p);
        const auto r = register_pair(c.fixed, c.moving, RegistrationConfig{});
        const double pre = mean_jc_pair(c.fixed_labels, c.moving_labels).mean;
        const auto warped = warp_labels(c.moving_labels, r.field);
        const double post = mean_jc_pair(c.fixed_labels, warped).mean;
        better += post > pre;
        by_ten += post - pre >= 10.0;
        gains << (seed > 1 ? " " : "") << fmt("%+.1f", post - pre);
        art.add(fmt("c7/%llu/field", (unsigned long long)seed), r.field);
        art.add(fmt("c7/%llu/labels", (unsigned long long)seed), warped.data());
        art.add(fmt("c7/%llu/jc", (unsigned long long)seed), post);
    }
    return {better == 10 && by_ten >= 8,
            fmt("improved %d/10, by >= 10 points %d/10 (need 10 and 8); gains: %s", better, by_ten, gains.str().c_str())};
}

// 8. The pointwise winner never has higher energy than the zero field.
Outcome energy_descent(Artifacts& art)
{
    const Dims d{10, 10, 10};
    const auto set = build_displacement_set(1, 2);
    int ok = 0, equal = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const ScalarVolume fv = smooth_random_volume(d, seed, 1.5);
        // Every fifth instance registers a volume to itself, where zero is optimal.
        const ScalarVolume mv = seed % 5 == 0 ? fv : smooth_random_volume(d, seed + 500, 1.5);
        const auto f = seed % 2 ? ssc_features(fv) : as_feature(fv);
        const auto m = seed % 2 ? ssc_features(mv) : as_feature(mv);
        const auto u = winner_takes_all(build_dsv(f, m, set), set);
        const double eu = energy(f, m, u, 0.0);
        const double e0 = energy(f, m, DisplacementField(d), 0.0);
        ok += eu <= e0 && (eu == e0) == u.is_zero();
        equal += eu == e0;
        art.add(fmt("c8/%llu", (unsigned long long)seed), eu);
    }
    return {ok == 50, fmt("%d/50 instances descend, %d at equality (all with the zero winner)", ok, equal)};
}

// 9. Single-level 64^3, 729 labels, SSC.
Outcome performance(Artifacts& art)
{
    SynthParams p;
    p.dims = {64, 64, 64};
    p.seed = 1;
    const auto c = make_synth_case(p);
    const auto cfg = single_level(FeatureKind::ssc, 1, 4);
    const auto t0 = Clock::now();
    const auto r = register_pair(c.fixed, c.moving, cfg);
    const double secs = seconds_since(t0);
    art.add("c9/field", r.field);
    art.add("c9/warped", r.warped);
    return {secs < 120.0, fmt("%zu labels, %.1f s with %d thread(s) (limit 120 s)",
                              build_displacement_set(1, 4).size(), secs, thread_count())};
}

using Criterion = std::function<Outcome(Artifacts&)>;

const std::vector<std::pair<std::string, Criterion>>& criteria()
{
    static const std::vector<std::pair<std::string, Criterion>> all{
        {"self-registration", self_registration},
        {"translation recovery", translation_recovery},
        {"DSV brute-force equivalence", dsv_oracles},
        {"chunked equivalence", chunked_equivalence},
        {"SSC affine invariance", ssc_affine},
        {"Jaccard correctness", jaccard_correctness},
        {"end-to-end JC improvement", jc_improvement},
        {"energy descent", energy_descent},
        {"performance envelope", performance},
    };
    return all;
}

void report(int id, const std::string& name, const Outcome& o)
{
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): " << o.detail << std::endl;
}

std::uint64_t file_digest(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return test::fnv1a(bytes.data(), bytes.size());
}

/// Batch report and saved artifacts from the CLI with a given --jobs.
std::vector<std::uint64_t> batch_digests(const test::TempDir& tmp, int jobs)
{
    const auto manifest = tmp / "manifest.json";
    const auto out = tmp / "batch_out";
    std::filesystem::remove_all(out);
    std::ofstream(manifest)
        << R"({"output_dir": "batch_out",
              "config": {"levels": [{"factor": 2, "q": 1, "l_max": 2, "patch_radius": 1, "alpha": 1},
                                    {"factor": 1, "q": 1, "l_max": 1, "patch_radius": 1, "alpha": 1}]},
              "volumes": [{"id": "a", "image": "a_fixed", "labels": "a_fixed_labels"},
                          {"id": "b", "image": "b_fixed", "labels": "b_fixed_labels"},
                          {"id": "c", "image": "c_fixed", "labels": "c_fixed_labels"}]})";
    std::vector<std::uint64_t> digests;
    if (cli::run({"batch", manifest.string(), "--jobs", std::to_string(jobs), "--save-fields"}) != cli::ok)
        return digests;
    for (const char* f : {"report.json", "report.csv", "a__b_field.raw", "b__c_field.raw", "c__a_field.raw",
                          "a__c_warped_labels.raw"})
        digests.push_back(file_digest(out / f));
    return digests;
}

} // namespace

int main(int argc, char** argv)
{
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i)
        wanted.insert(std::atoi(argv[i]));
    const bool all = wanted.empty();
    const bool determinism = all || wanted.count(10);
    const int threads_before = thread_count();

    auto run_pass = [&](int threads, bool print, std::vector<Artifacts>& arts) {
        set_thread_count(threads);
        arts.assign(criteria().size(), {});
        std::vector<bool> pass;
        for (std::size_t c = 0; c < criteria().size(); ++c) {
            const int id = int(c) + 1;
            if (!all && !determinism && !wanted.count(id))
                continue;
            const Outcome o = criteria()[c].second(arts[c]);
            if (print && (all || wanted.count(id)))
                report(id, criteria()[c].first, o);
            pass.push_back(o.pass);
        }
        return std::all_of(pass.begin(), pass.end(), [](bool b) { return b; });
    };

    std::vector<Artifacts> first, second, wide;
    bool ok = run_pass(1, true, first);

    if (determinism) {
        run_pass(1, false, second);
        run_pass(4, false, wide);
        std::size_t items = 0, repeat_diff = 0, thread_diff = 0;
        for (std::size_t c = 0; c < first.size(); ++c) {
            items += first[c].items.size();
            repeat_diff += first[c].items != second[c].items;
            thread_diff += first[c].items != wide[c].items;
        }

        set_thread_count(1);
        test::TempDir tmp;
        const char* names[] = {"a", "b", "c"};
        for (std::uint64_t s = 0; s < 3; ++s) {
            SynthParams p;
            p.kind = SynthKind::blobs;
            p.dims = {24, 24, 24};
            p.seed = 40 + s;
            p.blob_count = 6;
            write_synth_case(make_synth_case(p), p, tmp / names[s]);
        }
        const auto b1 = batch_digests(tmp, 1), b4 = batch_digests(tmp, 4), b1again = batch_digests(tmp, 1);
        const bool batch_ok = !b1.empty() && b1 == b4 && b1 == b1again;

        const Outcome o{repeat_diff == 0 && thread_diff == 0 && batch_ok,
                        fmt("%zu artifact digests: %zu criteria differ between runs, %zu between 1 and 4 threads; "
                            "batch --jobs 1 vs 4 %s",
                            items, repeat_diff, thread_diff, batch_ok ? "identical" : "DIFFERENT")};
        report(10, "determinism", o);
        ok = ok && o.pass;
    }
    set_thread_count(threads_before);
    std::cout << (ok ? "ALL PASS" : "SOME CRITERIA FAILED") << std::endl;
    return ok ? 0 : 1;
}
