#include "cli.hpp"

#include "discreg/config_json.hpp"
#include "discreg/eval.hpp"
#include "discreg/features.hpp"
#include "discreg/parallel.hpp"
#include "discreg/resample.hpp"
#include "discreg/synth.hpp"
#include "discreg/volume_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace discreg::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Dims parse_dims(const std::string& s)
{
    std::string t = s;
    std::replace(t.begin(), t.end(), 'x', ',');
    std::vector<int> v;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            v.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw UsageError("bad dims '" + s + "'");
        }
    }
    if (v.size() == 1)
        return {v[0], v[0], v[0]};
    if (v.size() == 3)
        return {v[0], v[1], v[2]};
    throw UsageError("dims must be N or X,Y,Z, got '" + s + "'");
}

Vec3 parse_vec3(const std::string& s)
{
    std::vector<float> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            v.push_back(std::stof(item));
        } catch (const std::exception&) {
            throw UsageError("bad vector '" + s + "'");
        }
    }
    if (v.size() != 3)
        throw UsageError("vector must be X,Y,Z, got '" + s + "'");
    return {v[0], v[1], v[2]};
}

std::string stem_of(const fs::path& p)
{
    fs::path base = p;
    if (base.extension() == ".raw" || base.extension() == ".json")
        base.replace_extension();
    return base.filename().string();
}

// --- register ---

struct RegisterArgs {
    std::string fixed, moving, config, out_field, out_warped;
    std::string feature, external_fixed, external_moving, standardize, reference;
    std::optional<double> q, lmax, alpha;
    std::optional<int> patch_radius;
    std::optional<std::size_t> memory_budget_mb;
    bool single_level = false;
    bool zscore = false;
    int jobs = 0;
};

void add_register_options(CLI::App* cmd, RegisterArgs& a)
{
    cmd->add_option("--fixed", a.fixed, "fixed image")->required();
    cmd->add_option("--moving", a.moving, "moving image")->required();
    cmd->add_option("--config", a.config, "registration config (JSON)");
    cmd->add_option("--out-field", a.out_field, "output displacement field")->required();
    cmd->add_option("--out-warped", a.out_warped, "output warped moving image")->required();
    cmd->add_option("--feature", a.feature, "intensity|edge|ssc|external")
        ->check(CLI::IsMember({"intensity", "edge", "ssc", "external"}));
    cmd->add_option("--q", a.q, "quantization step (voxels), every level");
    cmd->add_option("--lmax", a.lmax, "maximum displacement (voxels), every level");
    cmd->add_option("--alpha", a.alpha, "regularization weight, every level");
    cmd->add_option("--patch-radius", a.patch_radius, "cost aggregation half-width, every level");
    cmd->add_option("--memory-budget", a.memory_budget_mb, "cost volume budget in MB (default $REG_MEMORY_BUDGET_MB or 1024)");
    cmd->add_flag("--single-level", a.single_level, "one full-resolution level only");
    cmd->add_option("--external-fixed", a.external_fixed, "learned features of the fixed image");
    cmd->add_option("--external-moving", a.external_moving, "learned features of the moving image");
    cmd->add_flag("--zscore", a.zscore, "z-score each external feature channel");
    cmd->add_option("--standardize", a.standardize, "none|pair|reference")
        ->check(CLI::IsMember({"none", "pair", "reference"}));
    cmd->add_option("--reference", a.reference, "reference volume for --standardize reference");
    cmd->add_option("--jobs", a.jobs, "worker threads (0 = all cores)");
}

RegistrationConfig build_config(const RegisterArgs& a)
{
    RegistrationConfig cfg = a.config.empty() ? RegistrationConfig{} : load_config(a.config);
    if (!a.feature.empty())
        cfg.feature = feature_kind_from_string(a.feature);
    if (a.single_level) {
        LevelParams finest = cfg.levels.back();
        finest.factor = 1;
        cfg.levels = {finest};
    }
    for (LevelParams& l : cfg.levels) {
        if (a.q) l.q = *a.q;
        if (a.lmax) l.l_max = *a.lmax;
        if (a.alpha) l.alpha = *a.alpha;
        if (a.patch_radius) l.patch_radius = *a.patch_radius;
    }
    if (a.memory_budget_mb)
        cfg.memory_budget_bytes = *a.memory_budget_mb * 1024 * 1024;
    if (!a.external_fixed.empty())
        cfg.external_fixed = a.external_fixed;
    if (!a.external_moving.empty())
        cfg.external_moving = a.external_moving;
    if (a.zscore)
        cfg.external_zscore = true;
    if (!a.standardize.empty())
        cfg.standardize = standardize_mode_from_string(a.standardize);
    if (!a.reference.empty())
        cfg.standardize_reference = a.reference;
    cfg.validate();
    return cfg;
}

int cmd_register(const RegisterArgs& a)
{
    if (a.jobs > 0)
        set_thread_count(a.jobs);
    const RegistrationConfig cfg = build_config(a);
    const ScalarVolume fixed = load_scalar(a.fixed);
    const ScalarVolume moving = load_scalar(a.moving);
    const RegistrationResult r = register_pair(fixed, moving, cfg);
    save_volume(r.field, a.out_field);
    save_volume(r.warped, a.out_warped);
    return ok;
}

// --- features ---

struct FeaturesArgs {
    std::string in, descriptor, out;
    double p_low = 0.0, p_high = 100.0;
    int patch_radius = 1;
    double noise_floor = 1e-6;
    bool zscore = false;
};

int cmd_features(const FeaturesArgs& a)
{
    const FeatureKind kind = feature_kind_from_string(a.descriptor);
    FeatureVolume f;
    switch (kind) {
    case FeatureKind::intensity: {
        auto n = normalize_intensity(load_scalar(a.in), a.p_low, a.p_high);
        if (n.degenerate)
            std::cerr << "discreg features: warning: zero percentile spread, output is constant 0.5\n";
        f = std::move(n.features);
        break;
    }
    case FeatureKind::edge: f = edge_features(load_scalar(a.in)); break;
    case FeatureKind::ssc: f = ssc_features(load_scalar(a.in), SscParams{a.patch_radius, a.noise_floor}); break;
    case FeatureKind::external: f = load_external_features(a.in, a.zscore); break;
    }
    save_volume(f, a.out);
    return ok;
}

// --- evaluate ---

struct EvaluateArgs {
    std::string fixed_labels, warped_labels, moving_labels, field, out_report;
    std::vector<int> labels;
    int crop_margin = 0;
};

int cmd_evaluate(const EvaluateArgs& a)
{
    if (a.warped_labels.empty() == a.moving_labels.empty())
        throw UsageError("give either --warped-labels or --moving-labels with --field");
    if (!a.moving_labels.empty() && a.field.empty())
        throw UsageError("--moving-labels needs --field");

    LabelVolume fixed = load_labels(a.fixed_labels);
    LabelVolume warped = a.warped_labels.empty() ? warp_labels(load_labels(a.moving_labels), load_field(a.field))
                                                 : load_labels(a.warped_labels);
    if (a.crop_margin > 0) {
        fixed = crop(fixed, a.crop_margin);
        warped = crop(warped, a.crop_margin);
    }
    PairJc pair;
    if (a.labels.empty()) {
        pair = mean_jc_pair(fixed, warped);
    } else {
        std::vector<std::int32_t> labels(a.labels.begin(), a.labels.end());
        pair = mean_jc_pair(fixed, warped, labels);
    }
    pair.fixed = stem_of(a.fixed_labels);
    pair.moving = stem_of(a.warped_labels.empty() ? a.moving_labels : a.warped_labels);
    pair.id = pair.fixed + "__" + pair.moving;
    write_report(make_report({pair}), a.out_report);
    return ok;
}

// --- batch ---

struct BatchArgs {
    std::string manifest;
    int jobs = 1;
    bool include_self = false;
    bool exclude_self = false;
    bool save_fields = false;
};

int cmd_batch(const BatchArgs& a)
{
    std::optional<bool> self;
    if (a.include_self)
        self = true;
    if (a.exclude_self)
        self = false;
    const BatchManifest m = load_manifest(a.manifest, self);
    fs::create_directories(m.output_dir);

    std::vector<std::optional<PairJc>> results(m.pairs.size());
    std::vector<std::string> errors(m.pairs.size());

    auto run_pair = [&](std::size_t i) {
        const BatchPair& p = m.pairs[i];
        try {
            const ScalarVolume fixed = load_scalar(p.fixed);
            const ScalarVolume moving = load_scalar(p.moving);
            const LabelVolume fixed_labels = load_labels(p.fixed_labels);
            const LabelVolume moving_labels = load_labels(p.moving_labels);
            const RegistrationResult r = register_pair(fixed, moving, m.config);
            const LabelVolume warped = warp_labels(moving_labels, r.field);
            PairJc jc = mean_jc_pair(fixed_labels, warped);
            jc.id = p.id;
            jc.fixed = stem_of(p.fixed);
            jc.moving = stem_of(p.moving);
            if (a.save_fields) {
                save_volume(r.field, m.output_dir / (p.id + "_field"));
                save_volume(warped, m.output_dir / (p.id + "_warped_labels"));
            }
            results[i] = std::move(jc);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };

    const int jobs = std::max(1, a.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < m.pairs.size(); ++i)
            run_pair(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (int w = 0; w < jobs; ++w) {
            pool.emplace_back([&] {
                set_thread_count(1);
                for (std::size_t i = next++; i < m.pairs.size(); i = next++)
                    run_pair(i);
            });
        }
    }

    std::vector<PairJc> done;
    std::vector<FailedPair> failed;
    for (std::size_t i = 0; i < m.pairs.size(); ++i) {
        if (results[i]) {
            done.push_back(std::move(*results[i]));
        } else {
            std::cerr << "discreg batch: warning: pair " << m.pairs[i].id << " skipped: " << errors[i] << '\n';
            failed.push_back({m.pairs[i].id, errors[i]});
        }
    }
    if (done.empty())
        throw Error(ErrorKind::degenerate, "no pair of the manifest could be registered");
    write_report(make_report(std::move(done), std::move(failed)), m.output_dir / "report");
    return ok;
}

// --- synth ---

struct SynthArgs {
    std::string kind = "sinusoid", dims = "64", out_prefix, shift = "2,0,0";
    std::uint64_t seed = 1;
    double amplitude = 3.0, period = 32.0, noise_sigma = 2.0;
    int blobs = 12;
};

int cmd_synth(const SynthArgs& a)
{
    SynthParams p;
    p.kind = synth_kind_from_string(a.kind);
    p.dims = parse_dims(a.dims);
    if (p.dims.x < 1 || p.dims.y < 1 || p.dims.z < 1)
        throw UsageError("dims must be positive");
    p.seed = a.seed;
    p.shift = parse_vec3(a.shift);
    p.amplitude = a.amplitude;
    p.period = a.period;
    p.blob_count = a.blobs;
    p.noise_sigma = a.noise_sigma;
    const fs::path prefix(a.out_prefix);
    if (prefix.has_parent_path())
        fs::create_directories(prefix.parent_path());
    write_synth_case(make_synth_case(p), p, prefix);
    return ok;
}

fs::path resolve(const fs::path& base, const std::string& p)
{
    fs::path path(p);
    return path.is_relative() ? base / path : path;
}

bool volume_exists(const fs::path& p)
{
    const auto paths = volume_paths(p);
    return fs::exists(paths.header) && fs::exists(paths.payload);
}

} // namespace

BatchManifest load_manifest(const fs::path& path, std::optional<bool> include_self)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::missing_file, "cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, path.string() + ": " + e.what());
    }
    const fs::path base = path.parent_path();
    BatchManifest m;
    try {
        if (j.contains("config")) {
            const auto& c = j.at("config");
            m.config = c.is_string() ? load_config(resolve(base, c.get<std::string>())) : config_from_json(c, base);
        }
        m.output_dir = resolve(base, j.value("output_dir", std::string("batch_out")));

        if (j.contains("pairs")) {
            for (const auto& p : j.at("pairs")) {
                BatchPair bp{p.at("id").get<std::string>(), resolve(base, p.at("fixed").get<std::string>()),
                             resolve(base, p.at("moving").get<std::string>()),
                             resolve(base, p.at("fixed_labels").get<std::string>()),
                             resolve(base, p.at("moving_labels").get<std::string>())};
                m.pairs.push_back(std::move(bp));
            }
        } else if (j.contains("volumes")) {
            struct Entry {
                std::string id;
                fs::path image, labels;
            };
            std::vector<Entry> vols;
            for (const auto& v : j.at("volumes"))
                vols.push_back({v.at("id").get<std::string>(), resolve(base, v.at("image").get<std::string>()),
                                resolve(base, v.at("labels").get<std::string>())});
            const bool self = include_self.value_or(j.value("include_self_pairs", false));
            for (const auto& f : vols)
                for (const auto& mv : vols) {
                    if (!self && f.id == mv.id)
                        continue;
                    m.pairs.push_back({f.id + "__" + mv.id, f.image, mv.image, f.labels, mv.labels});
                }
        } else {
            throw Error(ErrorKind::config, "manifest needs \"pairs\" or \"volumes\"");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, path.string() + ": " + e.what());
    }

    std::set<std::string> ids;
    for (const auto& p : m.pairs) {
        if (!ids.insert(p.id).second)
            throw Error(ErrorKind::config, path.string() + ": duplicate pair id '" + p.id + "'");
        for (const fs::path& f : {p.fixed, p.moving, p.fixed_labels, p.moving_labels}) {
            if (!volume_exists(f))
                std::cerr << "discreg batch: warning: pair " << p.id << " references missing volume " << f.string() << '\n';
        }
    }
    return m;
}

int run(const std::vector<std::string>& args)
{
    CLI::App app{"Discrete displacement-space deformable registration with pluggable features"};
    app.name("discreg");
    app.require_subcommand(1);

    RegisterArgs reg;
    auto* reg_cmd = app.add_subcommand("register", "register a moving image to a fixed image");
    add_register_options(reg_cmd, reg);

    FeaturesArgs feat;
    auto* feat_cmd = app.add_subcommand("features", "compute a per-voxel feature volume");
    feat_cmd->add_option("--in", feat.in, "input volume")->required();
    feat_cmd->add_option("--descriptor", feat.descriptor, "intensity|edge|ssc|external")
        ->required()
        ->check(CLI::IsMember({"intensity", "edge", "ssc", "external"}));
    feat_cmd->add_option("--out", feat.out, "output feature volume")->required();
    feat_cmd->add_option("--p-low", feat.p_low, "intensity: lower percentile");
    feat_cmd->add_option("--p-high", feat.p_high, "intensity: upper percentile");
    feat_cmd->add_option("--patch-radius", feat.patch_radius, "ssc: patch half-width");
    feat_cmd->add_option("--noise-floor", feat.noise_floor, "ssc: floor of the mean patch distance");
    feat_cmd->add_flag("--zscore", feat.zscore, "external: z-score each channel");

    EvaluateArgs ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "Jaccard overlap report for one pair");
    ev_cmd->add_option("--fixed-labels", ev.fixed_labels, "fixed segmentation")->required();
    auto* warped_opt = ev_cmd->add_option("--warped-labels", ev.warped_labels, "already warped moving segmentation");
    auto* moving_opt = ev_cmd->add_option("--moving-labels", ev.moving_labels, "moving segmentation (warped by --field)");
    auto* field_opt = ev_cmd->add_option("--field", ev.field, "displacement field");
    warped_opt->excludes(moving_opt)->excludes(field_opt);
    moving_opt->needs(field_opt);
    ev_cmd->add_option("--out-report", ev.out_report, "report path (writes .json and .csv)")->required();
    ev_cmd->add_option("--labels", ev.labels, "structures to score (default: all non-zero)")->delimiter(',');
    ev_cmd->add_option("--crop", ev.crop_margin, "ignore this many voxels at every face");

    BatchArgs batch;
    auto* batch_cmd = app.add_subcommand("batch", "register and evaluate every pair of a manifest");
    batch_cmd->add_option("manifest", batch.manifest, "manifest JSON")->required();
    batch_cmd->add_option("--jobs", batch.jobs, "pairs registered concurrently");
    auto* inc = batch_cmd->add_flag("--include-self", batch.include_self, "volumes mode: also register each volume to itself (N^2 pairs)");
    batch_cmd->add_flag("--exclude-self", batch.exclude_self, "volumes mode: ordered pairs without self-pairs (default)")->excludes(inc);
    batch_cmd->add_flag("--save-fields", batch.save_fields, "write each pair's field and warped labels");

    SynthArgs syn;
    auto* syn_cmd = app.add_subcommand("synth", "generate a seeded synthetic registration case");
    syn_cmd->add_option("--kind", syn.kind, "translation|sinusoid|blobs")
        ->check(CLI::IsMember({"translation", "sinusoid", "blobs"}));
    syn_cmd->add_option("--dims", syn.dims, "N or X,Y,Z");
    syn_cmd->add_option("--seed", syn.seed, "random seed");
    syn_cmd->add_option("--out-prefix", syn.out_prefix, "output path prefix")->required();
    syn_cmd->add_option("--shift", syn.shift, "translation: integer shift X,Y,Z");
    syn_cmd->add_option("--amplitude", syn.amplitude, "sinusoid: amplitude in voxels");
    syn_cmd->add_option("--period", syn.period, "sinusoid: period in voxels");
    syn_cmd->add_option("--blobs", syn.blobs, "number of labelled structures");
    syn_cmd->add_option("--noise-sigma", syn.noise_sigma, "smoothing of the random texture");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        std::cerr << "discreg: usage error: " << e.what() << "\n" << "run 'discreg --help' for usage\n";
        return usage;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (*reg_cmd)
            return cmd_register(reg);
        if (*feat_cmd)
            return cmd_features(feat);
        if (*ev_cmd)
            return cmd_evaluate(ev);
        if (*batch_cmd)
            return cmd_batch(batch);
        if (*syn_cmd)
            return cmd_synth(syn);
    } catch (const UsageError& e) {
        std::cerr << "discreg " << name << ": usage error: " << e.what() << '\n';
        return usage;
    } catch (const Error& e) {
        std::cerr << "discreg " << name << ": " << to_string(e.kind()) << ": " << e.what() << '\n';
        return failure;
    } catch (const std::exception& e) {
        std::cerr << "discreg " << name << ": " << e.what() << '\n';
        return failure;
    }
    return usage;
}

} // namespace discreg::cli
