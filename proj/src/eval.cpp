#include "discreg/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

namespace discreg {

namespace {

void require_same_dims(const LabelVolume& a, const LabelVolume& b)
{
    if (!(a.dims() == b.dims()))
        throw Error(ErrorKind::dim_mismatch, "label volumes differ in size: " + to_string(a.dims()) + " vs "
                                                 + to_string(b.dims()));
}

struct Overlap {
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t both = 0;
};

std::optional<double> jc_from(const Overlap& o)
{
    const std::size_t uni = o.a + o.b - o.both;
    if (uni == 0)
        return std::nullopt;
    return 100.0 * static_cast<double>(o.both) / static_cast<double>(uni);
}

} // namespace

std::optional<double> jaccard(const LabelVolume& a, const LabelVolume& b, std::int32_t label)
{
    require_same_dims(a, b);
    Overlap o;
    for (std::size_t n = 0; n < a.data().size(); ++n) {
        const bool in_a = a[n] == label;
        const bool in_b = b[n] == label;
        o.a += in_a;
        o.b += in_b;
        o.both += in_a && in_b;
    }
    return jc_from(o);
}

std::vector<std::int32_t> default_label_list(const LabelVolume& a, const LabelVolume& b)
{
    std::set<std::int32_t> s(a.data().begin(), a.data().end());
    s.insert(b.data().begin(), b.data().end());
    s.erase(0);
    return {s.begin(), s.end()};
}

PairJc mean_jc_pair(const LabelVolume& fixed_labels, const LabelVolume& warped_labels, std::span<const std::int32_t> labels)
{
    require_same_dims(fixed_labels, warped_labels);
    std::unordered_map<std::int32_t, Overlap> counts;
    for (std::int32_t l : labels)
        counts.emplace(l, Overlap{});
    for (std::size_t n = 0; n < fixed_labels.data().size(); ++n) {
        const std::int32_t la = fixed_labels[n];
        const std::int32_t lb = warped_labels[n];
        if (auto it = counts.find(la); it != counts.end()) {
            ++it->second.a;
            if (la == lb)
                ++it->second.both;
        }
        if (auto it = counts.find(lb); it != counts.end())
            ++it->second.b;
    }

    PairJc pair;
    for (std::int32_t l : labels) {
        if (auto jc = jc_from(counts.at(l)))
            pair.per_structure[l] = *jc;
    }
    if (pair.per_structure.empty())
        throw Error(ErrorKind::degenerate, "no structure of the label list is present in either volume");
    double sum = 0.0;
    for (const auto& [label, jc] : pair.per_structure)
        sum += jc;
    pair.mean = sum / static_cast<double>(pair.per_structure.size());
    return pair;
}

PairJc mean_jc_pair(const LabelVolume& fixed_labels, const LabelVolume& warped_labels)
{
    const auto labels = default_label_list(fixed_labels, warped_labels);
    return mean_jc_pair(fixed_labels, warped_labels, labels);
}

double mean_jc_dataset(std::span<const double> pair_means)
{
    if (pair_means.empty())
        throw Error(ErrorKind::degenerate, "dataset mean of an empty pair list");
    double sum = 0.0;
    for (double m : pair_means)
        sum += m;
    return sum / static_cast<double>(pair_means.size());
}

JcReport make_report(std::vector<PairJc> pairs, std::vector<FailedPair> failed)
{
    std::stable_sort(pairs.begin(), pairs.end(), [](const PairJc& a, const PairJc& b) { return a.id < b.id; });
    std::stable_sort(failed.begin(), failed.end(), [](const FailedPair& a, const FailedPair& b) { return a.id < b.id; });
    JcReport r;
    r.pairs = std::move(pairs);
    r.failed = std::move(failed);
    std::vector<double> means;
    for (const auto& p : r.pairs)
        means.push_back(p.mean);
    r.dataset_mean = mean_jc_dataset(means);
    return r;
}

std::string report_json(const JcReport& report)
{
    nlohmann::ordered_json j;
    j["schema"] = JcReport::schema;
    j["N_policy"] = "skip-empty";
    j["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : report.pairs) {
        nlohmann::ordered_json per;
        for (const auto& [label, jc] : p.per_structure)
            per[std::to_string(label)] = jc;
        nlohmann::ordered_json e;
        e["id"] = p.id;
        e["fixed"] = p.fixed;
        e["moving"] = p.moving;
        e["per_structure"] = per;
        e["N"] = p.structure_count();
        e["mean"] = p.mean;
        j["pairs"].push_back(e);
    }
    j["M"] = report.pair_count();
    j["dataset_mean"] = report.dataset_mean;
    if (!report.failed.empty()) {
        j["failed"] = nlohmann::ordered_json::array();
        for (const auto& f : report.failed)
            j["failed"].push_back({{"id", f.id}, {"reason", f.reason}});
    }
    return j.dump(2);
}

std::string report_csv(const JcReport& report)
{
    std::ostringstream out;
    out << std::setprecision(17);
    out << "schema,pair,fixed,moving,label,jc\n";
    for (const auto& p : report.pairs) {
        for (const auto& [label, jc] : p.per_structure)
            out << JcReport::schema << ',' << p.id << ',' << p.fixed << ',' << p.moving << ',' << label << ',' << jc << '\n';
        out << JcReport::schema << ',' << p.id << ',' << p.fixed << ',' << p.moving << ",mean," << p.mean << '\n';
    }
    out << JcReport::schema << ",*,*,*,dataset_mean," << report.dataset_mean << '\n';
    return out.str();
}

void write_report(const JcReport& report, const std::filesystem::path& base_in)
{
    std::filesystem::path base = base_in;
    if (base.extension() == ".json" || base.extension() == ".csv")
        base.replace_extension();
    auto write = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::trunc);
        if (!out)
            throw Error(ErrorKind::io, "cannot write " + p.string());
        out << text;
        if (!out)
            throw Error(ErrorKind::io, "short write to " + p.string());
    };
    std::filesystem::path json_path = base, csv_path = base;
    json_path += ".json";
    csv_path += ".csv";
    write(json_path, report_json(report) + "\n");
    write(csv_path, report_csv(report));
}

LabelVolume crop(const LabelVolume& labels, int margin)
{
    const Dims& d = labels.dims();
    const Dims out_dims{d.x - 2 * margin, d.y - 2 * margin, d.z - 2 * margin};
    if (margin < 0 || out_dims.x < 1 || out_dims.y < 1 || out_dims.z < 1)
        throw Error(ErrorKind::invalid_argument, "crop margin " + std::to_string(margin) + " too large for " + to_string(d));
    std::vector<std::int32_t> out(out_dims.count());
    for (int k = 0; k < out_dims.z; ++k)
        for (int j = 0; j < out_dims.y; ++j)
            for (int i = 0; i < out_dims.x; ++i)
                out[out_dims.index(i, j, k)] = labels(i + margin, j + margin, k + margin);
    return LabelVolume(out_dims, labels.spacing(), std::move(out), labels.dtype());
}

} // namespace discreg
