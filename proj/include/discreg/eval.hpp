#pragma once

#include "discreg/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace discreg {

/// 100*|A∩B|/|A∪B| over the masks of `label`; nullopt when the label is
/// absent from both volumes (the structure is skipped, not scored).
std::optional<double> jaccard(const LabelVolume& a, const LabelVolume& b, std::int32_t label);

/// Sorted non-background labels present in either volume.
std::vector<std::int32_t> default_label_list(const LabelVolume& a, const LabelVolume& b);

struct PairJc {
    std::string id;
    std::string fixed;
    std::string moving;
    std::map<std::int32_t, double> per_structure; ///< scored structures only
    double mean = 0.0;

    std::size_t structure_count() const { return per_structure.size(); }
};

/// Mean JC over the labels of `labels` that are present in at least one of
/// the two volumes. Throws Error(degenerate) when none remain.
PairJc mean_jc_pair(const LabelVolume& fixed_labels, const LabelVolume& warped_labels,
                    std::span<const std::int32_t> labels);
PairJc mean_jc_pair(const LabelVolume& fixed_labels, const LabelVolume& warped_labels);

/// Mean of per-pair means; never a pooled voxel-level mean.
double mean_jc_dataset(std::span<const double> pair_means);

struct FailedPair {
    std::string id;
    std::string reason;
};

struct JcReport {
    static constexpr int schema = 1;

    std::vector<PairJc> pairs; ///< sorted by pair id
    std::vector<FailedPair> failed;
    double dataset_mean = 0.0;

    std::size_t pair_count() const { return pairs.size(); }
};

/// Sorts the pairs by id and computes the dataset mean from the pair means.
JcReport make_report(std::vector<PairJc> pairs, std::vector<FailedPair> failed = {});

std::string report_json(const JcReport& report);
std::string report_csv(const JcReport& report);

/// Writes `<base>.json` and `<base>.csv` (a trailing .json/.csv on `base` is dropped).
void write_report(const JcReport& report, const std::filesystem::path& base);

/// Interior crop, `margin` voxels removed from every face.
LabelVolume crop(const LabelVolume& labels, int margin);

} // namespace discreg
