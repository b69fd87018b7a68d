#pragma once

#include "discreg/pipeline.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace discreg::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
enum ExitCode : int { ok = 0, failure = 1, usage = 2 };

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args);

struct BatchPair {
    std::string id;
    std::filesystem::path fixed;
    std::filesystem::path moving;
    std::filesystem::path fixed_labels;
    std::filesystem::path moving_labels;
};

struct BatchManifest {
    std::vector<BatchPair> pairs;
    RegistrationConfig config;
    std::filesystem::path output_dir;
};

/// Explicit "pairs", or "volumes" expanded to ordered pairs (N*(N-1), or N^2
/// with self-pairs). Relative paths resolve against the manifest directory.
/// `include_self` overrides the manifest's "include_self_pairs" when set.
BatchManifest load_manifest(const std::filesystem::path& path, std::optional<bool> include_self = std::nullopt);

} // namespace discreg::cli
