#ifndef STRUCTOSCOPE_CONFIG_HPP
#define STRUCTOSCOPE_CONFIG_HPP

#include "structoscope/convergence.hpp"
#include "structoscope/features.hpp"
#include "structoscope/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace structoscope {

enum class SegmentationMode { automatic, none, markers, bayesian_blocks };

struct SegmentationConfig {
    SegmentationMode mode = SegmentationMode::automatic;
    std::string marker_pattern;
    int min_tokens = 1;
    double p0 = 0.05;
    std::optional<double> ncp_prior;
    bool iqr = true;
    double iqr_multiplier = 1.5;
};

struct ClusterConfig {
    int k = 5;
    int n_init = 10;
    int max_iter = 300;
    double tol = 1e-6;
    std::optional<std::uint64_t> seed;
};

struct GroupingConfig {
    int n_bins = 10;
    std::optional<std::vector<int>> high;
    std::optional<std::vector<int>> low;
};

struct OrderConfig {
    int medoids = 1;
    std::string aggregation = "mean";
    bool normalize = false;
    bool use_rle = true;
    std::int64_t max_group_size = 2000;
    std::optional<std::uint64_t> seed;
};

struct PositionConfig {
    std::optional<int> from;
    std::optional<int> to;
    std::int64_t grid = 512;
    int bootstrap = 20;
    std::int64_t histogram_bins = 20;
    std::optional<std::uint64_t> seed;
};

struct SynthConfig {
    RegimeSpec spec;
    std::string mode = "tokens"; // tokens | sequences
    std::optional<std::uint64_t> seed;
};

/// Everything a run needs. Relative paths are resolved against the
/// directory of the config file (or the working directory without one).
struct RunConfig {
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::filesystem::path output = "structoscope-out";

    std::optional<std::filesystem::path> corpus_path;
    std::string corpus_format = "jsonl"; // jsonl | conllu_dir | subtitle_jsonl | sequences

    std::optional<std::filesystem::path> stopwords;
    std::optional<std::filesystem::path> affect;

    SegmentationConfig segmentation;
    FamilyWeights weights;
    ClusterConfig cluster;
    GroupingConfig grouping;
    OrderConfig order;
    PositionConfig position;
    Thresholds thresholds;
    SynthConfig synth;

    std::optional<std::pair<std::string, std::string>> slice;
};

struct Seeds {
    std::uint64_t run = 0;
    std::uint64_t cluster = 0;
    std::uint64_t order = 0;
    std::uint64_t position = 0;
    std::uint64_t synth = 0;
};

/// Parses a TOML config. Unknown keys and type mismatches are collected
/// and reported together in one ValidationError.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir);

/// STRUCTOSCOPE_SEED replaces the run seed and drops per-stage seeds so
/// every stream derives from it.
void apply_seed_env(RunConfig& config);

/// Aggregated validation for `command`; throws ValidationError listing all
/// problems.
void validate_config(const RunConfig& config, std::string_view command);

/// Per-stage seeds; stage seeds not given explicitly derive from the run seed.
Seeds resolve_seeds(const RunConfig& config);

/// Canonical JSON of the settings that affect results (thread count and
/// output location excluded), and its SHA-256.
std::string canonical_config(const RunConfig& config);
std::string config_hash(const RunConfig& config);

std::optional<SegmentationMode> parse_segmentation_mode(std::string_view name);
std::string_view to_string(SegmentationMode mode);

} // namespace structoscope

#endif
