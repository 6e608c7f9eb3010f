#ifndef STRUCTOSCOPE_SEGMENTATION_HPP
#define STRUCTOSCOPE_SEGMENTATION_HPP

#include "structoscope/corpus.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace structoscope {

/// A line is a boundary marker when `pattern` (ECMAScript regex) matches
/// anywhere in it; anchor with ^ for heading prefixes. Marker lines are
/// removed from segment text.
struct MarkerRule {
    std::string pattern;
    int min_tokens = 1;
};

struct ChangePointResult {
    std::vector<double> edges; // ascending; front = min t, back = max t
    int n_blocks = 1;
    double objective = 0.0;    // penalized fitness of the optimal partition
    double ncp_prior = 0.0;
};

/// Splits raw text at marker lines. Segments shorter than rule.min_tokens
/// are merged into the preceding segment (into the following one when there
/// is no predecessor). Text without markers yields a single segment.
std::vector<Segment> segment_by_markers(const std::string& raw_text, const MarkerRule& rule);

struct BayesianBlocksOptions {
    double p0 = 0.05;
    /// Overrides the p0-derived prior when set.
    std::optional<double> ncp_prior;
};

/// Prior on the number of change points for event data.
double event_ncp_prior(std::size_t n_events, double p0);

/// Optimal event-data Bayesian Blocks partition (O(n^2) dynamic program).
/// Duplicate timestamps are spread by 1 microsecond per repeat.
/// Throws ValidationError on empty or non-ascending input.
ChangePointResult bayesian_blocks(std::span<const double> timestamps,
                                  const BayesianBlocksOptions& options = {});

/// Block fitness N * ln(N / T).
double block_fitness(double n_events, double duration);

/// Timestamps after the duplicate jitter is applied.
std::vector<double> jitter_duplicates(std::span<const double> timestamps);

/// Concatenates cues whose time_start falls into the same block. Empty blocks
/// are dropped and the remaining segments re-indexed from 0.
std::vector<Segment> regroup_cues(std::span<const Segment> cues, const ChangePointResult& result);

} // namespace structoscope

#endif
