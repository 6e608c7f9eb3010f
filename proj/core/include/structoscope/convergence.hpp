#ifndef STRUCTOSCOPE_CONVERGENCE_HPP
#define STRUCTOSCOPE_CONVERGENCE_HPP

#include "structoscope/sequence.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace structoscope {

// ---- Transition order ------------------------------------------------------

enum class Aggregation { mean, min };

std::optional<Aggregation> parse_aggregation(std::string_view name);
std::string_view to_string(Aggregation a);

struct OrderOptions {
    int medoids = 1;
    Aggregation aggregation = Aggregation::mean;
    bool normalize = false; // divide edit distances by the longer length
    bool use_rle = true;    // false compares raw label sequences (diagnostic)
    std::uint64_t seed = 0; // drives subsampling of oversized groups
    std::size_t max_group_size = 2000;
    int threads = 1;
};

struct GroupMedoids {
    int group = 0;
    std::size_t members = 0;
    bool subsampled = false;
    std::vector<std::string> medoid_ids;
    std::vector<Labels> medoids;
    double assignment_cost = 0.0; // over all members
};

struct GroupOrderAnalysis {
    std::vector<GroupMedoids> medoid_sets;
    std::vector<double> cohesion; // mean distance of members to nearest medoid
    DistanceMatrix matrix;        // aggregated medoid-pair distances
};

/// `groups[g]` holds the block sequences of evaluation group g. Throws
/// DataError naming the first empty group.
GroupOrderAnalysis analyze_order(const std::vector<std::vector<BlockSequence>>& groups,
                                 const OrderOptions& options = {});

// ---- Transition position ---------------------------------------------------

/// Exact 1-Wasserstein distance between two empirical distributions.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

struct KdeCurve {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
    std::size_t n_samples = 0;
    bool degenerate = false; // fewer than two samples or zero spread
};

/// Gaussian KDE on an even grid over [0, 1] with Silverman's bandwidth and
/// reflection at both ends, scaled to unit trapezoid area.
KdeCurve kde_curve(std::span<const double> samples, std::size_t grid_size = 512);

double trapezoid_area(const KdeCurve& curve);

/// Mean W1 between random half-splits of `samples`. NaN below two samples.
double split_half_cohesion(std::span<const double> samples, int reps, std::uint64_t seed);

using TransitionFilter = std::pair<int, int>;

struct PositionOptions {
    std::optional<TransitionFilter> filter;
    std::size_t grid_size = 512;
    int bootstrap_reps = 20;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct GroupPositionAnalysis {
    std::vector<std::vector<double>> samples; // sorted positions per group
    std::vector<bool> present;
    std::vector<KdeCurve> kde;
    std::vector<double> cohesion; // NaN for absent groups
    DistanceMatrix matrix;        // NaN rows/columns for absent groups
    std::optional<TransitionFilter> filter;
};

/// Throws DataError if no group keeps an event after filtering.
GroupPositionAnalysis analyze_position(const std::vector<std::vector<TransitionEvent>>& groups,
                                       const PositionOptions& options = {});

// ---- Regime classification -------------------------------------------------

enum class Regime { ordered, akp, reverse_akp, noisy };

std::optional<Regime> parse_regime(std::string_view name);
std::string_view to_string(Regime r);

struct Thresholds {
    double theta_low = 0.8;
    double theta_high = 1.1;
    double gamma = 1.25; // reported only; no decision rule reads it
};

struct GroupBlocks {
    std::vector<int> high{7, 8, 9};
    std::vector<int> low{0, 1, 2};

    /// Bottom three and top three groups out of n_bins.
    static GroupBlocks for_bins(int n_bins);
};

struct RegimeDiagnostics {
    double c_high = 0.0;
    double c_low = 0.0;
    double cross_hl = 0.0;
    double grand_mean = 0.0;
    double ref = 1.0;
    double c_high_norm = 0.0;
    double c_low_norm = 0.0;
    double cross_ratio = 0.0;
};

struct RegimeLabel {
    Regime verdict = Regime::noisy;
    RegimeDiagnostics diagnostics;
    Thresholds thresholds;
    GroupBlocks blocks;
};

/// Decision order: ordered, akp, reverse_akp, otherwise noisy. Cohesions
/// are normalized by their mean over all groups; NaN entries (absent
/// groups) are skipped. Throws ValidationError on a malformed matrix.
RegimeLabel classify_regime(const DistanceMatrix& matrix, std::span<const double> cohesion,
                            const Thresholds& thresholds = {}, const GroupBlocks& blocks = {});

} // namespace structoscope

#endif
