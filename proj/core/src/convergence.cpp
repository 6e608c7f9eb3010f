#include "structoscope/convergence.hpp"

#include "structoscope/corpus.hpp"
#include "structoscope/error.hpp"

#include "parallel.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace structoscope {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

std::optional<Aggregation> parse_aggregation(std::string_view name)
{
    if (name == "mean") {
        return Aggregation::mean;
    }
    if (name == "min") {
        return Aggregation::min;
    }
    return std::nullopt;
}

std::string_view to_string(Aggregation a)
{
    return a == Aggregation::mean ? "mean" : "min";
}

GroupOrderAnalysis analyze_order(const std::vector<std::vector<BlockSequence>>& groups,
                                 const OrderOptions& options)
{
    const std::size_t n_groups = groups.size();
    if (n_groups == 0) {
        throw ValidationError("analyze_order: no groups");
    }
    if (options.medoids < 1) {
        throw ValidationError("analyze_order: medoids per group must be >= 1");
    }
    for (std::size_t g = 0; g < n_groups; ++g) {
        if (groups[g].empty()) {
            throw DataError("analyze_order: group " + std::to_string(g) + " is empty");
        }
        if (groups[g].size() < static_cast<std::size_t>(options.medoids)) {
            throw DataError("analyze_order: group " + std::to_string(g) + " has "
                            + std::to_string(groups[g].size()) + " sequence(s) for "
                            + std::to_string(options.medoids) + " medoids");
        }
    }
    auto distance = [&](const Labels& a, const Labels& b) {
        double v = edit_distance(a, b);
        if (options.normalize) {
            const auto longest = std::max(a.size(), b.size());
            v = longest == 0 ? 0.0 : v / static_cast<double>(longest);
        }
        return v;
    };

    GroupOrderAnalysis out;
    out.medoid_sets.resize(n_groups);
    out.cohesion.assign(n_groups, 0.0);
    for (std::size_t g = 0; g < n_groups; ++g) {
        // Canonical member order keeps PAM tie-breaks independent of input order.
        std::vector<const BlockSequence*> members;
        for (const auto& s : groups[g]) {
            members.push_back(&s);
        }
        std::sort(members.begin(), members.end(),
                  [](const BlockSequence* a, const BlockSequence* b) { return a->doc_id < b->doc_id; });
        auto seq_of = [&](const BlockSequence* s) -> const Labels& {
            return options.use_rle ? s->compressed : s->labels;
        };

        std::vector<std::size_t> pool(members.size());
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        const bool subsample = options.max_group_size > 0 && pool.size() > options.max_group_size;
        if (subsample) {
            detail::Engine eng(detail::mix_seed(options.seed, g));
            for (std::size_t i = 0; i < options.max_group_size; ++i) {
                const auto j = i + detail::uniform_index(eng, pool.size() - i);
                std::swap(pool[i], pool[j]);
            }
            pool.resize(options.max_group_size);
            std::sort(pool.begin(), pool.end());
        }
        std::vector<Labels> candidates;
        candidates.reserve(pool.size());
        for (auto i : pool) {
            candidates.push_back(seq_of(members[i]));
        }
        const DistanceMatrix d = pairwise_edit_distances(candidates, options.normalize, options.threads);
        const PamResult pr = pam(d, options.medoids);

        GroupMedoids& gm = out.medoid_sets[g];
        gm.group = static_cast<int>(g);
        gm.members = members.size();
        gm.subsampled = subsample;
        for (auto idx : pr.medoids) {
            gm.medoid_ids.push_back(members[pool[idx]]->doc_id);
            gm.medoids.push_back(candidates[idx]);
        }
        double cost = 0.0;
        for (const auto* s : members) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& med : gm.medoids) {
                best = std::min(best, distance(seq_of(s), med));
            }
            cost += best;
        }
        gm.assignment_cost = cost;
        out.cohesion[g] = cost / static_cast<double>(members.size());
    }

    out.matrix = DistanceMatrix(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) {
        for (std::size_t h = g + 1; h < n_groups; ++h) {
            double agg = options.aggregation == Aggregation::min ? std::numeric_limits<double>::infinity() : 0.0;
            std::size_t pairs = 0;
            for (const auto& a : out.medoid_sets[g].medoids) {
                for (const auto& b : out.medoid_sets[h].medoids) {
                    const double v = distance(a, b);
                    agg = options.aggregation == Aggregation::min ? std::min(agg, v) : agg + v;
                    ++pairs;
                }
            }
            if (options.aggregation == Aggregation::mean) {
                agg /= static_cast<double>(pairs);
            }
            out.matrix(g, h) = agg;
            out.matrix(h, g) = agg;
        }
    }
    return out;
}

namespace {

std::uint64_t gcd_u64(std::uint64_t a, std::uint64_t b)
{
    while (b != 0) {
        a %= b;
        std::swap(a, b);
    }
    return a;
}

// Quantile-function form: W1 = integral over u in (0,1) of |Qa(u) - Qb(u)|.
// Breakpoints i/na and j/nb are tracked as integers on a common grid of
// lcm(na, nb) steps so equal-size samples reduce to mean |a_(i) - b_(i)|.
double wasserstein_sorted(std::span<const double> a, std::span<const double> b)
{
    const std::uint64_t na = a.size();
    const std::uint64_t nb = b.size();
    const std::uint64_t lcm = na / gcd_u64(na, nb) * nb;
    const std::uint64_t step_a = lcm / na;
    const std::uint64_t step_b = lcm / nb;
    std::uint64_t i = 0;
    std::uint64_t j = 0;
    std::uint64_t pos = 0;
    double acc = 0.0;
    while (i < na && j < nb) {
        const std::uint64_t next_a = (i + 1) * step_a;
        const std::uint64_t next_b = (j + 1) * step_b;
        const std::uint64_t next = std::min(next_a, next_b);
        acc += static_cast<double>(next - pos) * std::abs(a[i] - b[j]);
        pos = next;
        if (next_a == next) {
            ++i;
        }
        if (next_b == next) {
            ++j;
        }
    }
    return acc / static_cast<double>(lcm);
}

void check_samples(std::span<const double> s, const char* what)
{
    if (s.empty()) {
        throw ValidationError(std::string(what) + ": empty sample");
    }
    for (double v : s) {
        if (!std::isfinite(v)) {
            throw ValidationError(std::string(what) + ": non-finite sample");
        }
    }
}

} // namespace

double wasserstein_1d(std::span<const double> a, std::span<const double> b)
{
    check_samples(a, "wasserstein_1d");
    check_samples(b, "wasserstein_1d");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    return wasserstein_sorted(sa, sb);
}

double trapezoid_area(const KdeCurve& curve)
{
    double area = 0.0;
    for (std::size_t i = 1; i < curve.grid.size(); ++i) {
        area += 0.5 * (curve.density[i] + curve.density[i - 1]) * (curve.grid[i] - curve.grid[i - 1]);
    }
    return area;
}

KdeCurve kde_curve(std::span<const double> samples, std::size_t grid_size)
{
    check_samples(samples, "kde_curve");
    if (grid_size < 2) {
        throw ValidationError("kde_curve: grid_size must be >= 2");
    }
    KdeCurve curve;
    curve.n_samples = samples.size();
    curve.grid.resize(grid_size);
    curve.density.assign(grid_size, 0.0);
    const double step = 1.0 / static_cast<double>(grid_size - 1);
    for (std::size_t i = 0; i < grid_size; ++i) {
        curve.grid[i] = static_cast<double>(i) * step;
    }

    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    double spread = 0.0;
    if (sorted.size() >= 2) {
        const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : sorted) {
            ss += (v - mean) * (v - mean);
        }
        const double sigma = std::sqrt(ss / (n - 1.0));
        const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
        spread = std::min(sigma, iqr / 1.34);
        if (!(spread > 0.0)) {
            spread = sigma;
        }
    }
    if (!(spread > 0.0)) {
        // Spike at the grid point nearest the (clamped) mean, unit trapezoid area.
        curve.degenerate = true;
        const double mean = std::clamp(std::accumulate(sorted.begin(), sorted.end(), 0.0) / n, 0.0, 1.0);
        const auto idx = static_cast<std::size_t>(std::llround(mean / step));
        const bool edge = idx == 0 || idx == grid_size - 1;
        curve.density[idx] = (edge ? 2.0 : 1.0) / step;
        return curve;
    }
    const double h = 0.9 * spread * std::pow(n, -0.2);
    curve.bandwidth = h;

    // Samples reflected at 0 and 1, merged and sorted for windowed sums.
    std::vector<double> points;
    points.reserve(3 * sorted.size());
    for (double s : sorted) {
        points.push_back(s);
        points.push_back(-s);
        points.push_back(2.0 - s);
    }
    std::sort(points.begin(), points.end());
    const double cutoff = 9.0 * h;
    const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t i = 0; i < grid_size; ++i) {
        const double x = curve.grid[i];
        auto lo = std::lower_bound(points.begin(), points.end(), x - cutoff);
        auto hi = std::upper_bound(points.begin(), points.end(), x + cutoff);
        double sum = 0.0;
        for (auto it = lo; it != hi; ++it) {
            const double z = (x - *it) / h;
            sum += std::exp(-0.5 * z * z);
        }
        curve.density[i] = sum * norm;
    }
    const double area = trapezoid_area(curve);
    if (area > 0.0) {
        for (auto& v : curve.density) {
            v /= area;
        }
    }
    return curve;
}

double split_half_cohesion(std::span<const double> samples, int reps, std::uint64_t seed)
{
    if (samples.size() < 2 || reps < 1) {
        return kNaN;
    }
    detail::Engine eng(seed);
    std::vector<double> work(samples.begin(), samples.end());
    std::sort(work.begin(), work.end());
    const std::size_t half = work.size() / 2;
    double total = 0.0;
    for (int r = 0; r < reps; ++r) {
        std::vector<double> perm = work;
        for (std::size_t i = perm.size() - 1; i > 0; --i) {
            std::swap(perm[i], perm[detail::uniform_index(eng, i + 1)]);
        }
        std::vector<double> left(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
        std::vector<double> right(perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end());
        std::sort(left.begin(), left.end());
        std::sort(right.begin(), right.end());
        total += wasserstein_sorted(left, right);
    }
    return total / static_cast<double>(reps);
}

GroupPositionAnalysis analyze_position(const std::vector<std::vector<TransitionEvent>>& groups,
                                       const PositionOptions& options)
{
    const std::size_t n_groups = groups.size();
    GroupPositionAnalysis out;
    out.filter = options.filter;
    out.samples.resize(n_groups);
    out.present.assign(n_groups, false);
    out.kde.resize(n_groups);
    out.cohesion.assign(n_groups, kNaN);
    for (std::size_t g = 0; g < n_groups; ++g) {
        for (const auto& e : groups[g]) {
            if (options.filter && (e.from_label != options.filter->first || e.to_label != options.filter->second)) {
                continue;
            }
            out.samples[g].push_back(e.position);
        }
        std::sort(out.samples[g].begin(), out.samples[g].end());
        out.present[g] = !out.samples[g].empty();
    }
    if (std::none_of(out.present.begin(), out.present.end(), [](bool p) { return p; })) {
        throw DataError("analyze_position: no group has transition events"
                        + (options.filter ? " for " + std::to_string(options.filter->first) + " -> "
                                                + std::to_string(options.filter->second)
                                          : std::string()));
    }

    detail::parallel_for(n_groups, options.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t g = b; g < e; ++g) {
            if (!out.present[g]) {
                continue;
            }
            out.kde[g] = kde_curve(out.samples[g], options.grid_size);
            out.cohesion[g] = split_half_cohesion(out.samples[g], options.bootstrap_reps,
                                                  detail::mix_seed(options.seed, g));
        }
    });

    out.matrix = DistanceMatrix(n_groups);
    detail::parallel_for(n_groups, options.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t g = b; g < e; ++g) {
            if (!out.present[g]) {
                for (std::size_t h = 0; h < n_groups; ++h) {
                    out.matrix(g, h) = kNaN;
                }
                continue;
            }
            for (std::size_t h = 0; h < n_groups; ++h) {
                if (!out.present[h]) {
                    out.matrix(g, h) = kNaN;
                } else if (h != g) {
                    out.matrix(g, h) = wasserstein_sorted(out.samples[g], out.samples[h]);
                }
            }
        }
    });
    return out;
}

std::optional<Regime> parse_regime(std::string_view name)
{
    if (name == "ordered") return Regime::ordered;
    if (name == "akp") return Regime::akp;
    if (name == "reverse_akp") return Regime::reverse_akp;
    if (name == "noisy") return Regime::noisy;
    return std::nullopt;
}

std::string_view to_string(Regime r)
{
    switch (r) {
    case Regime::ordered: return "ordered";
    case Regime::akp: return "akp";
    case Regime::reverse_akp: return "reverse_akp";
    case Regime::noisy: return "noisy";
    }
    return "?";
}

GroupBlocks GroupBlocks::for_bins(int n_bins)
{
    if (n_bins < 6) {
        throw ValidationError("need at least 6 groups for disjoint high/low blocks of three");
    }
    return GroupBlocks{{n_bins - 3, n_bins - 2, n_bins - 1}, {0, 1, 2}};
}

namespace {

double finite_mean(const std::vector<double>& v)
{
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    }
    return n == 0 ? kNaN : s / static_cast<double>(n);
}

} // namespace

RegimeLabel classify_regime(const DistanceMatrix& matrix, std::span<const double> cohesion,
                            const Thresholds& thresholds, const GroupBlocks& blocks)
{
    const std::size_t n = matrix.n;
    if (n == 0 || matrix.values.size() != n * n) {
        throw ValidationError("classify_regime: matrix is not square");
    }
    if (cohesion.size() != n) {
        throw ValidationError("classify_regime: " + std::to_string(cohesion.size())
                              + " cohesions for a " + std::to_string(n) + "-group matrix");
    }
    if (blocks.high.empty() || blocks.low.empty()) {
        throw ValidationError("classify_regime: empty high or low block");
    }
    for (int g : blocks.high) {
        if (g < 0 || static_cast<std::size_t>(g) >= n) {
            throw ValidationError("classify_regime: high group " + std::to_string(g) + " out of range");
        }
    }
    for (int g : blocks.low) {
        if (g < 0 || static_cast<std::size_t>(g) >= n) {
            throw ValidationError("classify_regime: low group " + std::to_string(g) + " out of range");
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isfinite(matrix(i, i)) && matrix(i, i) != 0.0) {
            throw ValidationError("classify_regime: nonzero diagonal at " + std::to_string(i));
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = matrix(i, j);
            const double b = matrix(j, i);
            if (std::isnan(a) != std::isnan(b)) {
                throw ValidationError("classify_regime: asymmetric missing entries");
            }
            if (std::isnan(a)) {
                continue;
            }
            if (!std::isfinite(a) || a < 0.0 || std::abs(a - b) > 1e-9 * std::max(1.0, std::abs(a))) {
                throw ValidationError("classify_regime: matrix must be symmetric, finite and nonnegative");
            }
        }
    }
    for (double c : cohesion) {
        if (!std::isnan(c) && (!std::isfinite(c) || c < 0.0)) {
            throw ValidationError("classify_regime: cohesions must be finite and nonnegative");
        }
    }

    auto pick = [&](const std::vector<int>& idx) {
        std::vector<double> v;
        for (int g : idx) {
            v.push_back(cohesion[static_cast<std::size_t>(g)]);
        }
        return finite_mean(v);
    };
    RegimeLabel label;
    label.thresholds = thresholds;
    label.blocks = blocks;
    RegimeDiagnostics& d = label.diagnostics;
    d.c_high = pick(blocks.high);
    d.c_low = pick(blocks.low);
    if (std::isnan(d.c_high) || std::isnan(d.c_low)) {
        throw DataError("classify_regime: no cohesion available for the high or low block");
    }
    std::vector<double> cross;
    for (int g : blocks.high) {
        for (int h : blocks.low) {
            cross.push_back(matrix(static_cast<std::size_t>(g), static_cast<std::size_t>(h)));
        }
    }
    d.cross_hl = finite_mean(cross);
    std::vector<double> off;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) {
                off.push_back(matrix(i, j));
            }
        }
    }
    d.grand_mean = finite_mean(off);
    if (std::isnan(d.cross_hl) || std::isnan(d.grand_mean)) {
        throw DataError("classify_regime: no finite distance between the high and low blocks");
    }
    d.ref = finite_mean(std::vector<double>(cohesion.begin(), cohesion.end()));
    if (!(d.ref > 0.0)) {
        d.ref = 1.0;
    }
    d.c_high_norm = d.c_high / d.ref;
    d.c_low_norm = d.c_low / d.ref;
    d.cross_ratio = d.grand_mean > 0.0 ? d.cross_hl / d.grand_mean : 1.0;

    const double lo = thresholds.theta_low;
    const double hi = thresholds.theta_high;
    if (d.c_high_norm <= lo && d.c_low_norm <= lo && d.cross_ratio >= hi) {
        label.verdict = Regime::ordered;
    } else if (d.c_high_norm <= lo && d.c_low_norm >= hi) {
        label.verdict = Regime::akp;
    } else if (d.c_low_norm <= lo && d.c_high_norm >= hi) {
        label.verdict = Regime::reverse_akp;
    } else {
        label.verdict = Regime::noisy;
    }
    return label;
}

} // namespace structoscope
