#include "structoscope/segmentation.hpp"

#include "structoscope/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <regex>

namespace structoscope {

namespace {

struct Piece {
    std::string text;
    std::vector<std::string> words;

    void absorb(Piece&& other)
    {
        text += other.text;
        words.insert(words.end(), std::make_move_iterator(other.words.begin()),
                     std::make_move_iterator(other.words.end()));
    }
};

} // namespace

std::vector<Segment> segment_by_markers(const std::string& raw_text, const MarkerRule& rule)
{
    if (raw_text.empty()) {
        throw ValidationError("segment_by_markers: empty text");
    }
    if (rule.min_tokens < 1) {
        throw ValidationError("segment_by_markers: min_tokens must be >= 1");
    }
    std::regex marker;
    try {
        marker = std::regex(rule.pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
        throw ValidationError("segment_by_markers: bad pattern '" + rule.pattern + "': " + e.what());
    }

    std::vector<Piece> pieces(1);
    std::size_t pos = 0;
    while (pos < raw_text.size()) {
        auto nl = raw_text.find('\n', pos);
        const std::size_t end = nl == std::string::npos ? raw_text.size() : nl + 1;
        std::string_view line(raw_text.data() + pos, end - pos);
        std::string_view body = line;
        if (!body.empty() && body.back() == '\n') {
            body.remove_suffix(1);
        }
        if (!rule.pattern.empty() && std::regex_search(body.begin(), body.end(), marker)) {
            pieces.emplace_back();
        } else {
            pieces.back().text.append(line);
        }
        pos = end;
    }
    for (auto& p : pieces) {
        p.words = tokenize(p.text);
    }

    const auto min_tokens = static_cast<std::size_t>(rule.min_tokens);
    std::vector<Piece> merged;
    std::optional<Piece> pending;
    for (auto& piece : pieces) {
        if (pending) {
            pending->absorb(std::move(piece));
            piece = std::move(*pending);
            pending.reset();
        }
        if (piece.words.size() >= min_tokens) {
            merged.push_back(std::move(piece));
        } else if (!merged.empty()) {
            merged.back().absorb(std::move(piece));
        } else {
            pending = std::move(piece);
        }
    }
    if (pending) {
        if (merged.empty()) {
            merged.push_back(std::move(*pending));
        } else {
            merged.back().absorb(std::move(*pending));
        }
    }

    std::vector<Segment> out;
    out.reserve(merged.size());
    for (auto& piece : merged) {
        Segment seg;
        seg.index = static_cast<int>(out.size());
        seg.raw_text = std::move(piece.text);
        for (auto& w : piece.words) {
            seg.tokens.push_back(Token{std::move(w), std::nullopt, std::nullopt, false});
        }
        out.push_back(std::move(seg));
    }
    return out;
}

double event_ncp_prior(std::size_t n_events, double p0)
{
    if (!(p0 > 0.0 && p0 < 1.0)) {
        throw ValidationError("bayesian_blocks: p0 must lie in (0, 1)");
    }
    return 4.0 - std::log(73.53 * p0 * std::pow(static_cast<double>(n_events), -0.478));
}

double block_fitness(double n_events, double duration)
{
    return n_events * (std::log(n_events) - std::log(duration));
}

std::vector<double> jitter_duplicates(std::span<const double> timestamps)
{
    constexpr double kEpsilon = 1e-6;
    std::vector<double> t(timestamps.begin(), timestamps.end());
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (t[i] <= t[i - 1]) {
            t[i] = t[i - 1] + kEpsilon;
        }
    }
    return t;
}

ChangePointResult bayesian_blocks(std::span<const double> timestamps, const BayesianBlocksOptions& options)
{
    if (timestamps.empty()) {
        throw ValidationError("bayesian_blocks: no timestamps");
    }
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        if (!std::isfinite(timestamps[i])) {
            throw ValidationError("bayesian_blocks: non-finite timestamp");
        }
        if (i > 0 && timestamps[i] < timestamps[i - 1]) {
            throw ValidationError("bayesian_blocks: timestamps not ascending at index "
                                  + std::to_string(i));
        }
    }
    ChangePointResult result;
    const std::size_t n = timestamps.size();
    result.ncp_prior = options.ncp_prior ? *options.ncp_prior : event_ncp_prior(n, options.p0);
    if (n == 1) {
        result.edges = {timestamps[0], timestamps[0]};
        result.n_blocks = 1;
        result.objective = -result.ncp_prior;
        return result;
    }

    const auto t = jitter_duplicates(timestamps);
    // Cell edges: data extremes plus midpoints between consecutive events.
    std::vector<double> edges(n + 1);
    edges[0] = t[0];
    for (std::size_t i = 1; i < n; ++i) {
        edges[i] = 0.5 * (t[i - 1] + t[i]);
    }
    edges[n] = t[n - 1];

    std::vector<double> best(n, 0.0);
    std::vector<std::size_t> last(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
        double best_value = -std::numeric_limits<double>::infinity();
        std::size_t best_start = 0;
        for (std::size_t i = 0; i <= r; ++i) {
            const double count = static_cast<double>(r - i + 1);
            const double width = edges[r + 1] - edges[i];
            double value = block_fitness(count, width) - result.ncp_prior;
            if (i > 0) {
                value += best[i - 1];
            }
            if (value > best_value) {
                best_value = value;
                best_start = i;
            }
        }
        best[r] = best_value;
        last[r] = best_start;
    }

    std::vector<std::size_t> change_points;
    std::size_t ind = n;
    while (true) {
        const std::size_t start = last[ind - 1];
        change_points.push_back(start);
        if (start == 0) {
            break;
        }
        ind = start;
    }
    std::reverse(change_points.begin(), change_points.end());
    for (auto cp : change_points) {
        result.edges.push_back(edges[cp]);
    }
    result.edges.push_back(edges[n]);
    result.n_blocks = static_cast<int>(result.edges.size()) - 1;
    result.objective = best[n - 1];
    return result;
}

std::vector<Segment> regroup_cues(std::span<const Segment> cues, const ChangePointResult& result)
{
    if (result.edges.size() < 2) {
        throw ValidationError("regroup_cues: change-point result needs at least two edges");
    }
    const auto& edges = result.edges;
    const std::size_t n_blocks = edges.size() - 1;
    std::vector<std::vector<const Segment*>> members(n_blocks);
    for (const auto& cue : cues) {
        if (!cue.time_start) {
            throw ValidationError("regroup_cues: cue without time_start");
        }
        const double ts = *cue.time_start;
        if (ts < edges.front() || ts > edges.back()) {
            throw ValidationError("regroup_cues: cue start outside the block range");
        }
        auto it = std::upper_bound(edges.begin(), edges.end(), ts);
        auto block = static_cast<std::size_t>(it - edges.begin());
        block = std::clamp<std::size_t>(block, 1, n_blocks) - 1;
        members[block].push_back(&cue);
    }
    std::vector<Segment> out;
    for (const auto& block : members) {
        if (block.empty()) {
            continue;
        }
        Segment seg;
        seg.index = static_cast<int>(out.size());
        for (const Segment* cue : block) {
            seg.tokens.insert(seg.tokens.end(), cue->tokens.begin(), cue->tokens.end());
            if (cue->raw_text) {
                if (seg.raw_text) {
                    *seg.raw_text += ' ';
                    *seg.raw_text += *cue->raw_text;
                } else {
                    seg.raw_text = *cue->raw_text;
                }
            }
            seg.time_start = seg.time_start ? std::min(*seg.time_start, *cue->time_start) : *cue->time_start;
            if (cue->time_end) {
                seg.time_end = seg.time_end ? std::max(*seg.time_end, *cue->time_end) : *cue->time_end;
            }
        }
        out.push_back(std::move(seg));
    }
    return out;
}

} // namespace structoscope
