#include "structoscope/sequence.hpp"

#include "structoscope/error.hpp"

#include "io_util.hpp"
#include "parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <unordered_set>

namespace structoscope {

using nlohmann::json;

BlockSequence BlockSequence::from_labels(std::string doc_id, Labels labels)
{
    BlockSequence s;
    s.doc_id = std::move(doc_id);
    s.compressed = run_length_encode(labels);
    s.labels = std::move(labels);
    return s;
}

Labels run_length_encode(std::span<const int> labels)
{
    Labels out;
    for (int l : labels) {
        if (out.empty() || out.back() != l) {
            out.push_back(l);
        }
    }
    return out;
}

std::vector<TransitionEvent> extract_transitions(const BlockSequence& seq)
{
    if (seq.labels.empty()) {
        throw ValidationError("extract_transitions: document '" + seq.doc_id + "' has no segments");
    }
    const auto total = static_cast<double>(seq.labels.size());
    std::vector<TransitionEvent> events;
    for (std::size_t i = 1; i < seq.labels.size(); ++i) {
        if (seq.labels[i] != seq.labels[i - 1]) {
            // Segment i (0-based) opens the incoming run: 1-based index i + 1.
            events.push_back(TransitionEvent{seq.labels[i - 1], seq.labels[i],
                                             static_cast<double>(i + 1) / total, seq.doc_id});
        }
    }
    return events;
}

int edit_distance(std::span<const int> a, std::span<const int> b)
{
    if (a.size() < b.size()) {
        std::swap(a, b);
    }
    std::vector<int> prev(b.size() + 1);
    std::vector<int> cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

void validate_distance_matrix(const DistanceMatrix& d)
{
    if (d.values.size() != d.n * d.n) {
        throw ValidationError("distance matrix: expected " + std::to_string(d.n * d.n)
                              + " entries, got " + std::to_string(d.values.size()));
    }
    for (std::size_t i = 0; i < d.n; ++i) {
        if (d(i, i) != 0.0) {
            throw ValidationError("distance matrix: nonzero diagonal at " + std::to_string(i));
        }
        for (std::size_t j = i + 1; j < d.n; ++j) {
            const double a = d(i, j);
            const double b = d(j, i);
            if (!std::isfinite(a) || a < 0.0) {
                throw ValidationError("distance matrix: negative or non-finite entry at ("
                                      + std::to_string(i) + ", " + std::to_string(j) + ")");
            }
            if (std::abs(a - b) > 1e-9 * std::max(1.0, std::abs(a))) {
                throw ValidationError("distance matrix: asymmetric at (" + std::to_string(i) + ", "
                                      + std::to_string(j) + ")");
            }
        }
    }
}

DistanceMatrix pairwise_edit_distances(std::span<const Labels> sequences, bool normalize, int threads)
{
    DistanceMatrix d(sequences.size());
    detail::parallel_for(sequences.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t j = i + 1; j < sequences.size(); ++j) {
                double v = edit_distance(sequences[i], sequences[j]);
                if (normalize) {
                    const auto longest = std::max(sequences[i].size(), sequences[j].size());
                    v = longest == 0 ? 0.0 : v / static_cast<double>(longest);
                }
                d(i, j) = v;
                d(j, i) = v;
            }
        }
    });
    return d;
}

double medoid_cost(const DistanceMatrix& d, std::span<const std::size_t> medoids)
{
    double total = 0.0;
    for (std::size_t j = 0; j < d.n; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (auto m : medoids) {
            best = std::min(best, d(m, j));
        }
        total += best;
    }
    return total;
}

namespace {

struct Nearest {
    std::vector<std::size_t> first_pos; // position in medoid list
    std::vector<double> first;
    std::vector<double> second;
};

Nearest nearest_medoids(const DistanceMatrix& d, const std::vector<std::size_t>& medoids)
{
    constexpr double kInf = std::numeric_limits<double>::infinity();
    Nearest nr;
    nr.first_pos.assign(d.n, 0);
    nr.first.assign(d.n, kInf);
    nr.second.assign(d.n, kInf);
    for (std::size_t j = 0; j < d.n; ++j) {
        for (std::size_t p = 0; p < medoids.size(); ++p) {
            const double v = d(medoids[p], j);
            if (v < nr.first[j] || (v == nr.first[j] && medoids[p] < medoids[nr.first_pos[j]])) {
                nr.second[j] = nr.first[j];
                nr.first[j] = v;
                nr.first_pos[j] = p;
            } else if (v < nr.second[j]) {
                nr.second[j] = v;
            }
        }
    }
    return nr;
}

// Cheapest medoid subset by enumeration when C(n, m) * n stays small.
// Returns a subset only if it beats `current` beyond rounding noise.
std::optional<std::vector<std::size_t>> exhaustive_medoids(const DistanceMatrix& d, int m, double current)
{
    constexpr double kBudget = 2e6;
    const std::size_t n = d.n;
    const auto k = static_cast<std::size_t>(m);
    double subsets = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
        subsets = subsets * static_cast<double>(n - i) / static_cast<double>(i + 1);
    }
    if (subsets * static_cast<double>(n) * static_cast<double>(k) > kBudget) {
        return std::nullopt;
    }
    std::vector<std::size_t> combo(k);
    std::iota(combo.begin(), combo.end(), std::size_t{0});
    std::optional<std::vector<std::size_t>> best;
    double best_cost = current - 1e-10 * std::max(1.0, current);
    while (true) {
        const double c = medoid_cost(d, combo);
        if (c < best_cost) {
            best_cost = c;
            best = combo;
        }
        std::size_t i = k;
        while (i > 0 && combo[i - 1] == n - k + (i - 1)) {
            --i;
        }
        if (i == 0) {
            break;
        }
        ++combo[i - 1];
        for (std::size_t j = i; j < k; ++j) {
            combo[j] = combo[j - 1] + 1;
        }
    }
    return best;
}

} // namespace

PamResult pam(const DistanceMatrix& d, int m)
{
    validate_distance_matrix(d);
    const std::size_t n = d.n;
    if (m < 1 || static_cast<std::size_t>(m) > n) {
        throw ValidationError("k_medoids: need 1 <= m <= n (m = " + std::to_string(m)
                              + ", n = " + std::to_string(n) + ")");
    }
    constexpr double kInf = std::numeric_limits<double>::infinity();

    // BUILD
    std::vector<std::size_t> medoids;
    std::vector<bool> is_medoid(n, false);
    std::vector<double> nearest(n, kInf);
    {
        std::size_t best = 0;
        double best_sum = kInf;
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                sum += d(i, j);
            }
            if (sum < best_sum) {
                best_sum = sum;
                best = i;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = true;
        for (std::size_t j = 0; j < n; ++j) {
            nearest[j] = d(best, j);
        }
    }
    while (medoids.size() < static_cast<std::size_t>(m)) {
        std::size_t best = n;
        double best_gain = -1.0;
        for (std::size_t c = 0; c < n; ++c) {
            if (is_medoid[c]) {
                continue;
            }
            double gain = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                gain += std::max(nearest[j] - d(c, j), 0.0);
            }
            if (gain > best_gain) {
                best_gain = gain;
                best = c;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = true;
        for (std::size_t j = 0; j < n; ++j) {
            nearest[j] = std::min(nearest[j], d(best, j));
        }
    }
    std::sort(medoids.begin(), medoids.end());

    // SWAP
    PamResult result;
    double cost = medoid_cost(d, medoids);
    while (true) {
        const Nearest nr = nearest_medoids(d, medoids);
        double best_delta = 0.0;
        std::size_t best_p = 0;
        std::size_t best_h = n;
        for (std::size_t p = 0; p < medoids.size(); ++p) {
            for (std::size_t h = 0; h < n; ++h) {
                if (is_medoid[h]) {
                    continue;
                }
                double delta = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double keep = nr.first_pos[j] == p ? nr.second[j] : nr.first[j];
                    delta += std::min(keep, d(h, j)) - nr.first[j];
                }
                if (delta < best_delta) {
                    best_delta = delta;
                    best_p = p;
                    best_h = h;
                }
            }
        }
        if (best_h == n || best_delta >= -1e-10 * std::max(1.0, cost)) {
            break;
        }
        auto candidate = medoids;
        candidate[best_p] = best_h;
        std::sort(candidate.begin(), candidate.end());
        const double new_cost = medoid_cost(d, candidate);
        if (!(new_cost < cost)) {
            break;
        }
        is_medoid[medoids[best_p]] = false;
        is_medoid[best_h] = true;
        medoids = std::move(candidate);
        cost = new_cost;
        ++result.swaps;
    }

    // SWAP can stop in a local optimum; small instances are settled exactly.
    if (auto exact = exhaustive_medoids(d, m, cost)) {
        medoids = std::move(*exact);
        cost = medoid_cost(d, medoids);
    }

    const Nearest nr = nearest_medoids(d, medoids);
    result.medoids = medoids;
    result.assignment = nr.first_pos;
    result.cost = cost;
    return result;
}

MedoidSet k_medoids(std::span<const Labels> sequences, int m, const DistanceMatrix& dist)
{
    if (dist.n != sequences.size()) {
        throw ValidationError("k_medoids: distance matrix is " + std::to_string(dist.n) + "x"
                              + std::to_string(dist.n) + " for " + std::to_string(sequences.size())
                              + " sequences");
    }
    const PamResult r = pam(dist, m);
    MedoidSet out;
    out.medoid_indices = r.medoids;
    for (auto i : r.medoids) {
        out.medoids.push_back(sequences[i]);
    }
    out.assignment_cost = r.cost;
    return out;
}

void write_sequences_jsonl(std::span<const SequenceRecord> records, const std::filesystem::path& path)
{
    std::string out;
    for (const auto& r : records) {
        json j;
        j["id"] = r.id;
        j["eval_score"] = r.eval_score;
        if (!r.domain.empty()) {
            j["domain"] = r.domain;
        }
        if (!r.genre_tags.empty()) {
            j["genre_tags"] = r.genre_tags;
        }
        if (r.group) {
            j["group"] = *r.group;
        }
        if (r.planted_position) {
            j["planted_position"] = *r.planted_position;
        }
        j["labels"] = r.labels;
        j["compressed"] = run_length_encode(r.labels);
        out += j.dump();
        out += '\n';
    }
    detail::write_text_file(path, out);
}

std::vector<SequenceRecord> read_sequences_jsonl(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open sequences file " + path.string());
    }
    std::vector<SequenceRecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto where = path.string() + ":" + std::to_string(line_no);
        auto fail = [&](const char* field, const std::string& what) {
            throw DataError(where + ": field '" + field + "': " + what);
        };
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            fail("<record>", std::string("invalid JSON: ") + e.what());
        }
        SequenceRecord r;
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
            fail("id", "must be a non-empty string");
        }
        r.id = j["id"].get<std::string>();
        if (!j.contains("eval_score") || !j["eval_score"].is_number()
            || !std::isfinite(j["eval_score"].get<double>())) {
            fail("eval_score", "must be a finite number");
        }
        r.eval_score = j["eval_score"].get<double>();
        if (!j.contains("labels") || !j["labels"].is_array()) {
            fail("labels", "must be an array of integers");
        }
        for (const auto& v : j["labels"]) {
            if (!v.is_number_integer() || v.get<long long>() < 0) {
                fail("labels", "must be an array of non-negative integers");
            }
            r.labels.push_back(v.get<int>());
        }
        if (r.labels.empty()) {
            fail("labels", "must not be empty");
        }
        if (j.contains("domain") && j["domain"].is_string()) {
            r.domain = j["domain"].get<std::string>();
        }
        if (j.contains("genre_tags") && j["genre_tags"].is_array()) {
            r.genre_tags = j["genre_tags"].get<std::vector<std::string>>();
        }
        if (j.contains("group") && !j["group"].is_null()) {
            if (!j["group"].is_number_integer() || j["group"].get<int>() < 0) {
                fail("group", "must be a non-negative integer");
            }
            r.group = j["group"].get<int>();
        }
        if (j.contains("planted_position") && j["planted_position"].is_number()) {
            r.planted_position = j["planted_position"].get<double>();
        }
        if (!seen.insert(r.id).second) {
            fail("id", "duplicate document id '" + r.id + "'");
        }
        records.push_back(std::move(r));
    }
    return records;
}

} // namespace structoscope
