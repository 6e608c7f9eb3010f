#ifndef STRUCTOSCOPE_SEQUENCE_HPP
#define STRUCTOSCOPE_SEQUENCE_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace structoscope {

using Labels = std::vector<int>;

/// Cluster label per segment of one document plus its run-length form.
struct BlockSequence {
    std::string doc_id;
    Labels labels;
    Labels compressed;

    static BlockSequence from_labels(std::string doc_id, Labels labels);
    bool operator==(const BlockSequence&) const = default;
};

/// A boundary between two runs. `position` is the 1-based index of the
/// first segment of the incoming run divided by the segment count.
struct TransitionEvent {
    int from_label = 0;
    int to_label = 0;
    double position = 0.0;
    std::string doc_id;
    bool operator==(const TransitionEvent&) const = default;
};

Labels run_length_encode(std::span<const int> labels);

std::vector<TransitionEvent> extract_transitions(const BlockSequence& seq);

/// Levenshtein distance with unit costs.
int edit_distance(std::span<const int> a, std::span<const int> b);

/// Dense symmetric matrix of pairwise distances.
struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> values;

    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t size) : n(size), values(size * size, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// Throws ValidationError unless the matrix is square, symmetric, has a zero
/// diagonal and nonnegative finite entries.
void validate_distance_matrix(const DistanceMatrix& d);

/// Edit distances between all pairs; `normalize` divides each by the longer
/// length (0 for two empty sequences).
DistanceMatrix pairwise_edit_distances(std::span<const Labels> sequences, bool normalize = false,
                                       int threads = 1);

struct PamResult {
    std::vector<std::size_t> medoids;    // ascending item indices
    std::vector<std::size_t> assignment; // nearest medoid (position in `medoids`) per item
    double cost = 0.0;                   // sum of distances to nearest medoid
    int swaps = 0;
};

/// Sum over items of the distance to the closest of `medoids`.
double medoid_cost(const DistanceMatrix& d, std::span<const std::size_t> medoids);

/// PAM: greedy BUILD, then SWAP until no single medoid/non-medoid exchange
/// lowers the cost. Ties resolve to the lowest index. When the number of
/// candidate medoid sets is small, the SWAP result is replaced by the exact
/// optimum if that is strictly cheaper.
PamResult pam(const DistanceMatrix& d, int m);

struct MedoidSet {
    int group = -1;
    std::vector<Labels> medoids;
    std::vector<std::size_t> medoid_indices;
    double assignment_cost = 0.0;
};

MedoidSet k_medoids(std::span<const Labels> sequences, int m, const DistanceMatrix& dist);

/// A document's block sequence with the metadata needed for grouping.
struct SequenceRecord {
    std::string id;
    std::string domain;
    std::vector<std::string> genre_tags;
    double eval_score = 0.0;
    std::optional<int> group;
    Labels labels;
    std::optional<double> planted_position;

    bool operator==(const SequenceRecord&) const = default;
};

/// `{"id", "eval_score", "labels": [int]}` per line; group, domain,
/// genre_tags and planted_position are optional. A "compressed" field is
/// written for readers and ignored on input.
void write_sequences_jsonl(std::span<const SequenceRecord> records, const std::filesystem::path& path);
std::vector<SequenceRecord> read_sequences_jsonl(const std::filesystem::path& path);

} // namespace structoscope

#endif
