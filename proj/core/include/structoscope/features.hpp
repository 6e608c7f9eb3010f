#ifndef STRUCTOSCOPE_FEATURES_HPP
#define STRUCTOSCOPE_FEATURES_HPP

#include "structoscope/corpus.hpp"
#include "structoscope/lexicon.hpp"
#include "structoscope/ud_inventory.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace structoscope {

enum class Family : std::uint8_t {
    pos = 1u << 0,
    deprel = 1u << 1,
    stop = 1u << 2,
    affect = 1u << 3,
};

struct FamilyWeights {
    double pos = 1.0;
    double deprel = 1.0;
    double stop = 1.0;
    double affect = 1.0;
};

/// Per-segment distributions. Absent families are all-zero (affect reads
/// as neutral: polarity01 = 0.5, intensity = 0) with their flag cleared.
struct FeatureVector {
    std::array<double, kNumUpos> pos{};
    std::array<double, kNumDeprel> deprel{};
    std::vector<double> stop;    // one entry per lexicon stopword
    double stop_share = 0.0;     // stopword tokens / all tokens
    double polarity01 = 0.5;     // mean polarity mapped from [-1, 1] to [0, 1]
    double intensity = 0.0;
    std::uint8_t present = 0;

    bool has(Family f) const { return (present & static_cast<std::uint8_t>(f)) != 0; }
    bool operator==(const FeatureVector&) const = default;
};

FeatureVector extract_features(const Segment& segment, const Lexicons& lexicons);

struct RowKey {
    std::string doc_id;
    int segment = 0;
    bool operator==(const RowKey&) const = default;
};

/// Row-major segment-by-dimension matrix. After assemble_matrix each column
/// with nonzero variance has mean 0 and population std 1; constant columns
/// are 0 and report std 0.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<std::string> dim_names;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<RowKey> row_index;
    std::uint8_t families = 0; // which family blocks are columns
    FamilyWeights weights;
    bool standardized = false;

    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Concatenated, weighted family blocks without standardization. POS and
/// DEPREL blocks are included only when the corpus is annotated; a corpus
/// mixing annotated and unannotated documents is rejected with a DataError
/// naming the minority documents.
FeatureMatrix assemble_unstandardized(const Corpus& corpus, const Lexicons& lexicons,
                                      const FamilyWeights& weights = {}, int threads = 1);

/// Population z-scoring per column, in place.
void standardize(FeatureMatrix& matrix);

FeatureMatrix assemble_matrix(const Corpus& corpus, const Lexicons& lexicons,
                              const FamilyWeights& weights = {}, int threads = 1);

/// CSV with header `doc_id,segment,<dim names>`; the column statistics and
/// weights go to a JSON sidecar so the matrix can be reloaded exactly.
void write_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& csv_path,
                          const std::filesystem::path& meta_path);
FeatureMatrix read_feature_matrix(const std::filesystem::path& csv_path,
                                  const std::filesystem::path& meta_path);

} // namespace structoscope

#endif
