#ifndef STRUCTOSCOPE_CORPUS_HPP
#define STRUCTOSCOPE_CORPUS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace structoscope {

struct Token {
    std::string surface;
    std::optional<std::uint8_t> upos;   // index into kUposNames
    std::optional<std::uint8_t> deprel; // index into kDeprelNames
    bool is_stopword = false;           // set by apply_lexicon()

    bool operator==(const Token&) const = default;
};

struct Segment {
    int index = 0;
    std::vector<Token> tokens;
    std::optional<std::string> raw_text;
    std::optional<double> time_start;
    std::optional<double> time_end;

    bool operator==(const Segment&) const = default;
};

struct Document {
    std::string id;
    std::string domain;
    std::vector<std::string> genre_tags;
    double eval_score = 0.0;
    std::vector<Segment> segments;
    std::optional<int> group;

    bool operator==(const Document&) const = default;
};

struct IqrFilterInfo {
    bool applied = false;
    double multiplier = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double lower_fence = 0.0;
    double upper_fence = 0.0;
    std::size_t dropped = 0;
    bool empty_result = false;
};

struct CorpusMeta {
    std::vector<std::string> source_paths;
    std::vector<std::string> lexicon_ids;
    std::size_t dropped_empty_segments = 0;
    std::size_t dropped_empty_documents = 0;
    IqrFilterInfo iqr;
    std::vector<std::string> warnings;
};

struct Corpus {
    std::vector<Document> documents;
    CorpusMeta meta;

    const Document* find(std::string_view id) const;
    std::size_t segment_count() const;
};

enum class CorpusFormat { jsonl, conllu_dir, subtitle_jsonl };

std::optional<CorpusFormat> parse_corpus_format(std::string_view name);
std::string_view to_string(CorpusFormat format);

struct LoadOptions {
    int threads = 1;
};

/// Reads a corpus from disk. Throws DataError naming file, line and field on
/// malformed input, and on duplicate document ids. Segments without tokens
/// and documents without any segment are dropped and counted in meta.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const LoadOptions& options = {});

/// Writes the corpus as JSONL. Tokens, annotations, timestamps and group
/// assignments are kept so load_corpus(jsonl) reproduces the corpus exactly.
void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);

/// Word tokenizer used for raw text: runs of letters, digits and non-ASCII
/// bytes, with inner apostrophes and hyphens kept.
std::vector<std::string> tokenize(std::string_view text);

/// Tukey fences over per-document segment counts. Quartiles use linear
/// interpolation between order statistics.
Corpus iqr_filter(const Corpus& corpus, double multiplier = 1.5);

/// Assigns decile-style groups: documents sorted by (eval_score, id) and the
/// r-th of N gets floor(r * n_bins / N). Throws ValidationError if the corpus
/// has fewer documents than bins.
Corpus rank_bin(const Corpus& corpus, int n_bins = 10);

/// Group index per item for scores/ids in parallel arrays; shared by
/// rank_bin and the sequence-level pipeline.
std::vector<int> rank_groups(const std::vector<double>& scores,
                             const std::vector<std::string>& ids, int n_bins);

/// Quartiles and fences over a set of counts (not yet filtered).
IqrFilterInfo tukey_fences(std::vector<double> counts, double multiplier);

/// Linear-interpolation quantile of an ascending sample, p in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double p);

} // namespace structoscope

#endif
