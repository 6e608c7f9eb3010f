#ifndef STRUCTOSCOPE_LEXICON_HPP
#define STRUCTOSCOPE_LEXICON_HPP

#include "structoscope/corpus.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace structoscope {

struct AffectEntry {
    double polarity = 0.0;  // [-1, 1]
    double intensity = 0.0; // [0, 1]
};

/// Stopword list and affect lexicon. Lookups are ASCII case-insensitive.
class Lexicons {
public:
    Lexicons(std::vector<std::string> stopwords,
             std::vector<std::pair<std::string, AffectEntry>> affect,
             std::string id);

    /// Built-in English lists.
    static Lexicons builtin_english();

    /// Stopwords: one per line ('#' comments allowed). Affect: TSV with
    /// columns surface, polarity, intensity. Without an affect path the
    /// built-in affect list is used.
    static Lexicons from_files(const std::filesystem::path& stopwords,
                               const std::optional<std::filesystem::path>& affect);

    const std::vector<std::string>& stopwords() const { return stopwords_; }
    const std::vector<std::string>& affect_words() const { return affect_words_; }
    const std::vector<AffectEntry>& affect_values() const { return affect_values_; }
    const std::string& id() const { return id_; }

    std::optional<std::size_t> stopword_index(std::string_view surface) const;
    std::optional<std::size_t> affect_index(std::string_view surface) const;

private:
    std::vector<std::string> stopwords_;
    std::vector<std::string> affect_words_;
    std::vector<AffectEntry> affect_values_;
    std::unordered_map<std::string, std::size_t> stop_lookup_;
    std::unordered_map<std::string, std::size_t> affect_lookup_;
    std::string id_;
};

/// Sets Token::is_stopword for every token and records the lexicon id.
void apply_lexicon(Corpus& corpus, const Lexicons& lexicons);

} // namespace structoscope

#endif
