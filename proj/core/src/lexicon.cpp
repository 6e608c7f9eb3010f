#include "structoscope/lexicon.hpp"

#include "structoscope/error.hpp"

#include "io_util.hpp"

#include <array>
#include <cmath>

namespace structoscope {

namespace {

constexpr std::string_view kEnglishStopwords[] = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your",
    "yours", "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers",
    "herself", "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what",
    "which", "who", "whom", "this", "that", "these", "those", "am", "is", "are",
    "was", "were", "be", "been", "being", "have", "has", "had", "having", "do",
    "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
    "because", "as", "until", "while", "of", "at", "by", "for", "with", "about",
    "against", "between", "into", "through", "during", "before", "after", "above", "below", "to",
    "from", "up", "down", "in", "out", "on", "off", "over", "under", "again",
    "further", "then", "once", "here", "there", "when", "where", "why", "how", "all",
    "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
    "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s",
    "t", "can", "will", "just", "don", "should", "now"};

struct BuiltinAffect {
    std::string_view word;
    double polarity;
    double intensity;
};

// Small hand-assigned list; replace with a curated lexicon via from_files().
constexpr BuiltinAffect kEnglishAffect[] = {
    {"love", 0.9, 0.8}, {"joy", 0.9, 0.7}, {"happy", 0.8, 0.6}, {"delight", 0.8, 0.7},
    {"hope", 0.6, 0.5}, {"calm", 0.4, 0.2}, {"gentle", 0.5, 0.3}, {"warm", 0.5, 0.3},
    {"kind", 0.6, 0.4}, {"brave", 0.6, 0.6}, {"triumph", 0.9, 0.9}, {"victory", 0.8, 0.8},
    {"smile", 0.7, 0.4}, {"laugh", 0.7, 0.5}, {"beautiful", 0.8, 0.5}, {"peace", 0.7, 0.3},
    {"trust", 0.6, 0.4}, {"grateful", 0.8, 0.5}, {"proud", 0.6, 0.6}, {"relief", 0.6, 0.5},
    {"success", 0.8, 0.6}, {"win", 0.7, 0.6}, {"good", 0.5, 0.3}, {"great", 0.7, 0.5},
    {"excellent", 0.9, 0.6}, {"wonderful", 0.9, 0.7}, {"friend", 0.5, 0.3}, {"comfort", 0.5, 0.3},
    {"bright", 0.5, 0.4}, {"excited", 0.7, 0.8}, {"thrilled", 0.8, 0.9}, {"admire", 0.6, 0.5},
    {"cherish", 0.8, 0.6}, {"safe", 0.5, 0.3}, {"sweet", 0.6, 0.4}, {"fine", 0.3, 0.2},
    {"clear", 0.2, 0.1}, {"improve", 0.4, 0.3}, {"support", 0.4, 0.3}, {"benefit", 0.5, 0.3},
    {"hate", -0.9, 0.9}, {"fear", -0.7, 0.8}, {"sad", -0.7, 0.5}, {"angry", -0.8, 0.8},
    {"rage", -0.9, 1.0}, {"grief", -0.8, 0.8}, {"pain", -0.7, 0.7}, {"cry", -0.5, 0.6},
    {"death", -0.8, 0.8}, {"kill", -0.9, 0.9}, {"murder", -1.0, 1.0}, {"terror", -0.9, 1.0},
    {"dark", -0.4, 0.4}, {"cold", -0.3, 0.3}, {"lonely", -0.6, 0.5}, {"lost", -0.5, 0.4},
    {"fail", -0.6, 0.5}, {"failure", -0.7, 0.6}, {"bad", -0.5, 0.4}, {"terrible", -0.8, 0.7},
    {"awful", -0.8, 0.7}, {"horrible", -0.9, 0.8}, {"betray", -0.8, 0.8}, {"guilt", -0.6, 0.6},
    {"shame", -0.7, 0.6}, {"worry", -0.5, 0.5}, {"anxious", -0.5, 0.6}, {"danger", -0.6, 0.7},
    {"threat", -0.6, 0.7}, {"wound", -0.6, 0.6}, {"broken", -0.6, 0.5}, {"cruel", -0.8, 0.7},
    {"bitter", -0.6, 0.5}, {"despair", -0.9, 0.9}, {"panic", -0.7, 0.9}, {"problem", -0.4, 0.3},
    {"error", -0.4, 0.3}, {"risk", -0.3, 0.4}, {"weak", -0.4, 0.3}, {"doubt", -0.4, 0.4},
};

void check_affect(const std::string& word, const AffectEntry& e)
{
    if (!(e.polarity >= -1.0 && e.polarity <= 1.0) || !(e.intensity >= 0.0 && e.intensity <= 1.0)) {
        throw ValidationError("affect lexicon entry '" + word + "' out of range");
    }
}

} // namespace

Lexicons::Lexicons(std::vector<std::string> stopwords,
                   std::vector<std::pair<std::string, AffectEntry>> affect, std::string id)
    : id_(std::move(id))
{
    if (stopwords.empty()) {
        throw ValidationError("stopword list is empty");
    }
    for (auto& w : stopwords) {
        auto key = detail::to_lower_ascii(w);
        if (stop_lookup_.emplace(key, stopwords_.size()).second) {
            stopwords_.push_back(std::move(key));
        }
    }
    for (auto& [word, entry] : affect) {
        check_affect(word, entry);
        auto key = detail::to_lower_ascii(word);
        if (affect_lookup_.emplace(key, affect_words_.size()).second) {
            affect_words_.push_back(std::move(key));
            affect_values_.push_back(entry);
        }
    }
}

Lexicons Lexicons::builtin_english()
{
    std::vector<std::string> stop(std::begin(kEnglishStopwords), std::end(kEnglishStopwords));
    std::vector<std::pair<std::string, AffectEntry>> affect;
    for (const auto& e : kEnglishAffect) {
        affect.emplace_back(std::string(e.word), AffectEntry{e.polarity, e.intensity});
    }
    return Lexicons(std::move(stop), std::move(affect), "builtin-en-1");
}

Lexicons Lexicons::from_files(const std::filesystem::path& stopwords,
                              const std::optional<std::filesystem::path>& affect)
{
    const auto stop_text = detail::read_text_file(stopwords);
    std::vector<std::string> stop;
    for (auto& line : detail::split(stop_text, '\n')) {
        auto w = detail::trim(line);
        if (!w.empty() && w.front() != '#') {
            stop.emplace_back(w);
        }
    }
    std::string id = "stop:" + detail::sha256_hex(stop_text).substr(0, 16);

    std::vector<std::pair<std::string, AffectEntry>> entries;
    if (affect) {
        const auto affect_text = detail::read_text_file(*affect);
        std::size_t line_no = 0;
        for (auto& line : detail::split(affect_text, '\n')) {
            ++line_no;
            auto body = detail::trim(line);
            if (body.empty() || body.front() == '#') {
                continue;
            }
            auto cols = detail::split(body, '\t');
            const auto where = affect->string() + ":" + std::to_string(line_no);
            if (cols.size() != 3) {
                throw DataError(where + ": expected 3 tab-separated columns (surface, polarity, intensity)");
            }
            AffectEntry e{detail::parse_double(cols[1], where + ": polarity"),
                          detail::parse_double(cols[2], where + ": intensity")};
            if (!(e.polarity >= -1.0 && e.polarity <= 1.0)) {
                throw DataError(where + ": polarity outside [-1, 1]");
            }
            if (!(e.intensity >= 0.0 && e.intensity <= 1.0)) {
                throw DataError(where + ": intensity outside [0, 1]");
            }
            entries.emplace_back(std::string(detail::trim(cols[0])), e);
        }
        id += "+affect:" + detail::sha256_hex(affect_text).substr(0, 16);
    } else {
        for (const auto& e : kEnglishAffect) {
            entries.emplace_back(std::string(e.word), AffectEntry{e.polarity, e.intensity});
        }
        id += "+affect:builtin-en-1";
    }
    return Lexicons(std::move(stop), std::move(entries), std::move(id));
}

std::optional<std::size_t> Lexicons::stopword_index(std::string_view surface) const
{
    auto it = stop_lookup_.find(detail::to_lower_ascii(surface));
    if (it == stop_lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<std::size_t> Lexicons::affect_index(std::string_view surface) const
{
    auto it = affect_lookup_.find(detail::to_lower_ascii(surface));
    if (it == affect_lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void apply_lexicon(Corpus& corpus, const Lexicons& lexicons)
{
    for (auto& doc : corpus.documents) {
        for (auto& seg : doc.segments) {
            for (auto& tok : seg.tokens) {
                tok.is_stopword = lexicons.stopword_index(tok.surface).has_value();
            }
        }
    }
    corpus.meta.lexicon_ids.push_back(lexicons.id());
}

} // namespace structoscope
