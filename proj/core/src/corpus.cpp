#include "structoscope/corpus.hpp"

#include "structoscope/error.hpp"
#include "structoscope/ud_inventory.hpp"

#include "io_util.hpp"
#include "parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>

namespace structoscope {

using nlohmann::json;

const Document* Corpus::find(std::string_view id) const
{
    for (const auto& doc : documents) {
        if (doc.id == id) {
            return &doc;
        }
    }
    return nullptr;
}

std::size_t Corpus::segment_count() const
{
    std::size_t n = 0;
    for (const auto& doc : documents) {
        n += doc.segments.size();
    }
    return n;
}

std::optional<CorpusFormat> parse_corpus_format(std::string_view name)
{
    if (name == "jsonl") {
        return CorpusFormat::jsonl;
    }
    if (name == "conllu_dir") {
        return CorpusFormat::conllu_dir;
    }
    if (name == "subtitle_jsonl") {
        return CorpusFormat::subtitle_jsonl;
    }
    return std::nullopt;
}

std::string_view to_string(CorpusFormat format)
{
    switch (format) {
    case CorpusFormat::jsonl: return "jsonl";
    case CorpusFormat::conllu_dir: return "conllu_dir";
    case CorpusFormat::subtitle_jsonl: return "subtitle_jsonl";
    }
    return "?";
}

std::vector<std::string> tokenize(std::string_view text)
{
    auto is_word = [](unsigned char c) {
        return std::isalnum(c) != 0 || c >= 0x80;
    };
    std::vector<std::string> tokens;
    std::string current;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_word(c)) {
            current.push_back(static_cast<char>(c));
            continue;
        }
        const bool joiner = (c == '\'' || c == '-') && !current.empty()
            && i + 1 < text.size() && is_word(static_cast<unsigned char>(text[i + 1]));
        if (joiner) {
            current.push_back(static_cast<char>(c));
            continue;
        }
        if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

namespace {

class RecordError {
public:
    RecordError(std::string file, std::size_t line, std::string id)
        : file_(std::move(file)), line_(line), id_(std::move(id)) {}

    [[noreturn]] void fail(std::string_view field, std::string_view what) const
    {
        std::ostringstream msg;
        msg << file_ << ':' << line_;
        if (!id_.empty()) {
            msg << " (record '" << id_ << "')";
        }
        msg << ": field '" << field << "': " << what;
        throw DataError(msg.str());
    }

    void set_id(std::string id) { id_ = std::move(id); }

private:
    std::string file_;
    std::size_t line_;
    std::string id_;
};

std::vector<Token> parse_token_array(const json& arr, const RecordError& err)
{
    if (!arr.is_array()) {
        err.fail("tokens", "must be an array");
    }
    std::vector<Token> tokens;
    tokens.reserve(arr.size());
    for (const auto& t : arr) {
        if (!t.is_object() || !t.contains("form") || !t["form"].is_string()) {
            err.fail("tokens[].form", "must be a string");
        }
        Token tok;
        tok.surface = t["form"].get<std::string>();
        if (auto it = t.find("upos"); it != t.end() && !it->is_null()) {
            if (!it->is_string()) {
                err.fail("tokens[].upos", "must be a string");
            }
            auto idx = upos_index(it->get<std::string>());
            if (!idx) {
                err.fail("tokens[].upos", "unknown UPOS tag '" + it->get<std::string>() + "'");
            }
            tok.upos = idx;
        }
        if (auto it = t.find("deprel"); it != t.end() && !it->is_null()) {
            if (!it->is_string()) {
                err.fail("tokens[].deprel", "must be a string");
            }
            auto idx = deprel_index(it->get<std::string>());
            if (!idx) {
                err.fail("tokens[].deprel", "unknown dependency label '" + it->get<std::string>() + "'");
            }
            tok.deprel = idx;
        }
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

std::optional<double> optional_number(const json& obj, const char* key, const RecordError& err)
{
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return std::nullopt;
    }
    if (!it->is_number()) {
        err.fail(key, "must be a number");
    }
    const double v = it->get<double>();
    if (!std::isfinite(v)) {
        err.fail(key, "must be finite");
    }
    return v;
}

// Returns false when the document has no non-empty segment.
bool finalize_segments(Document& doc, CorpusMeta& meta)
{
    std::size_t before = doc.segments.size();
    std::erase_if(doc.segments, [](const Segment& s) { return s.tokens.empty(); });
    const std::size_t dropped = before - doc.segments.size();
    if (dropped > 0) {
        meta.dropped_empty_segments += dropped;
        meta.warnings.push_back("document '" + doc.id + "': dropped " + std::to_string(dropped)
                                + " empty segment(s)");
    }
    for (std::size_t i = 0; i < doc.segments.size(); ++i) {
        doc.segments[i].index = static_cast<int>(i);
    }
    return !doc.segments.empty();
}

Document parse_jsonl_record(const json& rec, bool subtitle, const RecordError& base_err)
{
    RecordError err = base_err;
    if (!rec.is_object()) {
        err.fail("<record>", "must be a JSON object");
    }
    Document doc;
    auto id_it = rec.find("id");
    if (id_it == rec.end() || !id_it->is_string() || id_it->get<std::string>().empty()) {
        err.fail("id", "must be a non-empty string");
    }
    doc.id = id_it->get<std::string>();
    err.set_id(doc.id);

    if (auto it = rec.find("domain"); it != rec.end() && !it->is_null()) {
        if (!it->is_string()) {
            err.fail("domain", "must be a string");
        }
        doc.domain = it->get<std::string>();
    }
    if (auto it = rec.find("genre_tags"); it != rec.end() && !it->is_null()) {
        if (!it->is_array()) {
            err.fail("genre_tags", "must be an array of strings");
        }
        for (const auto& g : *it) {
            if (!g.is_string()) {
                err.fail("genre_tags", "must be an array of strings");
            }
            doc.genre_tags.push_back(g.get<std::string>());
        }
    }
    auto score_it = rec.find("eval_score");
    if (score_it == rec.end() || !score_it->is_number()) {
        err.fail("eval_score", "must be a finite number");
    }
    doc.eval_score = score_it->get<double>();
    if (!std::isfinite(doc.eval_score)) {
        err.fail("eval_score", "must be a finite number");
    }
    if (auto it = rec.find("group"); it != rec.end() && !it->is_null()) {
        if (!it->is_number_integer() || it->get<long long>() < 0) {
            err.fail("group", "must be a non-negative integer");
        }
        doc.group = static_cast<int>(it->get<long long>());
    }

    auto segs_it = rec.find("segments");
    if (segs_it == rec.end() || !segs_it->is_array()) {
        err.fail("segments", "must be an array");
    }
    for (const auto& s : *segs_it) {
        if (!s.is_object()) {
            err.fail("segments[]", "must be an object");
        }
        Segment seg;
        auto text_it = s.find("text");
        if (text_it != s.end() && !text_it->is_null()) {
            if (!text_it->is_string()) {
                err.fail("segments[].text", "must be a string");
            }
            seg.raw_text = text_it->get<std::string>();
        }
        if (auto tok_it = s.find("tokens"); tok_it != s.end()) {
            seg.tokens = parse_token_array(*tok_it, err);
        } else if (seg.raw_text) {
            for (auto& w : tokenize(*seg.raw_text)) {
                seg.tokens.push_back(Token{std::move(w), std::nullopt, std::nullopt, false});
            }
        } else {
            err.fail("segments[].text", "missing (and no tokens given)");
        }
        seg.time_start = optional_number(s, "time_start", err);
        seg.time_end = optional_number(s, "time_end", err);
        if (subtitle && (!seg.time_start || !seg.time_end)) {
            err.fail("segments[].time_start/time_end", "required for subtitle cues");
        }
        if (seg.time_start && seg.time_end && *seg.time_end < *seg.time_start) {
            err.fail("segments[].time_end", "precedes time_start");
        }
        doc.segments.push_back(std::move(seg));
    }
    return doc;
}

void check_unique_ids(const std::vector<Document>& docs, const std::string& source)
{
    std::unordered_set<std::string_view> seen;
    for (const auto& d : docs) {
        if (!seen.insert(d.id).second) {
            throw DataError(source + ": duplicate document id '" + d.id + "'");
        }
    }
}

Corpus load_jsonl(const std::filesystem::path& path, bool subtitle)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open corpus file " + path.string());
    }
    Corpus corpus;
    corpus.meta.source_paths.push_back(path.string());
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        RecordError err(path.string(), line_no, "");
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            // Name the record even when the line is not valid JSON (e.g. a bare NaN score).
            static const std::regex kIdPattern(R"re("id"\s*:\s*"([^"]*)")re");
            std::smatch m;
            if (std::regex_search(line, m, kIdPattern)) {
                err.set_id(m[1].str());
            }
            err.fail("<record>", std::string("invalid JSON: ") + e.what());
        }
        Document doc = parse_jsonl_record(rec, subtitle, err);
        if (!seen.insert(doc.id).second) {
            throw DataError(path.string() + ":" + std::to_string(line_no)
                            + ": duplicate document id '" + doc.id + "'");
        }
        if (!finalize_segments(doc, corpus.meta)) {
            ++corpus.meta.dropped_empty_documents;
            corpus.meta.warnings.push_back("document '" + doc.id + "' has no non-empty segment; dropped");
            continue;
        }
        corpus.documents.push_back(std::move(doc));
    }
    return corpus;
}

struct DocMetadata {
    std::optional<std::string> domain;
    std::optional<std::vector<std::string>> genre_tags;
    std::optional<double> eval_score;
};

std::map<std::string, DocMetadata> load_sidecar(const std::filesystem::path& path)
{
    std::map<std::string, DocMetadata> out;
    std::ifstream in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        RecordError err(path.string(), line_no, "");
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            err.fail("<record>", std::string("invalid JSON: ") + e.what());
        }
        if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string()) {
            err.fail("id", "must be a non-empty string");
        }
        DocMetadata md;
        err.set_id(rec["id"].get<std::string>());
        if (rec.contains("domain") && rec["domain"].is_string()) {
            md.domain = rec["domain"].get<std::string>();
        }
        if (rec.contains("genre_tags") && rec["genre_tags"].is_array()) {
            md.genre_tags = rec["genre_tags"].get<std::vector<std::string>>();
        }
        md.eval_score = optional_number(rec, "eval_score", err);
        out[rec["id"].get<std::string>()] = std::move(md);
    }
    return out;
}

struct ConlluParse {
    Document doc;
    bool has_score = false;
};

ConlluParse parse_conllu_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    ConlluParse out;
    Document& doc = out.doc;
    doc.id = path.stem().string();

    std::optional<long long> last_segment_id;
    bool segment_open = false;
    std::string text_acc;
    auto open_segment = [&] {
        doc.segments.emplace_back();
        doc.segments.back().index = static_cast<int>(doc.segments.size()) - 1;
        segment_open = true;
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        auto where = [&] { return path.string() + ":" + std::to_string(line_no); };
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            auto body = detail::trim(std::string_view(line).substr(1));
            auto eq = body.find('=');
            if (eq == std::string_view::npos) {
                continue;
            }
            auto key = detail::trim(body.substr(0, eq));
            auto value = detail::trim(body.substr(eq + 1));
            if (key == "segment_id") {
                long long sid = 0;
                try {
                    sid = std::stoll(std::string(value));
                } catch (const std::exception&) {
                    throw DataError(where() + ": field 'segment_id': not an integer");
                }
                if (last_segment_id && sid <= *last_segment_id) {
                    throw DataError(where() + ": field 'segment_id': must increase monotonically");
                }
                last_segment_id = sid;
                open_segment();
            } else if (key == "eval_score") {
                doc.eval_score = detail::parse_double(value, where() + ": field 'eval_score'");
                if (!std::isfinite(doc.eval_score)) {
                    throw DataError(where() + ": field 'eval_score': must be a finite number");
                }
                out.has_score = true;
            } else if (key == "domain") {
                doc.domain = std::string(value);
            } else if (key == "genre_tags") {
                doc.genre_tags.clear();
                for (auto& g : detail::split(value, ',')) {
                    auto t = detail::trim(g);
                    if (!t.empty()) {
                        doc.genre_tags.emplace_back(t);
                    }
                }
            } else if (key == "text") {
                if (!segment_open) {
                    open_segment();
                }
                auto& raw = doc.segments.back().raw_text;
                if (raw) {
                    *raw += ' ';
                    *raw += value;
                } else {
                    raw = std::string(value);
                }
            }
            continue;
        }
        auto cols = detail::split(line, '\t');
        if (cols.size() != 10) {
            throw DataError(where() + ": expected 10 tab-separated columns, got "
                            + std::to_string(cols.size()));
        }
        if (cols[0].find('-') != std::string::npos || cols[0].find('.') != std::string::npos) {
            continue; // multiword token range or empty node
        }
        if (!segment_open) {
            open_segment();
        }
        Token tok;
        tok.surface = cols[1];
        if (cols[3] != "_") {
            tok.upos = upos_index(cols[3]);
            if (!tok.upos) {
                throw DataError(where() + ": field 'UPOS': unknown tag '" + cols[3] + "'");
            }
        }
        if (cols[7] != "_") {
            tok.deprel = deprel_index(cols[7]);
            if (!tok.deprel) {
                throw DataError(where() + ": field 'DEPREL': unknown label '" + cols[7] + "'");
            }
        }
        doc.segments.back().tokens.push_back(std::move(tok));
    }
    return out;
}

Corpus load_conllu_dir(const std::filesystem::path& dir, const LoadOptions& options)
{
    if (!std::filesystem::is_directory(dir)) {
        throw DataError(dir.string() + ": not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".conllu") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.stem().string() < b.stem().string(); });

    std::map<std::string, DocMetadata> sidecar;
    const auto sidecar_path = dir / "metadata.jsonl";
    if (std::filesystem::exists(sidecar_path)) {
        sidecar = load_sidecar(sidecar_path);
    }

    std::vector<ConlluParse> parsed(files.size());
    std::vector<std::string> errors(files.size());
    detail::parallel_for(files.size(), options.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            try {
                parsed[i] = parse_conllu_file(files[i]);
            } catch (const DataError& err) {
                errors[i] = err.what();
            }
        }
    });
    for (const auto& msg : errors) {
        if (!msg.empty()) {
            throw DataError(msg);
        }
    }

    Corpus corpus;
    corpus.meta.source_paths.push_back(dir.string());
    for (std::size_t i = 0; i < files.size(); ++i) {
        auto& p = parsed[i];
        if (auto it = sidecar.find(p.doc.id); it != sidecar.end()) {
            const auto& md = it->second;
            if (md.domain && p.doc.domain.empty()) {
                p.doc.domain = *md.domain;
            }
            if (md.genre_tags && p.doc.genre_tags.empty()) {
                p.doc.genre_tags = *md.genre_tags;
            }
            if (md.eval_score && !p.has_score) {
                p.doc.eval_score = *md.eval_score;
                p.has_score = true;
            }
        }
        if (!p.has_score) {
            throw DataError(files[i].string() + ": field 'eval_score': missing (no '# eval_score =' "
                            "comment and no metadata.jsonl entry)");
        }
        if (!finalize_segments(p.doc, corpus.meta)) {
            ++corpus.meta.dropped_empty_documents;
            corpus.meta.warnings.push_back("document '" + p.doc.id + "' has no tokens; dropped");
            continue;
        }
        corpus.documents.push_back(std::move(p.doc));
    }
    check_unique_ids(corpus.documents, dir.string());
    return corpus;
}

} // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, const LoadOptions& options)
{
    if (!std::filesystem::exists(path)) {
        throw DataError("corpus path does not exist: " + path.string());
    }
    switch (format) {
    case CorpusFormat::jsonl: return load_jsonl(path, false);
    case CorpusFormat::subtitle_jsonl: return load_jsonl(path, true);
    case CorpusFormat::conllu_dir: return load_conllu_dir(path, options);
    }
    throw ValidationError("unknown corpus format");
}

namespace {

bool text_reproduces_tokens(const Segment& seg)
{
    if (!seg.raw_text) {
        return false;
    }
    for (const auto& t : seg.tokens) {
        if (t.upos || t.deprel) {
            return false;
        }
    }
    auto words = tokenize(*seg.raw_text);
    if (words.size() != seg.tokens.size()) {
        return false;
    }
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (words[i] != seg.tokens[i].surface) {
            return false;
        }
    }
    return true;
}

} // namespace

void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path)
{
    std::string out;
    for (const auto& doc : corpus.documents) {
        json rec;
        rec["id"] = doc.id;
        rec["domain"] = doc.domain;
        rec["genre_tags"] = doc.genre_tags;
        rec["eval_score"] = doc.eval_score;
        if (doc.group) {
            rec["group"] = *doc.group;
        }
        json segs = json::array();
        for (const auto& seg : doc.segments) {
            json s = json::object();
            if (seg.raw_text) {
                s["text"] = *seg.raw_text;
            }
            if (seg.time_start) {
                s["time_start"] = *seg.time_start;
            }
            if (seg.time_end) {
                s["time_end"] = *seg.time_end;
            }
            if (!text_reproduces_tokens(seg)) {
                json toks = json::array();
                for (const auto& t : seg.tokens) {
                    json tj;
                    tj["form"] = t.surface;
                    if (t.upos) {
                        tj["upos"] = std::string(kUposNames[*t.upos]);
                    }
                    if (t.deprel) {
                        tj["deprel"] = std::string(kDeprelNames[*t.deprel]);
                    }
                    toks.push_back(std::move(tj));
                }
                s["tokens"] = std::move(toks);
            }
            segs.push_back(std::move(s));
        }
        rec["segments"] = std::move(segs);
        out += rec.dump();
        out += '\n';
    }
    detail::write_text_file(path, out);
}

double quantile_sorted(const std::vector<double>& sorted, double p)
{
    if (sorted.empty()) {
        throw ValidationError("quantile of empty sample");
    }
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

IqrFilterInfo tukey_fences(std::vector<double> counts, double multiplier)
{
    if (counts.empty()) {
        throw ValidationError("iqr_filter: corpus is empty");
    }
    if (!(multiplier >= 0.0)) {
        throw ValidationError("iqr_filter: multiplier must be non-negative");
    }
    std::sort(counts.begin(), counts.end());
    IqrFilterInfo info;
    info.applied = true;
    info.multiplier = multiplier;
    info.q1 = quantile_sorted(counts, 0.25);
    info.q3 = quantile_sorted(counts, 0.75);
    const double iqr = info.q3 - info.q1;
    info.lower_fence = info.q1 - multiplier * iqr;
    info.upper_fence = info.q3 + multiplier * iqr;
    return info;
}

Corpus iqr_filter(const Corpus& corpus, double multiplier)
{
    std::vector<double> counts;
    counts.reserve(corpus.documents.size());
    for (const auto& d : corpus.documents) {
        counts.push_back(static_cast<double>(d.segments.size()));
    }
    IqrFilterInfo info = tukey_fences(counts, multiplier);

    Corpus out;
    out.meta = corpus.meta;
    for (const auto& d : corpus.documents) {
        const auto n = static_cast<double>(d.segments.size());
        if (n >= info.lower_fence && n <= info.upper_fence) {
            out.documents.push_back(d);
        }
    }
    info.dropped = corpus.documents.size() - out.documents.size();
    info.empty_result = out.documents.empty();
    out.meta.iqr = info;
    return out;
}

std::vector<int> rank_groups(const std::vector<double>& scores,
                             const std::vector<std::string>& ids, int n_bins)
{
    if (n_bins < 1) {
        throw ValidationError("rank_bin: n_bins must be >= 1");
    }
    const std::size_t n = scores.size();
    if (n < static_cast<std::size_t>(n_bins)) {
        throw ValidationError("rank_bin: " + std::to_string(n) + " documents for "
                              + std::to_string(n_bins) + " bins");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) {
            return scores[a] < scores[b];
        }
        return ids[a] < ids[b];
    });
    std::vector<int> groups(n);
    for (std::size_t r = 0; r < n; ++r) {
        groups[order[r]] = static_cast<int>(r * static_cast<std::size_t>(n_bins) / n);
    }
    return groups;
}

Corpus rank_bin(const Corpus& corpus, int n_bins)
{
    std::vector<double> scores;
    std::vector<std::string> ids;
    for (const auto& d : corpus.documents) {
        scores.push_back(d.eval_score);
        ids.push_back(d.id);
    }
    const auto groups = rank_groups(scores, ids, n_bins);
    Corpus out = corpus;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        out.documents[i].group = groups[i];
    }
    return out;
}

} // namespace structoscope
