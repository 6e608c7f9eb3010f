#include "structoscope/features.hpp"

#include "structoscope/error.hpp"

#include "io_util.hpp"
#include "parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace structoscope {

using nlohmann::json;

namespace {

constexpr std::uint8_t bit(Family f) { return static_cast<std::uint8_t>(f); }

} // namespace

FeatureVector extract_features(const Segment& segment, const Lexicons& lexicons)
{
    if (segment.tokens.empty()) {
        throw ValidationError("extract_features: segment " + std::to_string(segment.index)
                              + " has no tokens");
    }
    FeatureVector fv;
    fv.stop.assign(lexicons.stopwords().size(), 0.0);

    std::array<std::size_t, kNumUpos> pos_counts{};
    std::array<std::size_t, kNumDeprel> deprel_counts{};
    std::vector<std::size_t> stop_counts(lexicons.stopwords().size(), 0);
    std::vector<std::size_t> affect_counts(lexicons.affect_words().size(), 0);
    std::size_t n_pos = 0;
    std::size_t n_deprel = 0;
    std::size_t n_stop = 0;
    std::size_t n_affect = 0;

    for (const auto& tok : segment.tokens) {
        if (tok.upos) {
            ++pos_counts[*tok.upos];
            ++n_pos;
        }
        if (tok.deprel) {
            ++deprel_counts[*tok.deprel];
            ++n_deprel;
        }
        if (auto s = lexicons.stopword_index(tok.surface)) {
            ++stop_counts[*s];
            ++n_stop;
        }
        if (auto a = lexicons.affect_index(tok.surface)) {
            ++affect_counts[*a];
            ++n_affect;
        }
    }

    if (n_pos > 0) {
        for (std::size_t i = 0; i < kNumUpos; ++i) {
            fv.pos[i] = static_cast<double>(pos_counts[i]) / static_cast<double>(n_pos);
        }
        fv.present |= bit(Family::pos);
    }
    if (n_deprel > 0) {
        for (std::size_t i = 0; i < kNumDeprel; ++i) {
            fv.deprel[i] = static_cast<double>(deprel_counts[i]) / static_cast<double>(n_deprel);
        }
        fv.present |= bit(Family::deprel);
    }
    fv.stop_share = static_cast<double>(n_stop) / static_cast<double>(segment.tokens.size());
    if (n_stop > 0) {
        for (std::size_t i = 0; i < stop_counts.size(); ++i) {
            fv.stop[i] = static_cast<double>(stop_counts[i]) / static_cast<double>(n_stop);
        }
        fv.present |= bit(Family::stop);
    }
    if (n_affect > 0) {
        // Summed per lexicon entry in lexicon order, so token order and
        // uniform duplication cannot change the result.
        double polarity = 0.0;
        double intensity = 0.0;
        const auto& values = lexicons.affect_values();
        for (std::size_t i = 0; i < affect_counts.size(); ++i) {
            if (affect_counts[i] == 0) {
                continue;
            }
            const auto c = static_cast<double>(affect_counts[i]);
            polarity += c * values[i].polarity;
            intensity += c * values[i].intensity;
        }
        const auto hits = static_cast<double>(n_affect);
        fv.polarity01 = (polarity / hits + 1.0) / 2.0;
        fv.intensity = intensity / hits;
        fv.present |= bit(Family::affect);
    }
    return fv;
}

namespace {

struct Availability {
    bool pos = false;
    bool deprel = false;
};

Availability document_availability(const Document& doc)
{
    Availability a;
    for (const auto& seg : doc.segments) {
        for (const auto& tok : seg.tokens) {
            a.pos = a.pos || tok.upos.has_value();
            a.deprel = a.deprel || tok.deprel.has_value();
        }
    }
    return a;
}

void check_consistent(const Corpus& corpus, const std::vector<Availability>& avail,
                      bool Availability::*field, const char* family)
{
    std::vector<std::string> with;
    std::vector<std::string> without;
    for (std::size_t i = 0; i < avail.size(); ++i) {
        (avail[i].*field ? with : without).push_back(corpus.documents[i].id);
    }
    if (with.empty() || without.empty()) {
        return;
    }
    const bool minority_has = with.size() <= without.size();
    const auto& offenders = minority_has ? with : without;
    std::string msg = std::string("inconsistent ") + family + " availability: "
        + std::to_string(with.size()) + " document(s) annotated, " + std::to_string(without.size())
        + " not; offending ids (" + (minority_has ? "annotated" : "unannotated") + "):";
    for (std::size_t i = 0; i < offenders.size() && i < 20; ++i) {
        msg += ' ';
        msg += offenders[i];
    }
    if (offenders.size() > 20) {
        msg += " ...";
    }
    throw DataError(msg);
}

} // namespace

FeatureMatrix assemble_unstandardized(const Corpus& corpus, const Lexicons& lexicons,
                                      const FamilyWeights& weights, int threads)
{
    std::vector<Availability> avail;
    avail.reserve(corpus.documents.size());
    for (const auto& doc : corpus.documents) {
        avail.push_back(document_availability(doc));
    }
    check_consistent(corpus, avail, &Availability::pos, "POS");
    check_consistent(corpus, avail, &Availability::deprel, "DEPREL");
    const bool use_pos = !avail.empty() && avail.front().pos;
    const bool use_deprel = !avail.empty() && avail.front().deprel;

    FeatureMatrix m;
    m.weights = weights;
    m.families = bit(Family::stop) | bit(Family::affect);
    if (use_pos) {
        m.families |= bit(Family::pos);
        for (auto name : kUposNames) {
            m.dim_names.push_back("pos:" + std::string(name));
        }
    }
    if (use_deprel) {
        m.families |= bit(Family::deprel);
        for (auto name : kDeprelNames) {
            m.dim_names.push_back("deprel:" + std::string(name));
        }
    }
    for (const auto& w : lexicons.stopwords()) {
        m.dim_names.push_back("stop:" + w);
    }
    m.dim_names.push_back("stop_share");
    m.dim_names.push_back("affect:polarity");
    m.dim_names.push_back("affect:intensity");

    std::vector<const Segment*> segments;
    for (const auto& doc : corpus.documents) {
        for (const auto& seg : doc.segments) {
            segments.push_back(&seg);
            m.row_index.push_back(RowKey{doc.id, seg.index});
        }
    }
    m.rows = segments.size();
    m.cols = m.dim_names.size();
    m.values.assign(m.rows * m.cols, 0.0);

    detail::parallel_for(m.rows, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const FeatureVector fv = extract_features(*segments[r], lexicons);
            double* out = m.values.data() + r * m.cols;
            if (use_pos) {
                for (double v : fv.pos) {
                    *out++ = weights.pos * v;
                }
            }
            if (use_deprel) {
                for (double v : fv.deprel) {
                    *out++ = weights.deprel * v;
                }
            }
            for (double v : fv.stop) {
                *out++ = weights.stop * v;
            }
            *out++ = weights.stop * fv.stop_share;
            *out++ = weights.affect * fv.polarity01;
            *out++ = weights.affect * fv.intensity;
        }
    });
    return m;
}

void standardize(FeatureMatrix& m)
{
    m.mean.assign(m.cols, 0.0);
    m.stddev.assign(m.cols, 0.0);
    if (m.rows == 0) {
        m.standardized = true;
        return;
    }
    const auto n = static_cast<double>(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            m.mean[c] += m.values[r * m.cols + c];
        }
    }
    for (auto& v : m.mean) {
        v /= n;
    }
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            const double d = m.values[r * m.cols + c] - m.mean[c];
            m.stddev[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < m.cols; ++c) {
        m.stddev[c] = std::sqrt(m.stddev[c] / n);
        if (m.stddev[c] <= 1e-12 * std::max(1.0, std::abs(m.mean[c]))) {
            m.stddev[c] = 0.0;
        }
    }
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            double& v = m.values[r * m.cols + c];
            v = m.stddev[c] == 0.0 ? 0.0 : (v - m.mean[c]) / m.stddev[c];
        }
    }
    m.standardized = true;
}

FeatureMatrix assemble_matrix(const Corpus& corpus, const Lexicons& lexicons,
                              const FamilyWeights& weights, int threads)
{
    FeatureMatrix m = assemble_unstandardized(corpus, lexicons, weights, threads);
    standardize(m);
    return m;
}

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> parse_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

} // namespace

void write_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& csv_path,
                          const std::filesystem::path& meta_path)
{
    std::string out = "doc_id,segment";
    for (const auto& d : m.dim_names) {
        out += ',';
        out += csv_field(d);
    }
    out += '\n';
    for (std::size_t r = 0; r < m.rows; ++r) {
        out += csv_field(m.row_index[r].doc_id);
        out += ',';
        out += std::to_string(m.row_index[r].segment);
        for (std::size_t c = 0; c < m.cols; ++c) {
            out += ',';
            out += detail::format_double(m.at(r, c));
        }
        out += '\n';
    }
    detail::write_text_file(csv_path, out);

    json meta;
    meta["rows"] = m.rows;
    meta["cols"] = m.cols;
    meta["dim_names"] = m.dim_names;
    meta["mean"] = m.mean;
    meta["stddev"] = m.stddev;
    meta["standardized"] = m.standardized;
    meta["families"] = {
        {"pos", (m.families & bit(Family::pos)) != 0},
        {"deprel", (m.families & bit(Family::deprel)) != 0},
        {"stop", (m.families & bit(Family::stop)) != 0},
        {"affect", (m.families & bit(Family::affect)) != 0},
    };
    meta["weights"] = {{"pos", m.weights.pos}, {"deprel", m.weights.deprel},
                       {"stop", m.weights.stop}, {"affect", m.weights.affect}};
    detail::write_text_file(meta_path, meta.dump(2) + "\n");
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& csv_path,
                                  const std::filesystem::path& meta_path)
{
    FeatureMatrix m;
    json meta;
    try {
        meta = json::parse(detail::read_text_file(meta_path));
        m.dim_names = meta.at("dim_names").get<std::vector<std::string>>();
        m.mean = meta.at("mean").get<std::vector<double>>();
        m.stddev = meta.at("stddev").get<std::vector<double>>();
        m.standardized = meta.at("standardized").get<bool>();
        const auto& fam = meta.at("families");
        if (fam.at("pos").get<bool>()) m.families |= bit(Family::pos);
        if (fam.at("deprel").get<bool>()) m.families |= bit(Family::deprel);
        if (fam.at("stop").get<bool>()) m.families |= bit(Family::stop);
        if (fam.at("affect").get<bool>()) m.families |= bit(Family::affect);
        const auto& w = meta.at("weights");
        m.weights = FamilyWeights{w.at("pos").get<double>(), w.at("deprel").get<double>(),
                                  w.at("stop").get<double>(), w.at("affect").get<double>()};
    } catch (const json::exception& e) {
        throw DataError(meta_path.string() + ": " + e.what());
    }
    m.cols = m.dim_names.size();

    std::ifstream in(csv_path);
    if (!in) {
        throw DataError("cannot open " + csv_path.string());
    }
    std::string line;
    std::getline(in, line);
    const auto header = parse_csv_line(line);
    if (header.size() != m.cols + 2 || header[0] != "doc_id" || header[1] != "segment") {
        throw DataError(csv_path.string() + ": header does not match " + meta_path.string());
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto where = csv_path.string() + ":" + std::to_string(line_no);
        auto fields = parse_csv_line(line);
        if (fields.size() != m.cols + 2) {
            throw DataError(where + ": expected " + std::to_string(m.cols + 2) + " fields");
        }
        m.row_index.push_back(RowKey{fields[0],
                                     static_cast<int>(detail::parse_double(fields[1], where))});
        for (std::size_t c = 0; c < m.cols; ++c) {
            m.values.push_back(detail::parse_double(fields[c + 2], where));
        }
    }
    m.rows = m.row_index.size();
    return m;
}

} // namespace structoscope
