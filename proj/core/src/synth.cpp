#include "structoscope/synth.hpp"

#include "structoscope/error.hpp"

#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace structoscope {

namespace {

constexpr int kGroups = 10;
constexpr std::uint64_t kTemplateStream = 0xA11CEULL;
constexpr std::uint64_t kTokenStream = 0x70CE45ULL;

double standard_normal(detail::Engine& eng)
{
    double u1 = 0.0;
    do {
        u1 = detail::uniform01(eng);
    } while (u1 <= 0.0);
    const double u2 = detail::uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Marsaglia and Tsang.
double sample_gamma(detail::Engine& eng, double shape)
{
    if (shape < 1.0) {
        double u = 0.0;
        do {
            u = detail::uniform01(eng);
        } while (u <= 0.0);
        return sample_gamma(eng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = standard_normal(eng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = detail::uniform01(eng);
        if (u < 1.0 - 0.0331 * x * x * x * x) {
            return d * v;
        }
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

double sample_beta(detail::Engine& eng, BetaShape shape)
{
    const double x = sample_gamma(eng, shape.alpha);
    const double y = sample_gamma(eng, shape.beta);
    return x / (x + y);
}

int uniform_int(detail::Engine& eng, int lo, int hi)
{
    return lo + static_cast<int>(detail::uniform_index(eng, static_cast<std::uint64_t>(hi - lo + 1)));
}

// Uniform symbol different from `avoid` (if any).
int other_symbol(detail::Engine& eng, int alphabet, std::optional<int> avoid)
{
    if (!avoid) {
        return uniform_int(eng, 0, alphabet - 1);
    }
    const int s = uniform_int(eng, 0, alphabet - 2);
    return s >= *avoid ? s + 1 : s;
}

Labels random_compressed(detail::Engine& eng, int length, int alphabet)
{
    Labels out;
    out.reserve(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i) {
        out.push_back(other_symbol(eng, alphabet, out.empty() ? std::nullopt : std::optional<int>(out.back())));
    }
    return out;
}

Labels perturb(detail::Engine& eng, const Labels& base, double noise, int alphabet)
{
    Labels out;
    out.reserve(base.size() + 4);
    for (int symbol : base) {
        if (detail::uniform01(eng) >= noise) {
            out.push_back(symbol);
            continue;
        }
        switch (detail::uniform_index(eng, 3)) {
        case 0: // substitute
            out.push_back(other_symbol(eng, alphabet, symbol));
            break;
        case 1: // insert after
            out.push_back(symbol);
            out.push_back(other_symbol(eng, alphabet, symbol));
            break;
        default: // delete
            break;
        }
    }
    if (out.empty()) {
        out.push_back(base.front());
    }
    return out;
}

// Spreads the runs of `compressed` over n segments, each run non-empty.
Labels expand(detail::Engine& eng, Labels compressed, int n)
{
    if (compressed.size() > static_cast<std::size_t>(n)) {
        compressed.resize(static_cast<std::size_t>(n));
    }
    const auto runs = compressed.size();
    // runs - 1 distinct cut points in 1..n-1 (partial Fisher-Yates).
    std::vector<int> cuts(static_cast<std::size_t>(n - 1));
    std::iota(cuts.begin(), cuts.end(), 1);
    for (std::size_t i = 0; i + 1 < runs; ++i) {
        const auto j = i + detail::uniform_index(eng, cuts.size() - i);
        std::swap(cuts[i], cuts[j]);
    }
    cuts.resize(runs - 1);
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(n);
    Labels out;
    out.reserve(static_cast<std::size_t>(n));
    int start = 0;
    for (std::size_t r = 0; r < runs; ++r) {
        out.insert(out.end(), static_cast<std::size_t>(cuts[r] - start), compressed[r]);
        start = cuts[r];
    }
    return out;
}

std::string doc_id(int i, int n)
{
    const auto width = std::to_string(std::max(n - 1, 0)).size();
    std::string digits = std::to_string(i);
    return "doc_" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

} // namespace

void RegimeSpec::validate() const
{
    std::vector<std::string> problems;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok) {
            problems.push_back(what);
        }
    };
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    check(n_docs >= 2 * kGroups, "n_docs must be >= 20 (two per decile)");
    check(seg_min >= 1, "seg_min must be >= 1");
    check(seg_min <= seg_max, "seg_range is infeasible (min > max)");
    check(alphabet >= 2, "alphabet must be >= 2");
    check(template_length >= 1, "template_length must be >= 1");
    check(scatter_min >= 1 && scatter_min <= scatter_max, "scatter range must satisfy 1 <= min <= max");
    check(prob(noise_high), "noise_high must be in [0, 1]");
    check(prob(noise_low), "noise_low must be in [0, 1]");
    check(position_high.alpha > 0.0 && position_high.beta > 0.0, "position_high Beta parameters must be > 0");
    check(position_low.alpha > 0.0 && position_low.beta > 0.0, "position_low Beta parameters must be > 0");
    if (planted) {
        const auto [from, to] = *planted;
        check(from >= 0 && from < alphabet && to >= 0 && to < alphabet && from != to,
              "planted transition needs two distinct labels inside the alphabet");
        check(seg_min >= 2, "planted transitions need seg_min >= 2");
    }
    check(tokens_min >= 1 && tokens_min <= tokens_max, "token range must satisfy 1 <= min <= max");
    check(prob(signature_share), "signature_share must be in [0, 1]");
    if (!problems.empty()) {
        std::string msg = "invalid synthetic spec:";
        for (const auto& p : problems) {
            msg += "\n  - " + p;
        }
        throw ValidationError(msg);
    }
}

int intended_group(int doc_index, int n_docs)
{
    return static_cast<int>(static_cast<long long>(doc_index) * kGroups / n_docs);
}

std::vector<SequenceRecord> generate(const RegimeSpec& spec)
{
    spec.validate();
    detail::Engine template_eng(detail::mix_seed(spec.seed, kTemplateStream));
    const Labels high_template = random_compressed(template_eng, spec.template_length, spec.alphabet);
    Labels low_template;
    for (int attempt = 0;; ++attempt) {
        low_template = random_compressed(template_eng, spec.template_length, spec.alphabet);
        if (4 * edit_distance(high_template, low_template) >= 3 * spec.template_length || attempt >= 1000) {
            break;
        }
    }

    const bool high_structured = spec.regime == Regime::ordered || spec.regime == Regime::akp;
    const bool low_structured = spec.regime == Regime::ordered || spec.regime == Regime::reverse_akp;

    std::vector<SequenceRecord> out(static_cast<std::size_t>(spec.n_docs));
    for (int i = 0; i < spec.n_docs; ++i) {
        detail::Engine eng(detail::mix_seed(spec.seed, static_cast<std::uint64_t>(i)));
        const int group = intended_group(i, spec.n_docs);
        bool high = group >= 7;
        if (group >= 3 && group <= 6) {
            high = detail::uniform01(eng) < static_cast<double>(group - 2) / 5.0;
        }
        const bool structured = high ? high_structured : low_structured;
        Labels compressed;
        if (structured) {
            compressed = perturb(eng, high ? high_template : low_template,
                                 high ? spec.noise_high : spec.noise_low, spec.alphabet);
        } else {
            compressed = random_compressed(eng, uniform_int(eng, spec.scatter_min, spec.scatter_max), spec.alphabet);
        }
        const int n_segments = uniform_int(eng, spec.seg_min, spec.seg_max);

        SequenceRecord& rec = out[static_cast<std::size_t>(i)];
        rec.id = doc_id(i, spec.n_docs);
        rec.domain = "synthetic";
        rec.genre_tags = {i % 2 == 0 ? "fiction" : "essay"};
        rec.eval_score = static_cast<double>(i) + detail::uniform01(eng);
        rec.labels = expand(eng, std::move(compressed), n_segments);
        if (spec.planted) {
            const double p = sample_beta(eng, high ? spec.position_high : spec.position_low);
            const int b = std::clamp(static_cast<int>(std::floor(p * n_segments)), 1, n_segments - 1);
            rec.labels[static_cast<std::size_t>(b - 1)] = spec.planted->first;
            rec.labels[static_cast<std::size_t>(b)] = spec.planted->second;
            rec.planted_position = p;
        }
    }
    return out;
}

Corpus render_tokens(const std::vector<SequenceRecord>& records, const RegimeSpec& spec,
                     const Lexicons& lexicons)
{
    spec.validate();
    const auto k = static_cast<std::size_t>(spec.alphabet);
    const auto& stopwords = lexicons.stopwords();
    if (stopwords.size() < 4 * k) {
        throw ValidationError("render_tokens: stopword list too short for " + std::to_string(k) + " labels");
    }
    // Label l owns stopwords l, l+k, l+2k, l+3k; the next eight are shared
    // background words used by every label.
    std::vector<std::vector<std::size_t>> signature(k);
    for (std::size_t s = 0; s < 4 * k; ++s) {
        signature[s % k].push_back(s);
    }
    std::vector<std::size_t> shared;
    for (std::size_t s = 4 * k; s < std::min(stopwords.size(), 4 * k + 8); ++s) {
        shared.push_back(s);
    }
    if (shared.empty()) {
        shared.push_back(0);
    }
    // Affect words sorted by polarity and cut into one band per label.
    std::vector<std::size_t> by_polarity(lexicons.affect_words().size());
    std::iota(by_polarity.begin(), by_polarity.end(), std::size_t{0});
    std::stable_sort(by_polarity.begin(), by_polarity.end(), [&](std::size_t a, std::size_t b) {
        return lexicons.affect_values()[a].polarity < lexicons.affect_values()[b].polarity;
    });
    std::vector<std::vector<std::size_t>> bands(k);
    for (std::size_t r = 0; r < by_polarity.size(); ++r) {
        bands[r * k / by_polarity.size()].push_back(by_polarity[r]);
    }

    Corpus corpus;
    corpus.documents.reserve(records.size());
    for (std::size_t d = 0; d < records.size(); ++d) {
        const auto& rec = records[d];
        detail::Engine eng(detail::mix_seed(spec.seed ^ kTokenStream, d));
        Document doc;
        doc.id = rec.id;
        doc.domain = rec.domain;
        doc.genre_tags = rec.genre_tags;
        doc.eval_score = rec.eval_score;
        for (std::size_t s = 0; s < rec.labels.size(); ++s) {
            const int label = rec.labels[s];
            if (label < 0 || static_cast<std::size_t>(label) >= k) {
                throw ValidationError("render_tokens: label " + std::to_string(label) + " of '" + rec.id
                                      + "' is outside the alphabet");
            }
            const auto l = static_cast<std::size_t>(label);
            const double stop_share = 0.3 + 0.4 * static_cast<double>(l) / static_cast<double>(k - 1);
            Segment seg;
            seg.index = static_cast<int>(s);
            const int n_tokens = uniform_int(eng, spec.tokens_min, spec.tokens_max);
            std::string text;
            for (int t = 0; t < n_tokens; ++t) {
                std::string word;
                if (detail::uniform01(eng) < stop_share) {
                    const auto& sig = signature[l];
                    word = detail::uniform01(eng) < spec.signature_share
                               ? stopwords[sig[detail::uniform_index(eng, sig.size())]]
                               : stopwords[shared[detail::uniform_index(eng, shared.size())]];
                } else if (!bands[l].empty() && detail::uniform01(eng) < 0.3) {
                    word = lexicons.affect_words()[bands[l][detail::uniform_index(eng, bands[l].size())]];
                } else {
                    word = "w" + std::to_string(detail::uniform_index(eng, 500));
                }
                if (!text.empty()) {
                    text += ' ';
                }
                text += word;
                seg.tokens.push_back(Token{word, std::nullopt, std::nullopt, false});
            }
            seg.raw_text = std::move(text);
            doc.segments.push_back(std::move(seg));
        }
        corpus.documents.push_back(std::move(doc));
    }
    apply_lexicon(corpus, lexicons);
    return corpus;
}

} // namespace structoscope
