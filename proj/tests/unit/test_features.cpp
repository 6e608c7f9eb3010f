#include "unit/test_util.hpp"

#include "structoscope/error.hpp"
#include "structoscope/features.hpp"
#include "structoscope/lexicon.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

using namespace structoscope;

namespace {

Lexicons small_lexicon()
{
    return Lexicons({"the", "a", "of", "and"},
                    {{"joy", {1.0, 0.8}}, {"grief", {-1.0, 0.6}}, {"calm", {0.2, 0.1}}},
                    "test-lexicon");
}

Token word(std::string surface)
{
    return Token{std::move(surface), std::nullopt, std::nullopt, false};
}

Token tagged(std::string surface, std::string_view upos, std::string_view deprel)
{
    return Token{std::move(surface), upos_index(upos), deprel_index(deprel), false};
}

double sum(const auto& v)
{
    return std::accumulate(v.begin(), v.end(), 0.0);
}

Segment random_segment(std::mt19937_64& rng, bool annotated)
{
    static const std::vector<std::string> vocab{"the", "a", "of", "and", "joy", "grief", "calm",
                                                "tree", "house", "river", "The", "AND"};
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::uniform_int_distribution<int> len(1, 30);
    std::uniform_int_distribution<int> upos(0, static_cast<int>(kNumUpos) - 1);
    std::uniform_int_distribution<int> dep(0, static_cast<int>(kNumDeprel) - 1);
    Segment s;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
        Token t = word(vocab[pick(rng)]);
        if (annotated) {
            t.upos = static_cast<std::uint8_t>(upos(rng));
            t.deprel = static_cast<std::uint8_t>(dep(rng));
        }
        s.tokens.push_back(std::move(t));
    }
    return s;
}

Document doc(std::string id, std::vector<Segment> segs)
{
    Document d;
    d.id = std::move(id);
    for (std::size_t i = 0; i < segs.size(); ++i) {
        segs[i].index = static_cast<int>(i);
    }
    d.segments = std::move(segs);
    return d;
}

std::size_t column(const FeatureMatrix& m, const std::string& name)
{
    auto it = std::find(m.dim_names.begin(), m.dim_names.end(), name);
    REQUIRE(it != m.dim_names.end());
    return static_cast<std::size_t>(it - m.dim_names.begin());
}

} // namespace

TEST_CASE("all-stopword segment is one-hot on that stopword")
{
    const Lexicons lex = small_lexicon();
    Segment s;
    for (int i = 0; i < 4; ++i) {
        s.tokens.push_back(word("the"));
    }
    const FeatureVector fv = extract_features(s, lex);
    CHECK(fv.stop == std::vector<double>{1.0, 0.0, 0.0, 0.0});
    CHECK(fv.stop_share == 1.0);
    CHECK(fv.has(Family::stop));
    CHECK_FALSE(fv.has(Family::pos));
    CHECK_FALSE(fv.has(Family::deprel));
    CHECK(sum(fv.pos) == 0.0);
    CHECK(sum(fv.deprel) == 0.0);
}

TEST_CASE("UPOS counts NOUN:3 VERB:1 give 0.75 and 0.25")
{
    Segment s;
    s.tokens = {tagged("Rain", "NOUN", "root"), tagged("Wind", "NOUN", "root"),
                tagged("Night", "NOUN", "root"), tagged("Ends", "VERB", "root")};
    const FeatureVector fv = extract_features(s, small_lexicon());
    CHECK(fv.pos[*upos_index("NOUN")] == 0.75);
    CHECK(fv.pos[*upos_index("VERB")] == 0.25);
    CHECK(fv.deprel[*deprel_index("root")] == 1.0);
    CHECK(fv.has(Family::pos));
    CHECK(fv.has(Family::deprel));
}

TEST_CASE("conllu fixture segment features")
{
    const Corpus c = load_corpus(testutil::fixture("conllu"), CorpusFormat::conllu_dir);
    const Document* a = c.find("story_a");
    REQUIRE(a != nullptr);
    const FeatureVector fv = extract_features(a->segments[0], Lexicons::builtin_english());
    CHECK(fv.pos[*upos_index("VERB")] == doctest::Approx(6.0 / 21.0).epsilon(1e-12));
    CHECK(fv.pos[*upos_index("ADV")] == doctest::Approx(1.0 / 21.0).epsilon(1e-12));
    CHECK(fv.deprel[*deprel_index("nsubj")] == doctest::Approx(6.0 / 21.0).epsilon(1e-12));
    const FeatureVector fv2 = extract_features(a->segments[1], Lexicons::builtin_english());
    CHECK(fv2.pos[*upos_index("NOUN")] == 0.75);
    CHECK(fv2.pos[*upos_index("VERB")] == 0.25);
}

TEST_CASE("no affect hits reads as neutral and absent")
{
    Segment s;
    s.tokens = {word("tree"), word("house")};
    const FeatureVector fv = extract_features(s, small_lexicon());
    CHECK(fv.polarity01 == 0.5);
    CHECK(fv.intensity == 0.0);
    CHECK_FALSE(fv.has(Family::affect));
    CHECK_FALSE(fv.has(Family::stop));
    CHECK(fv.stop_share == 0.0);
    CHECK(sum(fv.stop) == 0.0);
}

TEST_CASE("affect averages polarity and intensity over hits")
{
    Segment s;
    s.tokens = {word("joy"), word("grief"), word("calm"), word("tree")};
    const FeatureVector fv = extract_features(s, small_lexicon());
    CHECK(fv.polarity01 == doctest::Approx(((1.0 - 1.0 + 0.2) / 3.0 + 1.0) / 2.0).epsilon(1e-12));
    CHECK(fv.intensity == doctest::Approx((0.8 + 0.6 + 0.1) / 3.0).epsilon(1e-12));
    CHECK(fv.has(Family::affect));
}

TEST_CASE("stopword lookup is case-insensitive")
{
    Segment s;
    s.tokens = {word("The"), word("AND"), word("x")};
    const FeatureVector fv = extract_features(s, small_lexicon());
    CHECK(fv.stop == std::vector<double>{0.5, 0.0, 0.0, 0.5});
    CHECK(fv.stop_share == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("empty segments are rejected")
{
    CHECK_THROWS_AS(extract_features(Segment{}, small_lexicon()), ValidationError);
}

TEST_CASE("present distributions sum to one, token duplication and order do not matter")
{
    const Lexicons lex = small_lexicon();
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const Segment s = random_segment(rng, trial % 2 == 0);
        const FeatureVector fv = extract_features(s, lex);
        if (fv.has(Family::pos)) {
            CHECK(std::abs(sum(fv.pos) - 1.0) <= 1e-9);
        }
        if (fv.has(Family::deprel)) {
            CHECK(std::abs(sum(fv.deprel) - 1.0) <= 1e-9);
        }
        if (fv.has(Family::stop)) {
            CHECK(std::abs(sum(fv.stop) - 1.0) <= 1e-9);
        }
        CHECK(fv.polarity01 >= 0.0);
        CHECK(fv.polarity01 <= 1.0);

        Segment doubled = s;
        doubled.tokens.insert(doubled.tokens.end(), s.tokens.begin(), s.tokens.end());
        CHECK(extract_features(doubled, lex) == fv);

        Segment shuffled = s;
        std::shuffle(shuffled.tokens.begin(), shuffled.tokens.end(), rng);
        CHECK(extract_features(shuffled, lex) == fv);
    }
}

TEST_CASE("two identical segments standardize to zero rows")
{
    Segment s;
    s.tokens = {word("the"), word("joy"), word("tree")};
    Corpus c;
    c.documents.push_back(doc("a", {s, s}));
    const FeatureMatrix m = assemble_matrix(c, small_lexicon());
    REQUIRE(m.rows == 2);
    for (double v : m.values) {
        CHECK(v == 0.0);
    }
    for (double sd : m.stddev) {
        CHECK(sd == 0.0);
    }
}

TEST_CASE("a {0, 1} column standardizes to {-1, +1}")
{
    Segment with_the;
    with_the.tokens = {word("the"), word("tree")};
    Segment with_a;
    with_a.tokens = {word("a"), word("tree")};
    Corpus c;
    c.documents.push_back(doc("a", {with_the, with_a}));
    const FeatureMatrix m = assemble_matrix(c, small_lexicon());
    const std::size_t col = column(m, "stop:the");
    CHECK(m.mean[col] == 0.5);
    CHECK(m.stddev[col] == 0.5);
    CHECK(m.at(0, col) == 1.0);
    CHECK(m.at(1, col) == -1.0);
}

TEST_CASE("standardized columns have zero mean and unit population std")
{
    std::mt19937_64 rng(4);
    Corpus c;
    for (int d = 0; d < 12; ++d) {
        std::vector<Segment> segs;
        for (int s = 0; s < 9; ++s) {
            segs.push_back(random_segment(rng, true));
        }
        c.documents.push_back(doc("d" + std::to_string(d), std::move(segs)));
    }
    const FeatureMatrix m = assemble_matrix(c, small_lexicon());
    CHECK(m.rows == 108);
    CHECK(m.cols == kNumUpos + kNumDeprel + 4 + 3);
    for (std::size_t col = 0; col < m.cols; ++col) {
        double mean = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            mean += m.at(r, col);
        }
        mean /= static_cast<double>(m.rows);
        double var = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            var += (m.at(r, col) - mean) * (m.at(r, col) - mean);
        }
        const double sd = std::sqrt(var / static_cast<double>(m.rows));
        CHECK(std::abs(mean) < 1e-6);
        if (m.stddev[col] > 0.0) {
            CHECK(std::abs(sd - 1.0) < 1e-6);
        } else {
            CHECK(sd == 0.0);
        }
    }
    CHECK(m.row_index[9] == RowKey{"d1", 0});

    const FeatureMatrix threaded = assemble_matrix(c, small_lexicon(), {}, 4);
    CHECK(threaded.values == m.values);
}

TEST_CASE("unannotated corpora use only the lexicon families")
{
    Segment s;
    s.tokens = {word("of"), word("grief")};
    Corpus c;
    c.documents.push_back(doc("a", {s}));
    const FeatureMatrix m = assemble_unstandardized(c, small_lexicon());
    CHECK(m.cols == 4 + 3);
    CHECK(m.families == (static_cast<std::uint8_t>(Family::stop) | static_cast<std::uint8_t>(Family::affect)));
}

TEST_CASE("mixed annotation is rejected naming the minority documents")
{
    std::mt19937_64 rng(1);
    Corpus c;
    c.documents.push_back(doc("plain_1", {random_segment(rng, false)}));
    c.documents.push_back(doc("tagged_1", {random_segment(rng, true)}));
    c.documents.push_back(doc("tagged_2", {random_segment(rng, true)}));
    CHECK_THROWS_WITH_AS(assemble_matrix(c, small_lexicon()), doctest::Contains("plain_1"), DataError);
}

TEST_CASE("zero weights mask families before standardization")
{
    std::mt19937_64 rng(2);
    Corpus c;
    c.documents.push_back(doc("a", {random_segment(rng, true), random_segment(rng, true), random_segment(rng, true)}));
    const FeatureMatrix m = assemble_unstandardized(c, small_lexicon(), FamilyWeights{0.0, 0.0, 1.0, 0.0});
    bool any_stop_nonzero = false;
    for (std::size_t col = 0; col < m.cols; ++col) {
        const bool stop_col = m.dim_names[col].rfind("stop", 0) == 0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            if (!stop_col) {
                CHECK(m.at(r, col) == 0.0);
            } else if (m.at(r, col) != 0.0) {
                any_stop_nonzero = true;
            }
        }
    }
    CHECK(any_stop_nonzero);
}

TEST_CASE("feature matrix survives a CSV round trip")
{
    std::mt19937_64 rng(6);
    Corpus c;
    c.documents.push_back(doc("doc,with \"quotes\"", {random_segment(rng, false), random_segment(rng, false)}));
    c.documents.push_back(doc("plain", {random_segment(rng, false)}));
    const FeatureMatrix m = assemble_matrix(c, small_lexicon(), FamilyWeights{1.0, 1.0, 2.0, 0.5});
    testutil::TempDir dir;
    write_feature_matrix(m, dir / "f.csv", dir / "f.json");
    const FeatureMatrix back = read_feature_matrix(dir / "f.csv", dir / "f.json");
    CHECK(back.rows == m.rows);
    CHECK(back.cols == m.cols);
    CHECK(back.values == m.values);
    CHECK(back.mean == m.mean);
    CHECK(back.stddev == m.stddev);
    CHECK(back.dim_names == m.dim_names);
    CHECK(back.row_index == m.row_index);
    CHECK(back.weights.stop == 2.0);
    CHECK(back.weights.affect == 0.5);
    CHECK(back.families == m.families);
    CHECK(testutil::read_file(dir / "f.csv").rfind("doc_id,segment,stop:the", 0) == 0);
}

TEST_CASE("lexicon validation")
{
    CHECK_THROWS_AS(Lexicons({}, {}, "x"), ValidationError);
    CHECK_THROWS_AS(Lexicons({"a"}, {{"bad", {2.0, 0.0}}}, "x"), ValidationError);
    testutil::TempDir dir;
    testutil::write_file(dir / "stop.txt", "# comment\nthe\nof\n");
    testutil::write_file(dir / "affect.tsv", "joy\t0.9\t0.5\nbad\t3\t0.1\n");
    CHECK_THROWS_AS(Lexicons::from_files(dir / "stop.txt", dir / "affect.tsv"), DataError);
    testutil::write_file(dir / "affect.tsv", "joy\t0.9\t0.5\n");
    const Lexicons lex = Lexicons::from_files(dir / "stop.txt", dir / "affect.tsv");
    CHECK(lex.stopwords() == std::vector<std::string>{"the", "of"});
    CHECK(lex.affect_index("JOY").has_value());
}
