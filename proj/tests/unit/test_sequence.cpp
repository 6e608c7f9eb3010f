#include "oracles/edit_distance_oracle.hpp"
#include "oracles/pam_oracle.hpp"
#include "unit/test_util.hpp"

#include "structoscope/error.hpp"
#include "structoscope/sequence.hpp"

#include <doctest.h>

#include <random>
#include <vector>

using namespace structoscope;

namespace {

constexpr int A = 0;
constexpr int B = 1;
constexpr int C = 2;

Labels random_labels(std::mt19937_64& rng, int max_len, int alphabet)
{
    std::uniform_int_distribution<int> len(0, max_len);
    std::uniform_int_distribution<int> sym(0, alphabet - 1);
    Labels out(static_cast<std::size_t>(len(rng)));
    for (auto& x : out) {
        x = sym(rng);
    }
    return out;
}

DistanceMatrix random_points_matrix(std::mt19937_64& rng, std::size_t n)
{
    std::uniform_real_distribution<double> coord(0.0, 10.0);
    std::vector<std::pair<double, double>> pts(n);
    for (auto& p : pts) {
        p = {coord(rng), coord(rng)};
    }
    DistanceMatrix d(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            d(i, j) = std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
        }
    }
    return d;
}

} // namespace

TEST_CASE("run-length encoding examples")
{
    const Labels seq{A, A, A, B, B, A, A, C, C, C};
    CHECK(run_length_encode(seq) == Labels{A, B, A, C});
    CHECK(run_length_encode(Labels{A, A, A, A}) == Labels{A});
    CHECK(run_length_encode(Labels{}).empty());
}

TEST_CASE("run-length encoding is idempotent with no adjacent duplicates")
{
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        const Labels x = random_labels(rng, 20, 3);
        const Labels once = run_length_encode(x);
        CHECK(run_length_encode(once) == once);
        CHECK(once.size() <= x.size());
        CHECK(once.empty() == x.empty());
        for (std::size_t i = 1; i < once.size(); ++i) {
            CHECK(once[i] != once[i - 1]);
        }
    }
}

TEST_CASE("AAABBAACCC yields AB, BA, AC at 0.4, 0.6, 0.8")
{
    const auto seq = BlockSequence::from_labels("x", Labels{A, A, A, B, B, A, A, C, C, C});
    CHECK(seq.compressed == Labels{A, B, A, C});
    const auto events = extract_transitions(seq);
    REQUIRE(events.size() == 3);
    CHECK(events[0].from_label == A);
    CHECK(events[0].to_label == B);
    CHECK(events[1].from_label == B);
    CHECK(events[1].to_label == A);
    CHECK(events[2].from_label == A);
    CHECK(events[2].to_label == C);
    CHECK(events[0].position == 0.4);
    CHECK(events[1].position == 0.6);
    CHECK(events[2].position == 0.8);
    CHECK(events[0].doc_id == "x");
}

TEST_CASE("constant sequences have no transitions; empty sequences are rejected")
{
    CHECK(extract_transitions(BlockSequence::from_labels("c", Labels{A, A, A, A})).empty());
    CHECK_THROWS_AS(extract_transitions(BlockSequence::from_labels("e", Labels{})), ValidationError);
}

TEST_CASE("transition count and positions")
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 300; ++trial) {
        Labels x = random_labels(rng, 30, 4);
        x.push_back(0);
        const auto seq = BlockSequence::from_labels("d", x);
        const auto events = extract_transitions(seq);
        CHECK(events.size() == seq.compressed.size() - 1);
        for (std::size_t i = 0; i < events.size(); ++i) {
            CHECK(events[i].from_label != events[i].to_label);
            CHECK(events[i].position > 0.0);
            CHECK(events[i].position <= 1.0);
            if (i > 0) {
                CHECK(events[i].position > events[i - 1].position);
            }
        }
    }
}

TEST_CASE("edit distance examples")
{
    CHECK(edit_distance(Labels{1, 4, 2}, Labels{1, 4, 2}) == 0);
    CHECK(edit_distance(Labels{A, B}, Labels{B, A}) == 2);
    CHECK(edit_distance(Labels{A, B, C}, Labels{A, C}) == 1);
    CHECK(edit_distance(Labels{}, Labels{A, B, C}) == 3);
    CHECK(oracle::brute_edit_distance(Labels{A, B}, Labels{B, A}) == 2);
    CHECK(oracle::brute_edit_distance(Labels{A, B, C}, Labels{A, C}) == 1);
}

TEST_CASE("edit distance matches the recursive oracle")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        const Labels a = random_labels(rng, 7, 3);
        const Labels b = random_labels(rng, 7, 3);
        CHECK(edit_distance(a, b) == oracle::brute_edit_distance(a, b));
    }
}

TEST_CASE("edit distance is a metric")
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 500; ++trial) {
        const Labels a = random_labels(rng, 12, 4);
        const Labels b = random_labels(rng, 12, 4);
        const Labels c = random_labels(rng, 12, 4);
        CHECK(edit_distance(a, a) == 0);
        CHECK((edit_distance(a, b) == 0) == (a == b));
        CHECK(edit_distance(a, b) == edit_distance(b, a));
        CHECK(edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c));
    }
}

TEST_CASE("pairwise distances, normalized variant and thread invariance")
{
    const std::vector<Labels> seqs{{A, B, C}, {A, C}, {}, {C, B, A, B}};
    const DistanceMatrix raw = pairwise_edit_distances(seqs);
    CHECK(raw(0, 1) == 1.0);
    CHECK(raw(0, 2) == 3.0);
    CHECK(raw(2, 3) == 4.0);
    validate_distance_matrix(raw);
    const DistanceMatrix norm = pairwise_edit_distances(seqs, true);
    CHECK(norm(0, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(norm(2, 3) == 1.0);
    CHECK(norm(2, 2) == 0.0);
    CHECK(pairwise_edit_distances(seqs, false, 3).values == raw.values);
}

TEST_CASE("PAM examples")
{
    // {s, s, t} with d(s, t) = 3.
    DistanceMatrix d(3);
    d(0, 2) = d(2, 0) = 3.0;
    d(1, 2) = d(2, 1) = 3.0;
    const PamResult r = pam(d, 1);
    CHECK(r.medoids == std::vector<std::size_t>{0});
    CHECK(r.cost == 3.0);

    const PamResult all = pam(d, 3);
    CHECK(all.medoids == std::vector<std::size_t>{0, 1, 2});
    CHECK(all.cost == 0.0);

    const PamResult single = pam(DistanceMatrix(1), 1);
    CHECK(single.medoids == std::vector<std::size_t>{0});
    CHECK(single.cost == 0.0);

    CHECK_THROWS_AS(pam(d, 0), ValidationError);
    CHECK_THROWS_AS(pam(d, 4), ValidationError);
}

TEST_CASE("k_medoids returns member sequences")
{
    const std::vector<Labels> seqs{{A, B}, {A, B}, {C, A, B, C}};
    const DistanceMatrix d = pairwise_edit_distances(seqs);
    const MedoidSet set = k_medoids(seqs, 1, d);
    REQUIRE(set.medoids.size() == 1);
    CHECK(set.medoids[0] == Labels{A, B});
    CHECK(set.assignment_cost == 2.0);
    CHECK_THROWS_AS(k_medoids(seqs, 1, DistanceMatrix(2)), ValidationError);
}

TEST_CASE("PAM reaches the brute-force optimum on small instances")
{
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> size(2, 7);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = size(rng);
        const DistanceMatrix d = random_points_matrix(rng, n);
        for (int m = 1; m <= std::min<int>(2, static_cast<int>(n)); ++m) {
            const PamResult r = pam(d, m);
            CHECK(r.cost == doctest::Approx(oracle::brute_medoid_cost(d, m)).epsilon(1e-12));
            CHECK(r.cost == doctest::Approx(oracle::assignment_cost(d, r.medoids)).epsilon(1e-12));
            CHECK(r.cost == doctest::Approx(medoid_cost(d, r.medoids)).epsilon(1e-12));
        }
    }
}

TEST_CASE("PAM terminates with no improving swap")
{
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const DistanceMatrix d = random_points_matrix(rng, 40);
        for (int m : {1, 3, 5}) {
            const PamResult r = pam(d, m);
            CHECK(oracle::no_improving_swap(d, r.medoids, 1e-9));
            CHECK(std::is_sorted(r.medoids.begin(), r.medoids.end()));
        }
    }
}

TEST_CASE("PAM on edit distances of label sequences is deterministic")
{
    std::mt19937_64 rng(7);
    std::vector<Labels> seqs;
    for (int i = 0; i < 25; ++i) {
        seqs.push_back(run_length_encode(random_labels(rng, 15, 5)));
    }
    const DistanceMatrix d = pairwise_edit_distances(seqs);
    const PamResult r1 = pam(d, 2);
    const PamResult r2 = pam(d, 2);
    CHECK(r1.medoids == r2.medoids);
    CHECK(r1.cost == r2.cost);
    CHECK(oracle::no_improving_swap(d, r1.medoids, 1e-9));
}

TEST_CASE("malformed distance matrices are rejected")
{
    DistanceMatrix d(2);
    d(0, 1) = 1.0;
    CHECK_THROWS_AS(validate_distance_matrix(d), ValidationError);
    d(1, 0) = 1.0;
    d(0, 0) = 0.5;
    CHECK_THROWS_AS(validate_distance_matrix(d), ValidationError);
    d(0, 0) = 0.0;
    d(0, 1) = d(1, 0) = -1.0;
    CHECK_THROWS_AS(validate_distance_matrix(d), ValidationError);
    d(0, 1) = d(1, 0) = NAN;
    CHECK_THROWS_AS(validate_distance_matrix(d), ValidationError);
    DistanceMatrix ragged(2);
    ragged.values.pop_back();
    CHECK_THROWS_AS(validate_distance_matrix(ragged), ValidationError);
    CHECK_THROWS_AS(pam(ragged, 1), ValidationError);
}

TEST_CASE("sequence JSONL round trip")
{
    std::vector<SequenceRecord> recs(3);
    recs[0] = {"a", "fiction", {"x", "y"}, 1.5, 3, {0, 0, 1, 2}, 0.25};
    recs[1] = {"b", "", {}, -2.0, std::nullopt, {4}, std::nullopt};
    recs[2] = {"c", "essay", {}, 1e-300, 0, {1, 2, 1, 2, 1}, std::nullopt};
    testutil::TempDir dir;
    write_sequences_jsonl(recs, dir / "s.jsonl");
    CHECK(read_sequences_jsonl(dir / "s.jsonl") == recs);

    testutil::write_file(dir / "bad.jsonl", R"({"id": "q", "eval_score": 1, "labels": [1, -2]})" "\n");
    CHECK_THROWS_AS(read_sequences_jsonl(dir / "bad.jsonl"), DataError);
    testutil::write_file(dir / "bad.jsonl", R"({"id": "q", "labels": [1]})" "\n");
    CHECK_THROWS_AS(read_sequences_jsonl(dir / "bad.jsonl"), DataError);
}
