#include "oracles/beta_oracle.hpp"
#include "oracles/transport_oracle.hpp"

#include "structoscope/convergence.hpp"
#include "structoscope/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace structoscope;

namespace {

BlockSequence seq(std::string id, Labels labels)
{
    return BlockSequence::from_labels(std::move(id), std::move(labels));
}

std::vector<TransitionEvent> events_at(const std::vector<double>& positions)
{
    std::vector<TransitionEvent> out;
    for (double p : positions) {
        out.push_back(TransitionEvent{1, 4, p, "d"});
    }
    return out;
}

void check_metric(const DistanceMatrix& m, const std::vector<bool>& present)
{
    for (std::size_t i = 0; i < m.n; ++i) {
        if (!present[i]) {
            continue;
        }
        CHECK(m(i, i) == 0.0);
        for (std::size_t j = 0; j < m.n; ++j) {
            if (!present[j]) {
                continue;
            }
            CHECK(m(i, j) == m(j, i));
            CHECK(m(i, j) >= 0.0);
            for (std::size_t k = 0; k < m.n; ++k) {
                if (present[k]) {
                    CHECK(m(i, k) <= m(i, j) + m(j, k) + 1e-12);
                }
            }
        }
    }
}

DistanceMatrix uniform_matrix(std::size_t n, double off)
{
    DistanceMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) = i == j ? 0.0 : off;
        }
    }
    return m;
}

std::vector<double> cohesion_profile(double high, double low, double mid)
{
    std::vector<double> c(10, mid);
    for (int g : {0, 1, 2}) {
        c[static_cast<std::size_t>(g)] = low;
    }
    for (int g : {7, 8, 9}) {
        c[static_cast<std::size_t>(g)] = high;
    }
    return c;
}

} // namespace

// ---- order ---------------------------------------------------------------

TEST_CASE("identical sequences everywhere give zero matrix and cohesion")
{
    std::vector<std::vector<BlockSequence>> groups(10);
    for (int g = 0; g < 10; ++g) {
        for (int i = 0; i < 3; ++i) {
            groups[static_cast<std::size_t>(g)].push_back(seq("g" + std::to_string(g) + "_" + std::to_string(i), {0, 1, 2}));
        }
    }
    const auto r = analyze_order(groups);
    for (double v : r.matrix.values) {
        CHECK(v == 0.0);
    }
    for (double c : r.cohesion) {
        CHECK(c == 0.0);
    }
}

TEST_CASE("two constant groups are their medoid distance apart")
{
    const Labels s{0, 1, 2, 3};
    const Labels t{3, 2, 1, 0};
    REQUIRE(edit_distance(s, t) == 4);
    std::vector<std::vector<BlockSequence>> groups{
        {seq("a1", s), seq("a2", s)},
        {seq("b1", t), seq("b2", t), seq("b3", t)}};
    const auto r = analyze_order(groups);
    CHECK(r.matrix(0, 1) == 4.0);
    CHECK(r.matrix(1, 0) == 4.0);
    CHECK(r.cohesion == std::vector<double>{0.0, 0.0});
}

TEST_CASE("middle sequence is the medoid with cohesion 2/3")
{
    const Labels s{0, 1};
    const Labels t{0, 1, 2};
    const Labels u{0, 1, 2, 0};
    REQUIRE(edit_distance(s, t) == 1);
    REQUIRE(edit_distance(t, u) == 1);
    REQUIRE(edit_distance(s, u) == 2);
    std::vector<std::vector<BlockSequence>> groups{{seq("s", s), seq("t", t), seq("u", u)}};
    const auto r = analyze_order(groups);
    REQUIRE(r.medoid_sets[0].medoids.size() == 1);
    CHECK(r.medoid_sets[0].medoids[0] == t);
    CHECK(r.medoid_sets[0].medoid_ids[0] == "t");
    CHECK(r.cohesion[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("order analysis compresses runs unless asked not to")
{
    std::vector<std::vector<BlockSequence>> groups{
        {seq("a", {0, 0, 0, 1, 1})}, {seq("b", {0, 1})}};
    CHECK(analyze_order(groups).matrix(0, 1) == 0.0);
    OrderOptions raw;
    raw.use_rle = false;
    CHECK(analyze_order(groups, raw).matrix(0, 1) == 3.0);
    OrderOptions norm;
    norm.use_rle = false;
    norm.normalize = true;
    CHECK(analyze_order(groups, norm).matrix(0, 1) == doctest::Approx(0.6));
}

TEST_CASE("mean and min aggregation over medoid pairs")
{
    const Labels p{0, 1};
    const Labels q{2, 3, 2, 3};
    const Labels x{0, 1, 2};
    std::vector<std::vector<BlockSequence>> groups{
        {seq("a1", p), seq("a2", p), seq("a3", q), seq("a4", q)},
        {seq("b1", x), seq("b2", x)}};
    OrderOptions opt;
    opt.medoids = 2;
    const auto mean = analyze_order(groups, opt);
    const double dp = edit_distance(p, x);
    const double dq = edit_distance(q, x);
    CHECK(mean.matrix(0, 1) == doctest::Approx((dp + dq) / 2.0));
    CHECK(mean.cohesion[0] == 0.0);
    opt.aggregation = Aggregation::min;
    const auto min = analyze_order(groups, opt);
    CHECK(min.matrix(0, 1) == std::min(dp, dq));

    opt.medoids = 3;
    CHECK_THROWS_AS(analyze_order(groups, opt), DataError);
    opt.medoids = 0;
    CHECK_THROWS_AS(analyze_order(groups, opt), ValidationError);
}

TEST_CASE("order analysis is invariant to document order and reports empty groups")
{
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> len(1, 12);
    std::uniform_int_distribution<int> sym(0, 4);
    std::vector<std::vector<BlockSequence>> groups(10);
    int id = 0;
    for (auto& g : groups) {
        for (int i = 0; i < 8; ++i) {
            Labels l(static_cast<std::size_t>(len(rng)));
            for (auto& x : l) {
                x = sym(rng);
            }
            g.push_back(seq("doc" + std::to_string(id++), l));
        }
    }
    OrderOptions opt;
    opt.medoids = 2;
    const auto base = analyze_order(groups, opt);
    check_metric(base.matrix, std::vector<bool>(10, true));
    auto shuffled = groups;
    for (auto& g : shuffled) {
        std::shuffle(g.begin(), g.end(), rng);
    }
    opt.threads = 3;
    const auto again = analyze_order(shuffled, opt);
    CHECK(again.matrix.values == base.matrix.values);
    CHECK(again.cohesion == base.cohesion);

    OrderOptions single;
    const auto one = analyze_order(groups, single);
    check_metric(one.matrix, std::vector<bool>(10, true));

    groups[3].clear();
    CHECK_THROWS_WITH_AS(analyze_order(groups), doctest::Contains("group 3"), DataError);
}

TEST_CASE("oversized groups are subsampled deterministically")
{
    std::vector<std::vector<BlockSequence>> groups(2);
    for (int i = 0; i < 30; ++i) {
        groups[0].push_back(seq("a" + std::to_string(i), {i % 3, (i + 1) % 3}));
        groups[1].push_back(seq("b" + std::to_string(i), {i % 4, 4}));
    }
    OrderOptions opt;
    opt.max_group_size = 10;
    opt.seed = 5;
    const auto r1 = analyze_order(groups, opt);
    const auto r2 = analyze_order(groups, opt);
    CHECK(r1.medoid_sets[0].subsampled);
    CHECK(r1.medoid_sets[0].members == 30);
    CHECK(r1.matrix.values == r2.matrix.values);
    CHECK(r1.cohesion == r2.cohesion);
}

// ---- W1 ------------------------------------------------------------------

TEST_CASE("W1 examples")
{
    const std::vector<double> a{0.1, 0.5, 0.9};
    CHECK(wasserstein_1d(a, a) == 0.0);
    CHECK(wasserstein_1d(std::vector<double>{0.2}, std::vector<double>{0.5}) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(wasserstein_1d(std::vector<double>{0.0, 1.0}, std::vector<double>{0.5, 0.5}) == 0.5);
    CHECK_THROWS_AS(wasserstein_1d(std::vector<double>{}, a), ValidationError);
    CHECK_THROWS_AS(wasserstein_1d(std::vector<double>{NAN}, a), ValidationError);
}

TEST_CASE("W1 equals the transport oracle and the sorted closed form")
{
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> size(1, 6);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(static_cast<std::size_t>(size(rng)));
        std::vector<double> b(static_cast<std::size_t>(size(rng)));
        for (auto& x : a) {
            x = pos(rng);
        }
        for (auto& x : b) {
            x = pos(rng);
        }
        const double w = wasserstein_1d(a, b);
        CHECK(std::abs(w - oracle::transport_w1(a, b)) <= 1e-9);
        CHECK(w == wasserstein_1d(b, a));

        std::vector<double> c(a.size());
        for (auto& x : c) {
            x = pos(rng);
        }
        std::vector<double> sa = a;
        std::vector<double> sc = c;
        std::sort(sa.begin(), sa.end());
        std::sort(sc.begin(), sc.end());
        double closed = 0.0;
        for (std::size_t i = 0; i < sa.size(); ++i) {
            closed += std::abs(sa[i] - sc[i]);
        }
        closed /= static_cast<double>(sa.size());
        CHECK(wasserstein_1d(a, c) == doctest::Approx(closed).epsilon(1e-12));
    }
}

TEST_CASE("W1 between Beta(5,2) and Beta(2,5) samples matches the analytic value")
{
    const auto high = oracle::beta_samples(5.0, 2.0, 1000, 41);
    const auto low = oracle::beta_samples(2.0, 5.0, 1000, 42);
    const double analytic = oracle::beta_w1(5.0, 2.0, 2.0, 5.0);
    CHECK(std::abs(wasserstein_1d(high, low) - analytic) <= 0.02);
}

// ---- KDE -----------------------------------------------------------------

TEST_CASE("KDE integrates to one")
{
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(static_cast<std::size_t>(2 + trial * 7));
        for (auto& x : s) {
            x = trial % 2 ? pos(rng) : pos(rng) * pos(rng);
        }
        const KdeCurve k = kde_curve(s, 256 + static_cast<std::size_t>(trial));
        CHECK(std::abs(trapezoid_area(k) - 1.0) <= 1e-3);
        CHECK(k.grid.front() == 0.0);
        CHECK(k.grid.back() == 1.0);
        for (double d : k.density) {
            CHECK(d >= 0.0);
        }
    }
}

TEST_CASE("KDE of symmetric input is symmetric")
{
    const std::vector<double> s{0.1, 0.9, 0.25, 0.75, 0.5, 0.4, 0.6};
    const KdeCurve k = kde_curve(s);
    const std::size_t n = k.density.size();
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(k.density[i] - k.density[n - 1 - i]) <= 1e-9);
    }
}

TEST_CASE("degenerate KDE is a unit-area spike")
{
    const KdeCurve one = kde_curve(std::vector<double>{0.3});
    CHECK(one.degenerate);
    CHECK(std::abs(trapezoid_area(one) - 1.0) <= 1e-3);
    const KdeCurve same = kde_curve(std::vector<double>{1.0, 1.0, 1.0});
    CHECK(same.degenerate);
    CHECK(std::abs(trapezoid_area(same) - 1.0) <= 1e-3);
    CHECK_THROWS_AS(kde_curve(std::vector<double>{}), ValidationError);
}

TEST_CASE("KDE recovers the modes of a bimodal mixture")
{
    std::mt19937_64 rng(14);
    std::normal_distribution<double> left(0.3, 0.05);
    std::normal_distribution<double> right(0.7, 0.05);
    std::bernoulli_distribution coin(0.5);
    std::vector<double> s;
    while (s.size() < 10000) {
        const double x = coin(rng) ? left(rng) : right(rng);
        if (x >= 0.0 && x <= 1.0) {
            s.push_back(x);
        }
    }
    const KdeCurve k = kde_curve(s);
    auto peak_in = [&](double lo, double hi) {
        double best = -1.0;
        double at = 0.0;
        for (std::size_t i = 0; i < k.grid.size(); ++i) {
            if (k.grid[i] >= lo && k.grid[i] <= hi && k.density[i] > best) {
                best = k.density[i];
                at = k.grid[i];
            }
        }
        return at;
    };
    CHECK(std::abs(peak_in(0.0, 0.5) - 0.3) <= 0.02);
    CHECK(std::abs(peak_in(0.5, 1.0) - 0.7) <= 0.02);
}

TEST_CASE("split-half cohesion")
{
    CHECK(std::isnan(split_half_cohesion(std::vector<double>{0.5}, 20, 1)));
    CHECK(split_half_cohesion(std::vector<double>{0.5, 0.5, 0.5, 0.5}, 20, 1) == 0.0);
    const std::vector<double> s{0.1, 0.2, 0.8, 0.9, 0.5, 0.3};
    CHECK(split_half_cohesion(s, 20, 9) == split_half_cohesion(s, 20, 9));
    CHECK(split_half_cohesion(s, 20, 9) > 0.0);
}

// ---- position ------------------------------------------------------------

TEST_CASE("identical position multisets give a zero matrix")
{
    std::vector<std::vector<TransitionEvent>> groups(10, events_at({0.2, 0.5, 0.8}));
    const auto r = analyze_position(groups);
    for (double v : r.matrix.values) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("point-mass groups are 0.8 apart")
{
    std::vector<std::vector<TransitionEvent>> groups{events_at({0.9, 0.9}), events_at({0.1, 0.1, 0.1})};
    const auto r = analyze_position(groups);
    CHECK(r.matrix(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(r.kde.size() == 2);
}

TEST_CASE("Beta-distributed positions: group distance near analytic W1")
{
    std::vector<std::vector<TransitionEvent>> groups{events_at(oracle::beta_samples(2.0, 5.0, 1000, 7)),
                                                     events_at(oracle::beta_samples(5.0, 2.0, 1000, 8))};
    const auto r = analyze_position(groups);
    CHECK(std::abs(r.matrix(0, 1) - oracle::beta_w1(5.0, 2.0, 2.0, 5.0)) <= 0.02);
}

TEST_CASE("filter, absent groups and errors")
{
    std::vector<std::vector<TransitionEvent>> groups(4);
    groups[0] = {TransitionEvent{1, 4, 0.5, "a"}, TransitionEvent{2, 3, 0.9, "a"}};
    groups[1] = {TransitionEvent{2, 3, 0.2, "b"}};
    groups[2] = {TransitionEvent{1, 4, 0.7, "c"}, TransitionEvent{1, 4, 0.9, "c"}};
    PositionOptions opt;
    opt.filter = TransitionFilter{1, 4};
    const auto r = analyze_position(groups, opt);
    CHECK(r.present == std::vector<bool>{true, false, true, false});
    CHECK(r.samples[0] == std::vector<double>{0.5});
    CHECK(r.matrix(0, 2) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(std::isnan(r.matrix(0, 1)));
    CHECK(std::isnan(r.cohesion[1]));
    CHECK(std::isnan(r.cohesion[0])); // single sample
    CHECK(r.cohesion[2] >= 0.0);
    check_metric(r.matrix, r.present);

    opt.filter = TransitionFilter{0, 1};
    CHECK_THROWS_AS(analyze_position(groups, opt), DataError);
}

TEST_CASE("position analysis is deterministic under reordering and threads")
{
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> pos(0.01, 1.0);
    std::vector<std::vector<TransitionEvent>> groups(10);
    for (auto& g : groups) {
        for (int i = 0; i < 25; ++i) {
            g.push_back(TransitionEvent{1, 4, pos(rng), "d" + std::to_string(i)});
        }
    }
    PositionOptions opt;
    opt.seed = 3;
    const auto base = analyze_position(groups, opt);
    check_metric(base.matrix, base.present);
    for (auto& g : groups) {
        std::shuffle(g.begin(), g.end(), rng);
    }
    opt.threads = 4;
    const auto again = analyze_position(groups, opt);
    CHECK(again.matrix.values == base.matrix.values);
    CHECK(again.cohesion == base.cohesion);
    CHECK(again.kde[5].density == base.kde[5].density);
}

// ---- classification ------------------------------------------------------

TEST_CASE("all-equal distances and cohesions are noisy")
{
    const auto r = classify_regime(uniform_matrix(10, 1.0), std::vector<double>(10, 1.0));
    CHECK(r.verdict == Regime::noisy);
    CHECK(r.diagnostics.c_high_norm == 1.0);
    CHECK(r.diagnostics.cross_ratio == 1.0);
}

TEST_CASE("tight high side with loose low side is akp")
{
    const auto r = classify_regime(uniform_matrix(10, 1.0), cohesion_profile(0.1, 1.5, 1.0));
    CHECK(r.verdict == Regime::akp);
    CHECK(r.diagnostics.ref == doctest::Approx(0.88));
}

TEST_CASE("tight low side with loose high side is reverse akp")
{
    const auto r = classify_regime(uniform_matrix(10, 1.0), cohesion_profile(1.5, 0.1, 1.0));
    CHECK(r.verdict == Regime::reverse_akp);
}

TEST_CASE("both sides tight and far apart is ordered")
{
    // ref = (6 * 0.5 + 4 * 1.75) / 10 = 1; cross entries 12/7 against 1 elsewhere
    // make the cross mean 1.5 times the mean off-diagonal entry.
    DistanceMatrix m = uniform_matrix(10, 1.0);
    for (std::size_t h : {7u, 8u, 9u}) {
        for (std::size_t l : {0u, 1u, 2u}) {
            m(h, l) = m(l, h) = 12.0 / 7.0;
        }
    }
    const auto r = classify_regime(m, cohesion_profile(0.5, 0.5, 1.75));
    CHECK(r.diagnostics.ref == doctest::Approx(1.0));
    CHECK(r.diagnostics.cross_ratio == doctest::Approx(1.5));
    CHECK(r.verdict == Regime::ordered);

    // Without the separation the same cohesions are not ordered.
    CHECK(classify_regime(uniform_matrix(10, 1.0), cohesion_profile(0.5, 0.5, 1.75)).verdict == Regime::noisy);
}

TEST_CASE("classification is invariant under uniform scaling")
{
    std::mt19937_64 rng(16);
    std::uniform_real_distribution<double> u(0.05, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        DistanceMatrix m(10);
        for (std::size_t i = 0; i < 10; ++i) {
            for (std::size_t j = i + 1; j < 10; ++j) {
                m(i, j) = m(j, i) = u(rng);
            }
        }
        std::vector<double> c(10);
        for (auto& x : c) {
            x = u(rng);
        }
        const auto base = classify_regime(m, c);
        for (double scale : {0.001, 3.0, 1e6}) {
            DistanceMatrix ms = m;
            for (auto& v : ms.values) {
                v *= scale;
            }
            std::vector<double> cs = c;
            for (auto& v : cs) {
                v *= scale;
            }
            const auto scaled = classify_regime(ms, cs);
            CHECK(scaled.verdict == base.verdict);
            CHECK(scaled.diagnostics.c_high_norm == doctest::Approx(base.diagnostics.c_high_norm));
            CHECK(scaled.diagnostics.cross_ratio == doctest::Approx(base.diagnostics.cross_ratio));
        }
    }
}

TEST_CASE("zero cohesions use ref = 1")
{
    const auto r = classify_regime(uniform_matrix(10, 0.0), std::vector<double>(10, 0.0));
    CHECK(r.diagnostics.ref == 1.0);
    CHECK(r.diagnostics.cross_ratio == 1.0);
    CHECK(r.verdict == Regime::noisy);
}

TEST_CASE("missing groups are skipped")
{
    DistanceMatrix m = uniform_matrix(10, 1.0);
    std::vector<double> c = cohesion_profile(0.1, 1.5, 1.0);
    for (std::size_t j = 0; j < 10; ++j) {
        if (j != 5) {
            m(5, j) = m(j, 5) = NAN;
        }
    }
    c[5] = NAN;
    const auto r = classify_regime(m, c);
    CHECK(r.verdict == Regime::akp);
    CHECK(std::isfinite(r.diagnostics.grand_mean));
}

TEST_CASE("malformed classification input is rejected")
{
    CHECK_THROWS_AS(classify_regime(uniform_matrix(9, 1.0), std::vector<double>(10, 1.0)), ValidationError);
    CHECK_THROWS_AS(classify_regime(uniform_matrix(10, 1.0), std::vector<double>(9, 1.0)), ValidationError);
    DistanceMatrix asym = uniform_matrix(10, 1.0);
    asym(0, 1) = 2.0;
    CHECK_THROWS_AS(classify_regime(asym, std::vector<double>(10, 1.0)), ValidationError);
    DistanceMatrix diag = uniform_matrix(10, 1.0);
    diag(4, 4) = 1.0;
    CHECK_THROWS_AS(classify_regime(diag, std::vector<double>(10, 1.0)), ValidationError);
    std::vector<double> negative(10, 1.0);
    negative[0] = -1.0;
    CHECK_THROWS_AS(classify_regime(uniform_matrix(10, 1.0), negative), ValidationError);
    GroupBlocks bad;
    bad.high = {12};
    CHECK_THROWS_AS(classify_regime(uniform_matrix(10, 1.0), std::vector<double>(10, 1.0), {}, bad), ValidationError);
    CHECK_THROWS_AS(GroupBlocks::for_bins(5), ValidationError);
    const GroupBlocks b20 = GroupBlocks::for_bins(20);
    CHECK(b20.high == std::vector<int>{17, 18, 19});
    CHECK(b20.low == std::vector<int>{0, 1, 2});
}

TEST_CASE("names parse and print")
{
    for (Regime r : {Regime::ordered, Regime::akp, Regime::reverse_akp, Regime::noisy}) {
        CHECK(parse_regime(to_string(r)) == r);
    }
    CHECK_FALSE(parse_regime("chaos").has_value());
    CHECK(parse_aggregation("min") == Aggregation::min);
    CHECK_FALSE(parse_aggregation("median").has_value());
}
