#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "svgap/bipartite_gi.hpp"
#include "svgap/error.hpp"
#include "svgap/rng.hpp"

using namespace svgap;

namespace {

// Tries every pair of left and right permutations; only for tiny graphs.
bool naive_isomorphic(const BipartiteGraph& g, const BipartiteGraph& h) {
    if (g.n_left() != h.n_left() || g.n_right() != h.n_right() || g.edge_count() != h.edge_count()) return false;
    std::vector<int> L(static_cast<std::size_t>(g.n_left()));
    std::iota(L.begin(), L.end(), 0);
    do {
        std::vector<int> R(static_cast<std::size_t>(g.n_right()));
        std::iota(R.begin(), R.end(), 0);
        do {
            bool ok = true;
            for (const auto& [l, r] : g.edges())
                if (!h.has_edge(L[static_cast<std::size_t>(l)], R[static_cast<std::size_t>(r)])) {
                    ok = false;
                    break;
                }
            if (ok) return true;
        } while (std::next_permutation(R.begin(), R.end()));
    } while (std::next_permutation(L.begin(), L.end()));
    return false;
}

BipartiteGraph flip_one_edge(const BipartiteGraph& g, std::uint64_t seed) {
    auto m = g.biadjacency();
    SplitMix64 rng(seed);
    const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m.rows())));
    const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m.cols())));
    m(i, j) = 1.0 - m(i, j);
    return graph_from_biadjacency(m);
}

}  // namespace

TEST_CASE("parse and format round trip") {
    const auto g = parse_graph("3 2 3\n0 1\n2 0\n1 1\n");
    CHECK(g.n_left() == 3);
    CHECK(g.n_right() == 2);
    CHECK(g.edge_count() == 3);
    CHECK(g.has_edge(2, 0));
    CHECK_FALSE(g.has_edge(0, 0));
    CHECK(format_graph(g) == "3 2 3\n0 1\n1 1\n2 0\n");
    CHECK(format_graph(parse_graph(format_graph(g))) == format_graph(g));
    CHECK(parse_graph("1 1 0\n").edge_count() == 0);
    CHECK(parse_graph("2 2 1\n0 0\n\n\n").edge_count() == 1);
}

TEST_CASE("parse errors carry line numbers") {
    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            parse_graph(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("2 2 2\n0 0\n0 0\n") == 3);
    CHECK(line_of("") == 1);
    CHECK(line_of("2 2\n") == 1);
    CHECK(line_of("2 2 x\n") == 1);
    CHECK(line_of("2 2 1\n0 2\n") == 2);
    CHECK(line_of("2 2 1\n-1 0\n") == 2);
    CHECK(line_of("2 2 2\n0 0\n") == 3);
    CHECK(line_of("2 2 1\n0 0\n1 1\n") == 3);
    CHECK(line_of("2 2 1\n0 0 0\n") == 2);
    CHECK(line_of("1 1 2\n") == 1);
}

TEST_CASE("graph construction rejects bad input") {
    CHECK_THROWS_AS(BipartiteGraph(2, 2, {{0, 0}, {0, 0}}), SpecError);
    CHECK_THROWS_AS(BipartiteGraph(2, 2, {{2, 0}}), SpecError);
    Eigen::MatrixXd m(1, 2);
    m << 1.0, 0.5;
    CHECK_THROWS_AS(graph_from_biadjacency(m), SpecError);
}

TEST_CASE("verify_mapping") {
    const BipartiteGraph g(2, 2, {{0, 0}});
    const BipartiteGraph h(2, 2, {{1, 1}});
    CHECK(verify_mapping(g, h, {1, 0}, {1, 0}));
    CHECK_FALSE(verify_mapping(g, h, {0, 1}, {0, 1}));
    CHECK_THROWS_AS(verify_mapping(g, h, {0, 0}, {1, 0}), SpecError);
    CHECK_THROWS_AS(verify_mapping(g, h, {0}, {1, 0}), SpecError);
}

TEST_CASE("permutations and random graphs") {
    const auto p = random_permutation(30, 7);
    std::vector<int> s = p;
    std::sort(s.begin(), s.end());
    for (int k = 0; k < 30; ++k) CHECK(s[static_cast<std::size_t>(k)] == k);
    CHECK(random_permutation(30, 7) == p);
    CHECK(random_permutation(30, 8) != p);

    const auto g = random_bipartite(20, 11);
    CHECK(g.n_left() == 20);
    CHECK(format_graph(random_bipartite(20, 11)) == format_graph(g));
    // Bernoulli(1/2) edges: 400 pairs, mean 200, sd 10
    CHECK(g.edge_count() > 150);
    CHECK(g.edge_count() < 250);
    const auto L = random_permutation(20, 1), R = random_permutation(20, 2);
    CHECK(verify_mapping(g, permute_graph(g, L, R), L, R));
}

TEST_CASE("examples with known verdicts") {
    SUBCASE("single edge moved") {
        const BipartiteGraph g(2, 2, {{0, 0}});
        const BipartiteGraph h(2, 2, {{1, 1}});
        const auto r = spectral_match(g, h);
        REQUIRE(r.verdict == GiResult::Verdict::Isomorphic);
        CHECK(r.left_map == std::vector<int>{1, 0});
        CHECK(r.right_map == std::vector<int>{1, 0});
        std::ostringstream os;
        write_mapping(os, r);
        CHECK(os.str() == "L 0→1\nL 1→0\nR 0→1\nR 1→0\n");
    }
    SUBCASE("edge counts differ") {
        const BipartiteGraph g(2, 2, {{0, 0}});
        const BipartiteGraph h(2, 2, {{0, 0}, {1, 1}});
        const auto r = spectral_match(g, h);
        CHECK(r.verdict == GiResult::Verdict::NotIsomorphic);
        CHECK(r.witness == GiResult::Witness::EdgeCount);
        CHECK(brute_force_gi(g, h).witness == GiResult::Witness::EdgeCount);
    }
    SUBCASE("perfect matching has a repeated singular value") {
        const BipartiteGraph g(2, 2, {{0, 0}, {1, 1}});
        const auto r = spectral_match(g, g);
        CHECK(r.verdict == GiResult::Verdict::Indeterminate);
        CHECK(r.reason == GiResult::Reason::NonSimpleSpectrum);
        CHECK(brute_force_gi(g, g).verdict == GiResult::Verdict::Isomorphic);
    }
    SUBCASE("degree sequences differ") {
        // left degrees {2,0} against {1,1}
        const BipartiteGraph g(2, 2, {{0, 0}, {0, 1}});
        const BipartiteGraph h(2, 2, {{0, 0}, {1, 1}});
        CHECK(spectral_match(g, h).witness == GiResult::Witness::DegreeSequence);
    }
    SUBCASE("equal degrees, different spectra") {
        // a 6-cycle against two disjoint 4-cycle halves is impossible at 3+3;
        // use a path of length 5 against a 4-cycle plus an edge
        const BipartiteGraph g(3, 3, {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}});
        const BipartiteGraph h(3, 3, {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 2}});
        const auto r = spectral_match(g, h);
        CHECK(brute_force_gi(g, h).verdict == GiResult::Verdict::NotIsomorphic);
        CHECK(r.verdict != GiResult::Verdict::Isomorphic);
    }
    SUBCASE("empty graph") {
        const BipartiteGraph g(0, 0, {});
        CHECK(spectral_match(g, g).verdict == GiResult::Verdict::Isomorphic);
    }
}

TEST_CASE("spectral_match preconditions") {
    const BipartiteGraph a(2, 3, {});
    const BipartiteGraph b(2, 2, {});
    const BipartiteGraph c(3, 3, {});
    CHECK_THROWS_AS(spectral_match(a, a), SpecError);
    CHECK_THROWS_AS(spectral_match(b, c), SpecError);
    SpectralMatchOptions bad;
    bad.tol = 0.0;
    CHECK_THROWS_AS(spectral_match(b, b, bad), SpecError);
    CHECK_THROWS_AS(brute_force_gi(BipartiteGraph(9, 9, {}), BipartiteGraph(9, 9, {})), SpecError);
}

TEST_CASE("brute force agrees with the naive double enumeration") {
    // 3+3 graphs: every pair over 60 random graphs
    std::vector<BipartiteGraph> gs;
    for (std::uint64_t s = 0; s < 60; ++s) gs.push_back(random_bipartite(3, 1000 + s));
    for (std::size_t a = 0; a < gs.size(); ++a)
        for (std::size_t b = a; b < gs.size(); ++b) {
            const auto r = brute_force_gi(gs[a], gs[b]);
            const bool truth = naive_isomorphic(gs[a], gs[b]);
            REQUIRE((r.verdict == GiResult::Verdict::Isomorphic) == truth);
            if (truth) CHECK(verify_mapping(gs[a], gs[b], r.left_map, r.right_map));
        }
}

TEST_CASE("spectral verdicts never contradict brute force on 6+6") {
    std::size_t decided = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto g = random_bipartite(6, 2000 + s);
        BipartiteGraph h;
        switch (s % 3) {
            case 0:
                h = random_bipartite(6, 5000 + s);
                break;
            case 1:
                h = permute_graph(g, random_permutation(6, 3 * s), random_permutation(6, 3 * s + 1));
                break;
            default:
                h = flip_one_edge(permute_graph(g, random_permutation(6, s), random_permutation(6, s + 9)), s);
        }
        const auto truth = brute_force_gi(g, h);
        const auto r = spectral_match(g, h);
        if (r.verdict == GiResult::Verdict::Indeterminate) continue;
        ++decided;
        INFO("seed " << s << ": " << r.describe() << " vs " << truth.describe());
        CHECK(r.verdict == truth.verdict);
        if (r.verdict == GiResult::Verdict::Isomorphic) CHECK(verify_mapping(g, h, r.left_map, r.right_map));
    }
    CHECK(decided > 50);
}

TEST_CASE("relabelled 20+20 copies are recovered") {
    std::size_t indeterminate = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto g = random_bipartite(20, 9000 + s);
        const auto L = random_permutation(20, 2 * s), R = random_permutation(20, 2 * s + 1);
        const auto h = permute_graph(g, L, R);
        const auto r = spectral_match(g, h);
        if (r.verdict == GiResult::Verdict::Indeterminate) {
            ++indeterminate;
            continue;
        }
        REQUIRE(r.verdict == GiResult::Verdict::Isomorphic);
        CHECK(verify_mapping(g, h, r.left_map, r.right_map));
    }
    CHECK(indeterminate <= 2);
}

TEST_CASE("G against itself gives the identity") {
    const auto g = random_bipartite(20, 77);
    const auto r = spectral_match(g, g);
    REQUIRE(r.verdict == GiResult::Verdict::Isomorphic);
    std::vector<int> id(20);
    std::iota(id.begin(), id.end(), 0);
    CHECK(r.left_map == id);
    CHECK(r.right_map == id);
}
