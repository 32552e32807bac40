#include "svgap/bipartite_gi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "svgap/ensemble.hpp"
#include "svgap/error.hpp"
#include "svgap/rng.hpp"
#include "svgap/spectral.hpp"

namespace svgap {

// Graph ---------------------------------------------------------------------------

BipartiteGraph::BipartiteGraph(int n_left, int n_right, std::vector<std::pair<int, int>> edges)
    : n_left_(n_left), n_right_(n_right), edges_(std::move(edges)) {
    if (n_left < 0 || n_right < 0) throw SpecError("graph: negative vertex count");
    adj_.assign(static_cast<std::size_t>(n_left) * static_cast<std::size_t>(n_right), 0);
    for (const auto& [l, r] : edges_) {
        if (l < 0 || l >= n_left || r < 0 || r >= n_right)
            throw SpecError("graph: edge (" + std::to_string(l) + ", " + std::to_string(r) + ") out of range");
        char& slot = adj_[static_cast<std::size_t>(l) * static_cast<std::size_t>(n_right) + static_cast<std::size_t>(r)];
        if (slot) throw SpecError("graph: duplicate edge (" + std::to_string(l) + ", " + std::to_string(r) + ")");
        slot = 1;
    }
    std::sort(edges_.begin(), edges_.end());
}

bool BipartiteGraph::has_edge(int l, int r) const {
    return adj_[static_cast<std::size_t>(l) * static_cast<std::size_t>(n_right_) + static_cast<std::size_t>(r)] != 0;
}

std::vector<int> BipartiteGraph::left_degrees() const {
    std::vector<int> d(static_cast<std::size_t>(n_left_), 0);
    for (const auto& e : edges_) ++d[static_cast<std::size_t>(e.first)];
    return d;
}

std::vector<int> BipartiteGraph::right_degrees() const {
    std::vector<int> d(static_cast<std::size_t>(n_right_), 0);
    for (const auto& e : edges_) ++d[static_cast<std::size_t>(e.second)];
    return d;
}

Eigen::MatrixXd BipartiteGraph::biadjacency() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_left_, n_right_);
    for (const auto& [l, r] : edges_) m(l, r) = 1.0;
    return m;
}

namespace {

bool read_ints(const std::string& line, std::vector<long long>& out) {
    std::istringstream ss(line);
    out.clear();
    long long v;
    while (ss >> v) out.push_back(v);
    if (!ss.eof()) return false;
    return true;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

BipartiteGraph parse_graph(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<long long> v;
    if (!std::getline(is, line)) throw ParseError(1, "empty input, expected 'n_left n_right n_edges'");
    ++lineno;
    if (!read_ints(line, v) || v.size() != 3) throw ParseError(lineno, "expected 'n_left n_right n_edges'");
    const long long nl = v[0], nr = v[1], ne = v[2];
    if (nl < 0 || nr < 0 || ne < 0) throw ParseError(lineno, "counts must be nonnegative");
    if (nl > 1 << 20 || nr > 1 << 20) throw ParseError(lineno, "vertex count too large");
    if (ne > nl * nr) throw ParseError(lineno, "more edges than vertex pairs");

    std::vector<std::pair<int, int>> edges;
    std::vector<char> seen(static_cast<std::size_t>(nl * nr), 0);
    for (long long k = 0; k < ne; ++k) {
        if (!std::getline(is, line))
            throw ParseError(lineno + 1, "missing edge line (" + std::to_string(k) + " of " + std::to_string(ne) +
                                             " read)");
        ++lineno;
        if (!read_ints(line, v) || v.size() != 2) throw ParseError(lineno, "expected 'l r'");
        if (v[0] < 0 || v[0] >= nl) throw ParseError(lineno, "left index " + std::to_string(v[0]) + " out of range");
        if (v[1] < 0 || v[1] >= nr) throw ParseError(lineno, "right index " + std::to_string(v[1]) + " out of range");
        char& s = seen[static_cast<std::size_t>(v[0] * nr + v[1])];
        if (s) throw ParseError(lineno, "duplicate edge " + std::to_string(v[0]) + " " + std::to_string(v[1]));
        s = 1;
        edges.emplace_back(static_cast<int>(v[0]), static_cast<int>(v[1]));
    }
    while (std::getline(is, line)) {
        ++lineno;
        if (!blank(line)) throw ParseError(lineno, "unexpected content after the declared edges");
    }
    return BipartiteGraph(static_cast<int>(nl), static_cast<int>(nr), std::move(edges));
}

BipartiteGraph parse_graph(const std::string& text) {
    std::istringstream is(text);
    return parse_graph(is);
}

std::string format_graph(const BipartiteGraph& g) {
    std::ostringstream os;
    os << g.n_left() << ' ' << g.n_right() << ' ' << g.edge_count() << '\n';
    for (const auto& [l, r] : g.edges()) os << l << ' ' << r << '\n';
    return os.str();
}

BipartiteGraph graph_from_biadjacency(const Eigen::MatrixXd& m) {
    std::vector<std::pair<int, int>> edges;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double x = m(i, j);
            if (std::abs(x - 1.0) <= 1e-12)
                edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
            else if (std::abs(x) > 1e-12)
                throw SpecError("graph_from_biadjacency: entries must be 0 or 1");
        }
    return BipartiteGraph(static_cast<int>(m.rows()), static_cast<int>(m.cols()), std::move(edges));
}

BipartiteGraph random_bipartite(int n, std::uint64_t seed) {
    return graph_from_biadjacency(sample_matrix(EnsembleSpec::bernoulli_adjacency(n, n, seed)).effective);
}

BipartiteGraph permute_graph(const BipartiteGraph& g, const std::vector<int>& left_map,
                             const std::vector<int>& right_map) {
    if (left_map.size() != static_cast<std::size_t>(g.n_left()) ||
        right_map.size() != static_cast<std::size_t>(g.n_right()))
        throw SpecError("permute_graph: map sizes do not match the graph");
    std::vector<std::pair<int, int>> edges;
    for (const auto& [l, r] : g.edges())
        edges.emplace_back(left_map[static_cast<std::size_t>(l)], right_map[static_cast<std::size_t>(r)]);
    return BipartiteGraph(g.n_left(), g.n_right(), std::move(edges));
}

std::vector<int> random_permutation(int n, std::uint64_t seed) {
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    SplitMix64 rng(seed);
    for (std::size_t k = p.size(); k > 1; --k) std::swap(p[k - 1], p[rng.below(k)]);
    return p;
}

namespace {

bool is_bijection(const std::vector<int>& m, int n) {
    if (m.size() != static_cast<std::size_t>(n)) return false;
    std::vector<char> hit(static_cast<std::size_t>(n), 0);
    for (int x : m) {
        if (x < 0 || x >= n || hit[static_cast<std::size_t>(x)]) return false;
        hit[static_cast<std::size_t>(x)] = 1;
    }
    return true;
}

}  // namespace

bool verify_mapping(const BipartiteGraph& g, const BipartiteGraph& h, const std::vector<int>& left_map,
                    const std::vector<int>& right_map) {
    if (g.n_left() != h.n_left() || g.n_right() != h.n_right())
        throw SpecError("verify_mapping: graphs differ in size");
    if (!is_bijection(left_map, g.n_left()) || !is_bijection(right_map, g.n_right()))
        throw SpecError("verify_mapping: maps must be bijections");
    if (g.edge_count() != h.edge_count()) return false;
    for (const auto& [l, r] : g.edges())
        if (!h.has_edge(left_map[static_cast<std::size_t>(l)], right_map[static_cast<std::size_t>(r)])) return false;
    return true;
}

std::string GiResult::describe() const {
    switch (verdict) {
        case Verdict::Isomorphic:
            return "isomorphic";
        case Verdict::Indeterminate:
            return reason == Reason::NonSimpleSpectrum ? "indeterminate: non-simple spectrum"
                                                       : "indeterminate: entry collision";
        case Verdict::NotIsomorphic:
            break;
    }
    switch (witness) {
        case Witness::EdgeCount:
            return "not isomorphic: edge counts differ";
        case Witness::DegreeSequence:
            return "not isomorphic: degree sequences differ";
        case Witness::SpectrumMismatch: {
            char buf[96];
            std::snprintf(buf, sizeof buf, "not isomorphic: singular value %zu differs by %.6g", index, difference);
            return buf;
        }
        case Witness::ClassMismatch:
            return "not isomorphic: refined vertex classes differ";
        case Witness::VerificationFailed:
            return "not isomorphic: the unique candidate mapping fails verification";
        case Witness::Exhaustive:
            return "not isomorphic: exhaustive search found no mapping";
        case Witness::None:
            break;
    }
    return "not isomorphic";
}

namespace {

GiResult not_isomorphic(GiResult::Witness w) {
    GiResult r;
    r.verdict = GiResult::Verdict::NotIsomorphic;
    r.witness = w;
    return r;
}

GiResult indeterminate(GiResult::Reason why) {
    GiResult r;
    r.verdict = GiResult::Verdict::Indeterminate;
    r.reason = why;
    return r;
}

// Shared cheap rejections; returns true and fills r when decided.
bool cheap_reject(const BipartiteGraph& g, const BipartiteGraph& h, GiResult& r) {
    if (g.edge_count() != h.edge_count()) {
        r = not_isomorphic(GiResult::Witness::EdgeCount);
        return true;
    }
    auto sorted = [](std::vector<int> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    if (sorted(g.left_degrees()) != sorted(h.left_degrees()) ||
        sorted(g.right_degrees()) != sorted(h.right_degrees())) {
        r = not_isomorphic(GiResult::Witness::DegreeSequence);
        return true;
    }
    return false;
}

// Whether x has a unique largest |entry|, separated by more than q.
bool unique_peak(const Eigen::VectorXd& x, double q, double& sign) {
    Eigen::Index arg = 0;
    const double top = x.cwiseAbs().maxCoeff(&arg);
    for (Eigen::Index k = 0; k < x.size(); ++k)
        if (k != arg && std::abs(x(k)) > top - q) return false;
    sign = x(arg) < 0.0 ? -1.0 : 1.0;
    return true;
}

using Signature = std::vector<long long>;

}  // namespace

GiResult spectral_match(const BipartiteGraph& g, const BipartiteGraph& h, const SpectralMatchOptions& opts) {
    if (!g.balanced() || !h.balanced())
        throw SpecError("spectral_match: unbalanced bipartite graphs are not supported");
    if (g.n_left() != h.n_left()) throw SpecError("spectral_match: graphs differ in size");
    if (!(opts.tol > 0.0)) throw SpecError("spectral_match: tol must be positive");
    const int n = g.n_left();

    GiResult result;
    if (cheap_reject(g, h, result)) return result;
    if (n == 0) {
        result.verdict = GiResult::Verdict::Isomorphic;
        return result;
    }

    const auto dg = svd(g.biadjacency(), true);
    const auto dh = svd(h.biadjacency(), true);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double diff = std::abs(dg.values(k) - dh.values(k));
        if (diff > opts.tol) {
            result = not_isomorphic(GiResult::Witness::SpectrumMismatch);
            result.index = static_cast<std::size_t>(k) + 1;
            result.difference = diff;
            return result;
        }
    }
    if (n >= 2 && (!gap_report(dg.values, opts.tol).simple || !gap_report(dh.values, opts.tol).simple))
        return indeterminate(GiResult::Reason::NonSimpleSpectrum);

    double max_entry = 0.0;
    for (const auto* d : {&dg, &dh})
        max_entry = std::max({max_entry, d->left_vectors.cwiseAbs().maxCoeff(), d->right_vectors.cwiseAbs().maxCoeff()});
    const double q = opts.quantum_scale * (1.0 + max_entry);

    // Singular vectors are accurate to about eps * sigma_1 / gap; when that is
    // not well below the quantum, entry keys cannot be trusted.
    if (n >= 2) {
        const double gap = std::min(gap_report(dg.values, 0.0).delta_min, gap_report(dh.values, 0.0).delta_min);
        const double err = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + dg.values(0)) / gap;
        if (err > q / 100.0) return indeterminate(GiResult::Reason::NonSimpleSpectrum);
    }

    // Vertex order in the union: g-left, g-right, h-left, h-right.
    const std::size_t nn = static_cast<std::size_t>(n);
    std::vector<Signature> sig(4 * nn);
    const BipartiteGraph* graphs[2] = {&g, &h};
    const SpectralDecomposition* decs[2] = {&dg, &dh};
    for (int side = 0; side < 2; ++side) {
        for (std::size_t gi = 0; gi < 2; ++gi) {
            const auto deg = side == 0 ? graphs[gi]->left_degrees() : graphs[gi]->right_degrees();
            for (std::size_t v = 0; v < nn; ++v)
                sig[gi * 2 * nn + static_cast<std::size_t>(side) * nn + v] = {side, deg[v]};
        }
        for (Eigen::Index k = 0; k < n; ++k) {
            // each vector anchors its own sign at a unique largest entry;
            // both graphs must agree on the mode
            double sgn[2] = {1.0, 1.0};
            bool anchored = true;
            for (std::size_t gi = 0; gi < 2; ++gi) {
                const auto& M = side == 0 ? decs[gi]->left_vectors : decs[gi]->right_vectors;
                anchored = unique_peak(M.col(k), q, sgn[gi]) && anchored;
            }
            for (std::size_t gi = 0; gi < 2; ++gi) {
                const auto& M = side == 0 ? decs[gi]->left_vectors : decs[gi]->right_vectors;
                for (std::size_t v = 0; v < nn; ++v) {
                    const double x = M(static_cast<Eigen::Index>(v), k);
                    const double y = anchored ? sgn[gi] * x : std::abs(x);
                    sig[gi * 2 * nn + static_cast<std::size_t>(side) * nn + v].push_back(std::llround(y / q));
                }
            }
        }
    }

    // Colour refinement on the disjoint union with a shared palette.
    auto palette = [](const std::vector<Signature>& s) {
        std::map<Signature, int> ids;
        for (const auto& x : s) ids.emplace(x, 0);
        int next = 0;
        for (auto& [_, id] : ids) id = next++;
        std::vector<int> colour(s.size());
        for (std::size_t v = 0; v < s.size(); ++v) colour[v] = ids.at(s[v]);
        return std::make_pair(colour, next);
    };
    auto [colour, classes] = palette(sig);
    while (true) {
        std::vector<Signature> next(4 * nn);
        for (std::size_t v = 0; v < 4 * nn; ++v) next[v] = {colour[v]};
        for (std::size_t gi = 0; gi < 2; ++gi) {
            const std::size_t base = gi * 2 * nn;
            for (const auto& [l, r] : graphs[gi]->edges()) {
                const std::size_t lv = base + static_cast<std::size_t>(l);
                const std::size_t rv = base + nn + static_cast<std::size_t>(r);
                next[lv].push_back(colour[rv]);
                next[rv].push_back(colour[lv]);
            }
        }
        for (auto& s : next) std::sort(s.begin() + 1, s.end());
        auto [c2, k2] = palette(next);
        if (k2 == classes) break;
        colour = std::move(c2);
        classes = k2;
    }

    std::vector<int> count_g(static_cast<std::size_t>(classes), 0), count_h(static_cast<std::size_t>(classes), 0);
    std::vector<int> where_h(static_cast<std::size_t>(classes), -1);
    for (std::size_t v = 0; v < 2 * nn; ++v) ++count_g[static_cast<std::size_t>(colour[v])];
    for (std::size_t v = 0; v < 2 * nn; ++v) {
        const auto c = static_cast<std::size_t>(colour[2 * nn + v]);
        ++count_h[c];
        where_h[c] = static_cast<int>(v);
    }
    if (count_g != count_h) return not_isomorphic(GiResult::Witness::ClassMismatch);
    if (std::any_of(count_g.begin(), count_g.end(), [](int c) { return c > 1; }))
        return indeterminate(GiResult::Reason::EntryCollision);

    result = GiResult{};
    result.left_map.resize(nn);
    result.right_map.resize(nn);
    for (std::size_t v = 0; v < nn; ++v) {
        result.left_map[v] = where_h[static_cast<std::size_t>(colour[v])];
        result.right_map[v] = where_h[static_cast<std::size_t>(colour[nn + v])] - n;
    }
    if (!is_bijection(result.left_map, n) || !is_bijection(result.right_map, n))
        return not_isomorphic(GiResult::Witness::ClassMismatch);
    if (!verify_mapping(g, h, result.left_map, result.right_map))
        return not_isomorphic(GiResult::Witness::VerificationFailed);
    result.verdict = GiResult::Verdict::Isomorphic;
    return result;
}

GiResult brute_force_gi(const BipartiteGraph& g, const BipartiteGraph& h) {
    if (g.n_left() > brute_force_limit || h.n_left() > brute_force_limit)
        throw SpecError("brute_force_gi: at most " + std::to_string(brute_force_limit) + " left vertices");
    if (g.n_left() != h.n_left() || g.n_right() != h.n_right())
        throw SpecError("brute_force_gi: graphs differ in size");
    GiResult result;
    if (cheap_reject(g, h, result)) return result;

    const int nl = g.n_left(), nr = g.n_right();
    // neighbourhood of each right vertex of h as a bitmask over left vertices
    std::vector<std::pair<unsigned, int>> target(static_cast<std::size_t>(nr));
    for (int r = 0; r < nr; ++r) {
        unsigned m = 0;
        for (int l = 0; l < nl; ++l)
            if (h.has_edge(l, r)) m |= 1u << l;
        target[static_cast<std::size_t>(r)] = {m, r};
    }
    std::sort(target.begin(), target.end());

    std::vector<int> perm(static_cast<std::size_t>(nl));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::pair<unsigned, int>> image(static_cast<std::size_t>(nr));
    do {
        for (int r = 0; r < nr; ++r) {
            unsigned m = 0;
            for (int l = 0; l < nl; ++l)
                if (g.has_edge(l, r)) m |= 1u << perm[static_cast<std::size_t>(l)];
            image[static_cast<std::size_t>(r)] = {m, r};
        }
        std::sort(image.begin(), image.end());
        bool same = true;
        for (std::size_t k = 0; k < image.size() && same; ++k) same = image[k].first == target[k].first;
        if (same) {
            result.verdict = GiResult::Verdict::Isomorphic;
            result.left_map = perm;
            result.right_map.assign(static_cast<std::size_t>(nr), 0);
            for (std::size_t k = 0; k < image.size(); ++k)
                result.right_map[static_cast<std::size_t>(image[k].second)] = target[k].second;
            return result;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return not_isomorphic(GiResult::Witness::Exhaustive);
}

void write_mapping(std::ostream& os, const GiResult& r) {
    for (std::size_t i = 0; i < r.left_map.size(); ++i) os << "L " << i << "→" << r.left_map[i] << '\n';
    for (std::size_t i = 0; i < r.right_map.size(); ++i) os << "R " << i << "→" << r.right_map[i] << '\n';
}

}  // namespace svgap
