#pragma once

// Isomorphism of balanced bipartite graphs through the singular value
// decomposition of the biadjacency matrix. A simple singular spectrum pins
// every singular vector up to sign; vertex classes keyed by vector entries are
// then refined until they are singletons, which yields the only candidate
// mapping. A brute-force search serves as the oracle on small graphs.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace svgap {

class BipartiteGraph {
public:
    BipartiteGraph() = default;
    /// Throws SpecError for out-of-range indices or duplicate edges.
    BipartiteGraph(int n_left, int n_right, std::vector<std::pair<int, int>> edges);

    int n_left() const noexcept { return n_left_; }
    int n_right() const noexcept { return n_right_; }
    bool balanced() const noexcept { return n_left_ == n_right_; }
    /// Sorted (left, right) pairs.
    const std::vector<std::pair<int, int>>& edges() const noexcept { return edges_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    bool has_edge(int l, int r) const;

    std::vector<int> left_degrees() const;
    std::vector<int> right_degrees() const;

    /// n_left x n_right 0/1 matrix.
    Eigen::MatrixXd biadjacency() const;

private:
    int n_left_ = 0;
    int n_right_ = 0;
    std::vector<std::pair<int, int>> edges_;
    std::vector<char> adj_;
};

/// First line "n_left n_right n_edges", then one "l r" line per edge (0-based).
/// Errors carry the offending line number.
BipartiteGraph parse_graph(std::istream& is);
BipartiteGraph parse_graph(const std::string& text);
std::string format_graph(const BipartiteGraph& g);

/// Graph from a 0/1 matrix; entries must be within 1e-12 of 0 or 1.
BipartiteGraph graph_from_biadjacency(const Eigen::MatrixXd& m);

/// Bernoulli(1/2) biadjacency drawn through the ensemble preset.
BipartiteGraph random_bipartite(int n, std::uint64_t seed);

/// Image of g under left_map and right_map: edge (l, r) becomes (L[l], R[r]).
BipartiteGraph permute_graph(const BipartiteGraph& g, const std::vector<int>& left_map,
                             const std::vector<int>& right_map);

/// Uniform permutation of {0..n-1}.
std::vector<int> random_permutation(int n, std::uint64_t seed);

/// (l, r) in E(g) iff (L[l], R[r]) in E(h). Throws SpecError unless both maps
/// are bijections of the right sizes.
bool verify_mapping(const BipartiteGraph& g, const BipartiteGraph& h, const std::vector<int>& left_map,
                    const std::vector<int>& right_map);

struct GiResult {
    enum class Verdict { Isomorphic, NotIsomorphic, Indeterminate };
    enum class Witness {
        None,
        EdgeCount,
        DegreeSequence,
        SpectrumMismatch,    // index and difference set
        ClassMismatch,       // refined vertex classes differ in size
        VerificationFailed,  // unique candidate mapping does not preserve edges
        Exhaustive           // brute force found no mapping
    };
    enum class Reason { None, NonSimpleSpectrum, EntryCollision };

    Verdict verdict = Verdict::Indeterminate;
    Witness witness = Witness::None;
    Reason reason = Reason::None;
    std::size_t index = 0;  // 1-based singular index for SpectrumMismatch
    double difference = 0.0;
    std::vector<int> left_map;
    std::vector<int> right_map;

    std::string describe() const;
};

struct SpectralMatchOptions {
    double tol = 1e-8;
    /// Quantum for entry keys is quantum_scale * (1 + max |entry|).
    double quantum_scale = 1e-7;
};

/// Cheap invariants first, then the singular values; a simple spectrum lets
/// sign-anchored vector entries drive colour refinement to a mapping, which is
/// verified before Isomorphic is reported.
/// Throws SpecError for unbalanced graphs or graphs of different sizes.
GiResult spectral_match(const BipartiteGraph& g, const BipartiteGraph& h, const SpectralMatchOptions& opts = {});

inline constexpr int brute_force_limit = 8;

/// Exhaustive search over left permutations, matching right neighbourhoods as
/// bitmasks. Requires n_left <= 8. Never Indeterminate.
GiResult brute_force_gi(const BipartiteGraph& g, const BipartiteGraph& h);

/// "L i→j" lines then "R i→j" lines.
void write_mapping(std::ostream& os, const GiResult& r);

}  // namespace svgap
