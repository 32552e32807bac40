#pragma once

// Random matrix model  A = scale * Sigma^{1/2} (M + eta w z^T)  with i.i.d. atom
// entries in M. Sampling is counter-based: entry (i, j) draws from a stream
// keyed by (seed, i*p + j), so a spec maps to exactly one matrix.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "svgap/rng.hpp"

namespace svgap {

struct AbsoluteMoments {
    double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
};

class AtomDistribution {
public:
    enum class Kind { Rademacher, StandardGaussian, UniformSym, ShiftedBernoulli, Custom };

    static AtomDistribution rademacher() { return AtomDistribution(Kind::Rademacher); }
    static AtomDistribution gaussian() { return AtomDistribution(Kind::StandardGaussian); }
    /// Uniform on [-sqrt(3), sqrt(3)].
    static AtomDistribution uniform_sym() { return AtomDistribution(Kind::UniformSym); }
    /// Bernoulli(1/2) on {0, 1}; not centered.
    static AtomDistribution shifted_bernoulli() { return AtomDistribution(Kind::ShiftedBernoulli); }
    /// Finite support law; probabilities must be nonnegative and sum to 1 within 1e-12.
    static AtomDistribution custom(std::vector<std::pair<double, double>> support);
    /// Point mass at `value` (Custom with a single atom).
    static AtomDistribution constant(double value) { return custom({{value, 1.0}}); }

    Kind kind() const noexcept { return kind_; }
    const std::vector<std::pair<double, double>>& support() const noexcept { return support_; }

    double mean() const;
    double variance() const;
    /// True for every kind except ShiftedBernoulli (Custom: when the mean is 0).
    bool centered() const;
    /// True when the law is a point mass.
    bool degenerate() const;

    double sample(SplitMix64& rng) const;

    std::string name() const;

    friend bool operator==(const AtomDistribution&, const AtomDistribution&) = default;

private:
    explicit AtomDistribution(Kind k) : kind_(k) {}

    Kind kind_;
    std::vector<std::pair<double, double>> support_;
    std::vector<double> cumulative_;
};

/// Closed-form absolute moments E|xi|^k, k = 1..4.
AbsoluteMoments atom_moments(const AtomDistribution& atom);

class CovarianceSpec {
public:
    enum class Kind { Identity, Diagonal, FullSPD };

    /// Identity is dimension-free; L defaults to 1.
    static CovarianceSpec identity(double L = 1.0);
    static CovarianceSpec diagonal(Eigen::VectorXd entries, double L);
    static CovarianceSpec full(Eigen::MatrixXd sigma, double L);

    Kind kind() const noexcept { return kind_; }
    double bound() const noexcept { return L_; }
    const Eigen::VectorXd& diagonal_entries() const noexcept { return diag_; }
    const Eigen::MatrixXd& full_matrix() const noexcept { return full_; }

    /// Dimension for Diagonal/FullSPD, nullopt for Identity.
    std::optional<Eigen::Index> dimension() const;

    /// Dense Sigma of size n.
    Eigen::MatrixXd matrix(Eigen::Index n) const;

    /// Eigenvalues in ascending order (n needed for Identity).
    Eigen::VectorXd eigenvalues(Eigen::Index n) const;

    /// Re-checks the L bound; throws SpecError naming the offending eigenvalue.
    void validate(Eigen::Index n) const;

    friend bool operator==(const CovarianceSpec&, const CovarianceSpec&);

private:
    CovarianceSpec() = default;

    Kind kind_ = Kind::Identity;
    double L_ = 1.0;
    Eigen::VectorXd diag_;
    Eigen::MatrixXd full_;
};

/// Symmetric square root S with S*S = Sigma. Diagonal kinds take entrywise roots;
/// FullSPD goes through a symmetric eigendecomposition.
Eigen::MatrixXd covariance_sqrt(const CovarianceSpec& cov, Eigen::Index n);

struct RankOnePerturbation {
    double eta = 0.0;
    Eigen::VectorXd w;  // unit, length n
    Eigen::VectorXd z;  // unit, length p

    void validate(Eigen::Index n, Eigen::Index p) const;
};

/// Deterministic raw matrices used as sanity inputs.
enum class MatrixPreset {
    Random,         // i.i.d. atom entries
    Identity,       // ones on the main diagonal
    DiagonalLadder  // diag(p, p-1, ..., 1) / sqrt(n)
};

struct EnsembleSpec {
    Eigen::Index n = 1;
    Eigen::Index p = 1;
    AtomDistribution atom = AtomDistribution::rademacher();
    CovarianceSpec covariance = CovarianceSpec::identity();
    std::optional<RankOnePerturbation> perturbation;
    std::uint64_t seed = 0;
    MatrixPreset preset = MatrixPreset::Random;
    /// Global factor applied after Sigma^{1/2}; 1 for the plain model.
    double scale = 1.0;

    double aspect_ratio() const { return static_cast<double>(p) / static_cast<double>(n); }

    void validate() const;

    /// Bernoulli(1/2) biadjacency written as 1/2 (R + sqrt(np) w z^T) with R
    /// Rademacher and w, z normalized all-ones vectors.
    static EnsembleSpec bernoulli_adjacency(Eigen::Index n, Eigen::Index p, std::uint64_t seed);
};

struct MatrixSample {
    Eigen::MatrixXd raw;        // M
    Eigen::MatrixXd effective;  // scale * Sigma^{1/2} (M + eta w z^T)
    EnsembleSpec spec;

    /// scale * (M + eta w z^T), the matrix that Sigma^{1/2} multiplies.
    Eigen::MatrixXd model_matrix() const;
};

MatrixSample sample_matrix(const EnsembleSpec& spec);

/// Raw atom matrix only (no covariance, no perturbation).
Eigen::MatrixXd sample_raw(const EnsembleSpec& spec);

// Serialization ------------------------------------------------------------

nlohmann::json to_json(const AtomDistribution& atom);
AtomDistribution atom_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CovarianceSpec& cov);
CovarianceSpec covariance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnsembleSpec& spec);
EnsembleSpec ensemble_from_json(const nlohmann::json& j);

/// Plain text: "n p" line followed by n rows of p values, 17 significant digits.
void write_matrix(std::ostream& os, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(std::istream& is);

std::string format_double(double v);

}  // namespace svgap
