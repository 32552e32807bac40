#pragma once

// Structural functionals of unit vectors: distance to sparse vectors,
// compressibility, spread sets, least common denominator (LCD) and its
// regularized variant, plus Monte-Carlo small-ball estimators.
//
// Coordinates are 0-based throughout this header.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "svgap/ensemble.hpp"
#include "svgap/rng.hpp"

namespace svgap {

struct StructureParams {
    double c0 = 0.1;
    double c1 = 0.5;
    double kappa = 1.0;
    double gamma = 0.5;
    /// Subset fraction; <= 0 selects c'/4.
    double alpha = 0.0;

    /// c' = c0 c1^2 / 4
    double c_prime() const { return c0 * c1 * c1 / 4.0; }
    double alpha_or_default() const { return alpha > 0.0 ? alpha : c_prime() / 4.0; }

    /// Defaults for ambient dimension n: kappa = n^{0.1}.
    static StructureParams defaults_for(Eigen::Index n);

    /// Checks 0 < c0, c1, gamma < 1, kappa > 0 and 0 < alpha <= c'/4.
    void validate() const;
};

/// Distance from x to the vectors supported on at most k coordinates.
double sparse_distance(const Eigen::VectorXd& x, Eigen::Index k);

/// floor(c0 m); throws SpecError when it is 0.
Eigen::Index sparse_support_size(Eigen::Index m, const StructureParams& params);

/// sparse_distance(x, floor(c0 m)) <= c1. x must be a unit vector (1e-10).
bool is_compressible(const Eigen::VectorXd& x, const StructureParams& params);

/// ceil(c' m) coordinates with c1/sqrt(2m) <= |x_k| <= 1/sqrt(c0 m), taken in
/// ascending index order. Throws SpecError if too few coordinates qualify.
std::vector<Eigen::Index> spread_set(const Eigen::VectorXd& x, const StructureParams& params);

/// |{ j : |x_j| >= B }|
Eigen::Index large_coordinate_count(const Eigen::VectorXd& x, double B);

struct LcdResult {
    double value = 0.0;          // theta_max when at_least is set
    bool at_least = false;       // no satisfying theta found up to theta_max
    double witness_theta = 0.0;  // satisfies the defining inequality (finite case)
    double resolution = 0.0;
};

struct LcdOptions {
    double theta_max = 0.0;  // <= 0 selects 1e3 * sqrt(m)
    double resolution = 1e-4;
};

/// True when dist(theta x, Z^m) < min(gamma ||theta x||, kappa).
bool lcd_condition(const Eigen::VectorXd& x, double theta, double gamma, double kappa);

/// Least common denominator by certified grid scan: step resolution/||x||_inf
/// over (0, theta_max], then bisection of the first hit down to resolution.
LcdResult lcd(const Eigen::VectorXd& x, const StructureParams& params, const LcdOptions& opts = {});

struct RlcdOptions {
    LcdOptions lcd;
    std::size_t budget = 100000;  // exhaustive when C(|spread|, k) <= budget
    std::size_t samples = 200;    // subsets drawn otherwise
    bool force_sampled = false;
    /// Overrides ceil(alpha m) as the subset size.
    std::optional<std::size_t> subset_size;
    std::uint64_t seed = 0;
};

struct RlcdResult {
    enum class Mode { Exhaustive, Sampled };

    double value = 0.0;
    bool at_least = false;
    Mode mode = Mode::Exhaustive;
    std::size_t subsets_evaluated = 0;
    std::vector<Eigen::Index> best_subset;
    bool is_lower_bound = false;
};

/// Maximum of LCD(x_I / ||x_I||) over subsets I of spread(x) of size
/// ceil(alpha m). Sampled mode reports a lower bound.
RlcdResult regularized_lcd(const Eigen::VectorXd& x, const StructureParams& params, const RlcdOptions& opts = {});

/// Binomial choose with saturation at SIZE_MAX.
std::size_t binomial_saturating(std::size_t n, std::size_t k);

struct ConcentrationEstimate {
    double estimate = 0.0;
    double epsilon = 0.0;
    std::size_t samples = 0;
    double ci95 = 0.0;  // 1.96 sqrt(p (1 - p) / N), normal approximation
};

using ScalarSampler = std::function<double(SplitMix64&)>;

/// Empirical Levy concentration sup_a P{|X - a| <= eps}: samples are sorted and
/// every window [s_k, s_k + 2 eps] is counted; the best window wins. Requires
/// samples >= 1000 and eps > 0.
ConcentrationEstimate levy_concentration(const ScalarSampler& sampler, double epsilon, std::size_t samples,
                                         std::uint64_t seed);
ConcentrationEstimate levy_concentration(const AtomDistribution& atom, double epsilon, std::size_t samples,
                                         std::uint64_t seed);

/// Levy concentration of sum_i x_i xi_i with i.i.d. atom draws.
ConcentrationEstimate small_ball_dot(const Eigen::VectorXd& x, const AtomDistribution& atom, double epsilon,
                                     std::size_t samples, std::uint64_t seed);

/// Maximal fraction of sorted values inside a closed window of width 2 eps.
double max_window_fraction(std::vector<double> values, double epsilon);

double binomial_ci95(double p, std::size_t samples);

struct VectorStructureReport {
    Eigen::Index m = 0;
    double sparse_dist = 0.0;
    bool compressible = false;
    Eigen::Index spread_size = 0;  // 0 when compressible or spread unavailable
    std::optional<LcdResult> lcd;
    std::optional<RlcdResult> rlcd;
};

struct StructureReportOptions {
    bool compute_lcd = true;
    bool compute_rlcd = true;
    RlcdOptions rlcd;
};

VectorStructureReport structure_report(const Eigen::VectorXd& x, const StructureParams& params,
                                       const StructureReportOptions& opts = {});

/// "m,sparse_dist,compressible,spread_size,lcd,lcd_mode,rlcd,rlcd_mode"
std::string structure_csv_header();
std::string structure_csv_row(const VectorStructureReport& r);

}  // namespace svgap
