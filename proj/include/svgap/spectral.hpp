#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>

#include <Eigen/Dense>

#include "svgap/ensemble.hpp"

namespace svgap {

/// Singular values in descending order with, optionally, singular vectors.
///
/// Naming follows the model's convention: a *right* singular vector u lives in
/// R^p (eigenvector of A^T A), a *left* singular vector v lives in R^n, and
/// A u_i = sigma_i v_i.
struct SpectralDecomposition {
    Eigen::VectorXd values;         // sigma_1 >= ... >= sigma_p >= 0
    Eigen::MatrixXd left_vectors;   // n x p, column-orthonormal (empty if not requested)
    Eigen::MatrixXd right_vectors;  // p x p, orthonormal (empty if not requested)
    double residual = 0.0;          // max_i ||A u_i - sigma_i v_i||, 0 if no vectors
    std::size_t iterations = 0;     // bidiagonal QR sweeps

    bool has_vectors() const noexcept { return right_vectors.size() != 0; }
    Eigen::Index size() const noexcept { return values.size(); }
};

/// Golub-Kahan SVD of an n x p matrix with n >= p >= 1: Householder
/// bidiagonalization followed by implicitly shifted bidiagonal QR with a
/// zero-shift sweep when the shift would spoil relative accuracy (Demmel-Kahan).
/// The bidiagonal stage converges to high relative accuracy; the Householder
/// stage is backward stable (absolute error ~ eps * ||A||).
///
/// Throws NumericError for non-finite input or non-convergence and SpecError
/// when p > n.
SpectralDecomposition svd(const Eigen::MatrixXd& A, bool want_vectors = true);

/// Singular values only.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& A);

/// Default simplicity tolerance, 64 * eps * sigma_1.
double default_simple_tolerance(const Eigen::VectorXd& values);

/// Default numerical-rank tolerance, 64 * eps * sqrt(n) * sigma_1.
double default_rank_tolerance(const Eigen::VectorXd& values, Eigen::Index n);

struct GapReport {
    Eigen::VectorXd gaps;          // delta_i = sigma_i - sigma_{i+1}, i = 1..p-1
    Eigen::VectorXd squared_gaps;  // sigma_i^2 - sigma_{i+1}^2
    double delta_min = 0.0;
    std::size_t argmin = 1;  // 1-based index i of the smallest gap
    bool simple = false;     // delta_min > tolerance
    double tolerance = 0.0;
};

/// Throws SpecError for p < 2. A negative tolerance selects the default.
GapReport gap_report(const Eigen::VectorXd& values, double tol = -1.0);
GapReport gap_report(const SpectralDecomposition& d, double tol = -1.0);

struct EventFlags {
    bool norm_ok = false;    // ||M|| <= K sqrt(n)
    bool full_rank = false;  // sigma_p(M) > rank_tol
    bool e_K = false;
    double K = 3.0;
    double norm = 0.0;       // sigma_1(M)
    double sigma_min = 0.0;  // sigma_p(M)
    double rank_tol = 0.0;
};

/// Event E_K evaluated on the raw matrix M. A negative rank_tol selects the
/// default. Requires K >= 1.
EventFlags event_flags(const MatrixSample& sample, double K = 3.0, double rank_tol = -1.0);
EventFlags event_flags(const Eigen::MatrixXd& raw, double K = 3.0, double rank_tol = -1.0);
/// Same, from already computed singular values of an n-row M.
EventFlags event_flags_from_values(const Eigen::VectorXd& raw_values, Eigen::Index n, double K = 3.0,
                                   double rank_tol = -1.0);

struct InterlacingCheck {
    bool holds = true;
    /// Largest of sigma_i(A') - sigma_i(A) and sigma_{i+1}(A) - sigma_i(A');
    /// non-positive when interlacing holds exactly.
    double max_violation = 0.0;
    double slack = 0.0;
};

/// Cauchy interlacing between A and A with its last column removed, with slack
/// 1e-9 * (1 + ||A||). Requires p >= 2.
InterlacingCheck check_interlacing(const Eigen::MatrixXd& A);
InterlacingCheck check_interlacing(const Eigen::VectorXd& values_full, const Eigen::VectorXd& values_minor);

/// sigma_i^2 - sigma_{i+1}^2 <= sigma_{i+1} * delta / sqrt(n), 1-based i.
bool gap_event_indicator(const Eigen::VectorXd& values, std::size_t i, double delta, Eigen::Index n);
bool gap_event_indicator(const SpectralDecomposition& d, std::size_t i, double delta, Eigen::Index n);

/// CSV with header "i,sigma,sigma_sq,gap,sq_gap"; the last row leaves the gap
/// columns empty.
void write_spectrum_csv(std::ostream& os, const Eigen::VectorXd& values);

}  // namespace svgap
