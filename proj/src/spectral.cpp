#include "svgap/spectral.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "svgap/error.hpp"

namespace svgap {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

double default_simple_tolerance(const Eigen::VectorXd& values) {
    return values.size() ? 64.0 * kEps * values(0) : 0.0;
}

double default_rank_tolerance(const Eigen::VectorXd& values, Eigen::Index n) {
    return values.size() ? 64.0 * kEps * std::sqrt(static_cast<double>(n)) * values(0) : 0.0;
}

GapReport gap_report(const Eigen::VectorXd& values, double tol) {
    const Eigen::Index p = values.size();
    if (p < 2) throw SpecError("gap_report: needs at least two singular values");
    GapReport r;
    r.tolerance = tol < 0.0 ? default_simple_tolerance(values) : tol;
    r.gaps.resize(p - 1);
    r.squared_gaps.resize(p - 1);
    r.delta_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i + 1 < p; ++i) {
        const double g = values(i) - values(i + 1);
        r.gaps(i) = g;
        // (a - b)(a + b) keeps the small squared gaps accurate
        r.squared_gaps(i) = g * (values(i) + values(i + 1));
        if (g < r.delta_min) {
            r.delta_min = g;
            r.argmin = static_cast<std::size_t>(i) + 1;
        }
    }
    r.simple = r.delta_min > r.tolerance;
    return r;
}

GapReport gap_report(const SpectralDecomposition& d, double tol) { return gap_report(d.values, tol); }

EventFlags event_flags(const Eigen::MatrixXd& raw, double K, double rank_tol) {
    if (!(K >= 1.0)) throw SpecError("event_flags: K must be >= 1");
    return event_flags_from_values(singular_values(raw), raw.rows(), K, rank_tol);
}

EventFlags event_flags_from_values(const Eigen::VectorXd& s, Eigen::Index n, double K, double rank_tol) {
    if (!(K >= 1.0)) throw SpecError("event_flags: K must be >= 1");
    if (s.size() == 0) throw SpecError("event_flags: no singular values");
    EventFlags f;
    f.K = K;
    f.norm = s(0);
    f.sigma_min = s(s.size() - 1);
    f.rank_tol = rank_tol < 0.0 ? default_rank_tolerance(s, n) : rank_tol;
    f.norm_ok = f.norm <= K * std::sqrt(static_cast<double>(n));
    f.full_rank = f.sigma_min > f.rank_tol;
    f.e_K = f.norm_ok && f.full_rank;
    return f;
}

EventFlags event_flags(const MatrixSample& sample, double K, double rank_tol) {
    return event_flags(sample.raw, K, rank_tol);
}

InterlacingCheck check_interlacing(const Eigen::VectorXd& full, const Eigen::VectorXd& minor) {
    const Eigen::Index p = full.size();
    if (p < 2 || minor.size() != p - 1) throw SpecError("check_interlacing: needs p >= 2 and a p-1 minor");
    InterlacingCheck c;
    c.slack = 1e-9 * (1.0 + full(0));
    c.max_violation = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i + 1 < p; ++i) {
        c.max_violation = std::max(c.max_violation, minor(i) - full(i));
        c.max_violation = std::max(c.max_violation, full(i + 1) - minor(i));
    }
    c.holds = c.max_violation <= c.slack;
    return c;
}

InterlacingCheck check_interlacing(const Eigen::MatrixXd& A) {
    if (A.cols() < 2) throw SpecError("check_interlacing: needs p >= 2");
    return check_interlacing(singular_values(A), singular_values(A.leftCols(A.cols() - 1)));
}

bool gap_event_indicator(const Eigen::VectorXd& values, std::size_t i, double delta, Eigen::Index n) {
    const auto p = static_cast<std::size_t>(values.size());
    if (i < 1 || i + 1 > p) throw SpecError("gap_event_indicator: index out of range");
    if (!(delta > 0.0)) throw SpecError("gap_event_indicator: delta must be positive");
    if (n < 1) throw SpecError("gap_event_indicator: n must be positive");
    const double a = values(static_cast<Eigen::Index>(i - 1));
    const double b = values(static_cast<Eigen::Index>(i));
    return (a - b) * (a + b) <= b * delta / std::sqrt(static_cast<double>(n));
}

bool gap_event_indicator(const SpectralDecomposition& d, std::size_t i, double delta, Eigen::Index n) {
    return gap_event_indicator(d.values, i, delta, n);
}

void write_spectrum_csv(std::ostream& os, const Eigen::VectorXd& values) {
    os << "i,sigma,sigma_sq,gap,sq_gap\n";
    const Eigen::Index p = values.size();
    for (Eigen::Index i = 0; i < p; ++i) {
        const double s = values(i);
        os << (i + 1) << ',' << format_double(s) << ',' << format_double(s * s) << ',';
        if (i + 1 < p) {
            const double g = s - values(i + 1);
            os << format_double(g) << ',' << format_double(g * (s + values(i + 1)));
        } else {
            os << ',';
        }
        os << '\n';
    }
}

}  // namespace svgap
