#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "svgap/error.hpp"
#include "svgap/spectral.hpp"

namespace svgap {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Rotation {
    double c;
    double s;
    double r;
};

// [c s; -s c] [f; g] = [r; 0]
Rotation givens(double f, double g) {
    if (g == 0.0) return {1.0, 0.0, f};
    if (f == 0.0) return {0.0, 1.0, g};
    const double r = std::hypot(f, g);
    return {f / r, g / r, r};
}

// (x_a, x_b) <- (c x_a + s x_b, -s x_a + c x_b) on two columns.
void rotate_columns(Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b, double c, double s) {
    double* pa = m.col(a).data();
    double* pb = m.col(b).data();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double xa = pa[i];
        const double xb = pb[i];
        pa[i] = c * xa + s * xb;
        pb[i] = c * xb - s * xa;
    }
}

// Smaller singular value of [[f, g], [0, h]] without overflow (LAPACK dlas2).
double smaller_singular_value_2x2(double f, double g, double h) {
    const double fa = std::abs(f), ga = std::abs(g), ha = std::abs(h);
    const double fhmn = std::min(fa, ha);
    const double fhmx = std::max(fa, ha);
    if (fhmn == 0.0) return 0.0;
    if (ga < fhmx) {
        const double as = 1.0 + fhmn / fhmx;
        const double at = (fhmx - fhmn) / fhmx;
        const double au = (ga / fhmx) * (ga / fhmx);
        const double c = 2.0 / (std::sqrt(as * as + au) + std::sqrt(at * at + au));
        return fhmn * c;
    }
    const double au = fhmx / ga;
    if (au == 0.0) return (fhmn * fhmx) / ga;
    const double as = 1.0 + fhmn / fhmx;
    const double at = (fhmx - fhmn) / fhmx;
    const double c = 1.0 / (std::sqrt(1.0 + (as * au) * (as * au)) + std::sqrt(1.0 + (at * au) * (at * au)));
    return 2.0 * (fhmn * c) * au;
}

class BidiagonalQr {
public:
    BidiagonalQr(Eigen::VectorXd& d, Eigen::VectorXd& e, Eigen::MatrixXd* u, Eigen::MatrixXd* v)
        : d_(d), e_(e), u_(u), v_(v) {}

    std::size_t run() {
        const Eigen::Index p = d_.size();
        if (p <= 1) return 0;

        double smax = d_.cwiseAbs().maxCoeff();
        if (e_.size()) smax = std::max(smax, e_.cwiseAbs().maxCoeff());
        if (smax == 0.0) return 0;
        floor_ = smax * kEps * 0x1.0p-10;

        const std::size_t max_steps = 6 * static_cast<std::size_t>(p) * static_cast<std::size_t>(p) + 100;
        std::size_t steps = 0;
        Eigen::Index hi = p - 1;
        while (hi > 0) {
            if (steps++ > max_steps) throw NumericError("svd: bidiagonal QR did not converge");

            for (Eigen::Index i = 0; i < hi; ++i) {
                const double ei = std::abs(e_(i));
                if (ei <= tol_ * (std::abs(d_(i)) + std::abs(d_(i + 1))) || ei <= floor_) e_(i) = 0.0;
            }
            if (e_(hi - 1) == 0.0) {
                --hi;
                continue;
            }
            Eigen::Index lo = hi - 1;
            while (lo > 0 && e_(lo - 1) != 0.0) --lo;

            if (deflate_zero_diagonal(lo, hi)) continue;

            const double shift = smaller_singular_value_2x2(d_(hi - 1), e_(hi - 1), d_(hi));
            const double sll = std::abs(d_(lo));
            if (shift == 0.0 || (shift / sll) * (shift / sll) < kEps)
                zero_shift_sweep(lo, hi);
            else
                shifted_sweep(lo, hi, shift);
        }
        return steps;
    }

private:
    // A (near-)zero d_k splits the block: rotate its off-diagonal entry away.
    bool deflate_zero_diagonal(Eigen::Index lo, Eigen::Index hi) {
        for (Eigen::Index k = lo; k <= hi; ++k) {
            if (std::abs(d_(k)) > floor_) continue;
            d_(k) = 0.0;
            if (k < hi) {
                // chase e_k to the right with rotations from the left
                double f = e_(k);
                e_(k) = 0.0;
                for (Eigen::Index j = k + 1; j <= hi; ++j) {
                    const Rotation g = givens(d_(j), f);
                    d_(j) = g.r;
                    if (u_) rotate_columns(*u_, j, k, g.c, g.s);
                    if (j < hi) {
                        f = -g.s * e_(j);
                        e_(j) = g.c * e_(j);
                    }
                }
            } else {
                // chase e_{hi-1} upward with rotations from the right
                double f = e_(hi - 1);
                e_(hi - 1) = 0.0;
                for (Eigen::Index j = hi - 1; j >= lo; --j) {
                    const Rotation g = givens(d_(j), f);
                    d_(j) = g.r;
                    if (v_) rotate_columns(*v_, j, hi, g.c, g.s);
                    if (j > lo) {
                        f = -g.s * e_(j - 1);
                        e_(j - 1) = g.c * e_(j - 1);
                    }
                }
            }
            return true;
        }
        return false;
    }

    void shifted_sweep(Eigen::Index lo, Eigen::Index hi, double shift) {
        const double dl = d_(lo);
        double f = (std::abs(dl) - shift) * (std::copysign(1.0, dl) + shift / dl);
        double g = e_(lo);
        for (Eigen::Index i = lo; i < hi; ++i) {
            const Rotation r = givens(f, g);
            if (i > lo) e_(i - 1) = r.r;
            f = r.c * d_(i) + r.s * e_(i);
            e_(i) = r.c * e_(i) - r.s * d_(i);
            g = r.s * d_(i + 1);
            d_(i + 1) = r.c * d_(i + 1);
            const Rotation l = givens(f, g);
            d_(i) = l.r;
            f = l.c * e_(i) + l.s * d_(i + 1);
            d_(i + 1) = l.c * d_(i + 1) - l.s * e_(i);
            if (i + 1 < hi) {
                g = l.s * e_(i + 1);
                e_(i + 1) = l.c * e_(i + 1);
            }
            if (v_) rotate_columns(*v_, i, i + 1, r.c, r.s);
            if (u_) rotate_columns(*u_, i, i + 1, l.c, l.s);
        }
        e_(hi - 1) = f;
    }

    void zero_shift_sweep(Eigen::Index lo, Eigen::Index hi) {
        double cs = 1.0, oldcs = 1.0, oldsn = 0.0;
        for (Eigen::Index i = lo; i < hi; ++i) {
            const Rotation r = givens(d_(i) * cs, e_(i));
            cs = r.c;
            const double sn = r.s;
            if (i > lo) e_(i - 1) = oldsn * r.r;
            const Rotation l = givens(oldcs * r.r, d_(i + 1) * sn);
            oldcs = l.c;
            oldsn = l.s;
            d_(i) = l.r;
            if (v_) rotate_columns(*v_, i, i + 1, cs, sn);
            if (u_) rotate_columns(*u_, i, i + 1, oldcs, oldsn);
        }
        const double h = d_(hi) * cs;
        d_(hi) = h * oldcs;
        e_(hi - 1) = h * oldsn;
    }

    Eigen::VectorXd& d_;
    Eigen::VectorXd& e_;
    Eigen::MatrixXd* u_;
    Eigen::MatrixXd* v_;
    double tol_ = 4.0 * kEps;
    double floor_ = 0.0;
};

}  // namespace

SpectralDecomposition svd(const Eigen::MatrixXd& A, bool want_vectors) {
    const Eigen::Index n = A.rows();
    const Eigen::Index p = A.cols();
    if (p < 1 || n < p) throw SpecError("svd: requires n >= p >= 1");
    if (!A.allFinite()) throw NumericError("svd: matrix has non-finite entries");

    // Entries near the overflow or underflow thresholds are brought to unit
    // scale by an exact power of two; ordinary inputs are left untouched.
    const double amax = A.cwiseAbs().maxCoeff();
    double scale = 1.0;
    if (amax > 0.0 && (amax > 1e150 || amax < 1e-150)) scale = std::ldexp(1.0, std::ilogb(amax));
    Eigen::MatrixXd B = scale == 1.0 ? A : Eigen::MatrixXd(A / scale);
    Eigen::VectorXd d(p);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(std::max<Eigen::Index>(p - 1, 0));
    std::vector<double> tau_left(static_cast<std::size_t>(p), 0.0);
    std::vector<double> tau_right(static_cast<std::size_t>(p), 0.0);
    Eigen::VectorXd work(std::max(n, p));

    // Householder bidiagonalization: B = Q_L * bidiag(d, e) * Q_R^T.
    for (Eigen::Index k = 0; k < p; ++k) {
        double tau = 0.0, beta = 0.0;
        B.col(k).tail(n - k).makeHouseholderInPlace(tau, beta);
        tau_left[static_cast<std::size_t>(k)] = tau;
        d(k) = beta;
        if (k + 1 < p) {
            B.block(k, k + 1, n - k, p - k - 1)
                .applyHouseholderOnTheLeft(B.col(k).segment(k + 1, n - k - 1), tau, work.data());
            B.row(k).tail(p - k - 1).makeHouseholderInPlace(tau, beta);
            tau_right[static_cast<std::size_t>(k)] = tau;
            e(k) = beta;
            if (k + 1 < n) {
                B.block(k + 1, k + 1, n - k - 1, p - k - 1)
                    .applyHouseholderOnTheRight(B.row(k).segment(k + 2, p - k - 2).transpose(), tau,
                                                work.data());
            }
        }
    }

    SpectralDecomposition out;
    Eigen::MatrixXd U, V;
    if (want_vectors) {
        U = Eigen::MatrixXd::Identity(n, p);
        for (Eigen::Index k = p - 1; k >= 0; --k) {
            U.block(k, k, n - k, p - k)
                .applyHouseholderOnTheLeft(B.col(k).segment(k + 1, n - k - 1),
                                           tau_left[static_cast<std::size_t>(k)], work.data());
        }
        V = Eigen::MatrixXd::Identity(p, p);
        for (Eigen::Index k = p - 2; k >= 0; --k) {
            V.block(k + 1, k + 1, p - k - 1, p - k - 1)
                .applyHouseholderOnTheLeft(B.row(k).segment(k + 2, p - k - 2).transpose(),
                                           tau_right[static_cast<std::size_t>(k)], work.data());
        }
    }

    BidiagonalQr qr(d, e, want_vectors ? &U : nullptr, want_vectors ? &V : nullptr);
    out.iterations = qr.run();

    // Nonnegative values, descending order.
    for (Eigen::Index k = 0; k < p; ++k) {
        if (d(k) < 0.0) {
            d(k) = -d(k);
            if (want_vectors) V.col(k) = -V.col(k);
        }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return d(a) > d(b); });

    out.values.resize(p);
    for (Eigen::Index k = 0; k < p; ++k) out.values(k) = scale * d(order[static_cast<std::size_t>(k)]);
    if (!out.values.allFinite()) throw NumericError("svd: singular values overflow double precision");
    if (want_vectors) {
        out.left_vectors.resize(n, p);
        out.right_vectors.resize(p, p);
        for (Eigen::Index k = 0; k < p; ++k) {
            out.left_vectors.col(k) = U.col(order[static_cast<std::size_t>(k)]);
            out.right_vectors.col(k) = V.col(order[static_cast<std::size_t>(k)]);
        }
        const Eigen::MatrixXd r = A * out.right_vectors - out.left_vectors * out.values.asDiagonal();
        out.residual = r.colwise().norm().maxCoeff();
    }
    return out;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& A) { return svd(A, false).values; }

}  // namespace svgap
