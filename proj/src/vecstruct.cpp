#include "svgap/vecstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "svgap/error.hpp"

namespace svgap {

namespace {

bool in_open_unit(double v) { return v > 0.0 && v < 1.0; }

void require_unit(const Eigen::VectorXd& x, const char* who) {
    if (x.size() == 0) throw SpecError(std::string(who) + ": empty vector");
    if (!x.allFinite()) throw SpecError(std::string(who) + ": non-finite entries");
    if (std::abs(x.norm() - 1.0) > 1e-10) throw SpecError(std::string(who) + ": vector is not unit norm");
}

double dist_to_lattice(const Eigen::VectorXd& x, double theta) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double t = theta * x(k);
        const double d = t - std::nearbyint(t);
        s += d * d;
    }
    return std::sqrt(s);
}

Eigen::VectorXd normalized_restriction(const Eigen::VectorXd& x, const std::vector<Eigen::Index>& idx) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) r(static_cast<Eigen::Index>(k)) = x(idx[k]);
    const double nrm = r.norm();
    if (!(nrm > 0.0)) throw SpecError("regularized_lcd: zero restriction");
    return r / nrm;
}

// Lexicographic successor of a k-combination of {0..n-1}.
bool next_combination(std::vector<std::size_t>& c, std::size_t n) {
    const std::size_t k = c.size();
    for (std::size_t i = k; i-- > 0;) {
        if (c[i] < n - k + i) {
            ++c[i];
            for (std::size_t j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace

StructureParams StructureParams::defaults_for(Eigen::Index n) {
    StructureParams p;
    p.kappa = std::pow(static_cast<double>(std::max<Eigen::Index>(n, 1)), 0.1);
    return p;
}

void StructureParams::validate() const {
    if (!in_open_unit(c0)) throw SpecError("c0 must lie in (0,1)");
    if (!in_open_unit(c1)) throw SpecError("c1 must lie in (0,1)");
    if (!in_open_unit(gamma)) throw SpecError("gamma must lie in (0,1)");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw SpecError("kappa must be positive");
    const double a = alpha_or_default();
    if (!(a > 0.0)) throw SpecError("alpha must be positive");
    // tiny relative slack so that alpha = c'/4 typed in decimal still passes
    if (a > c_prime() / 4.0 * (1.0 + 1e-12)) throw SpecError("alpha must not exceed c'/4 = c0*c1^2/16");
}

double sparse_distance(const Eigen::VectorXd& x, Eigen::Index k) {
    const Eigen::Index m = x.size();
    if (k < 1 || k > m) throw SpecError("sparse_distance: k out of range [1, m]");
    std::vector<double> sq(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) sq[static_cast<std::size_t>(i)] = x(i) * x(i);
    // the m - k smallest squares form the tail
    const auto tail = static_cast<std::ptrdiff_t>(m - k);
    std::nth_element(sq.begin(), sq.begin() + tail, sq.end());
    double s = 0.0;
    for (std::ptrdiff_t i = 0; i < tail; ++i) s += sq[static_cast<std::size_t>(i)];
    return std::sqrt(s);
}

Eigen::Index sparse_support_size(Eigen::Index m, const StructureParams& params) {
    const auto k = static_cast<Eigen::Index>(std::floor(params.c0 * static_cast<double>(m)));
    if (k < 1) throw SpecError("floor(c0 m) = 0: no sparse vectors to compare against");
    return k;
}

bool is_compressible(const Eigen::VectorXd& x, const StructureParams& params) {
    require_unit(x, "is_compressible");
    return sparse_distance(x, sparse_support_size(x.size(), params)) <= params.c1;
}

std::vector<Eigen::Index> spread_set(const Eigen::VectorXd& x, const StructureParams& params) {
    require_unit(x, "spread_set");
    const Eigen::Index m = x.size();
    const double md = static_cast<double>(m);
    const double lo = params.c1 / std::sqrt(2.0 * md);
    const double hi = 1.0 / std::sqrt(params.c0 * md);
    const auto want = static_cast<std::size_t>(std::ceil(params.c_prime() * md));
    std::vector<Eigen::Index> out;
    for (Eigen::Index k = 0; k < m && out.size() < want; ++k) {
        const double a = std::abs(x(k));
        if (a >= lo && a <= hi) out.push_back(k);
    }
    if (out.size() < want)
        throw SpecError("spread_set: only " + std::to_string(out.size()) + " coordinates in band, need " +
                        std::to_string(want));
    return out;
}

Eigen::Index large_coordinate_count(const Eigen::VectorXd& x, double B) {
    if (!(B > 0.0)) throw SpecError("large_coordinate_count: B must be positive");
    return (x.array().abs() >= B).count();
}

bool lcd_condition(const Eigen::VectorXd& x, double theta, double gamma, double kappa) {
    return dist_to_lattice(x, theta) < std::min(gamma * theta * x.norm(), kappa);
}

LcdResult lcd(const Eigen::VectorXd& x, const StructureParams& params, const LcdOptions& opts) {
    if (x.size() == 0 || !x.allFinite()) throw SpecError("lcd: needs a finite nonempty vector");
    const double nrm = x.norm();
    const double inf_norm = x.cwiseAbs().maxCoeff();
    if (!(nrm > 0.0)) throw SpecError("lcd: zero vector");
    if (!(opts.resolution > 0.0)) throw SpecError("lcd: resolution must be positive");
    const double theta_max =
        opts.theta_max > 0.0 ? opts.theta_max : 1e3 * std::sqrt(static_cast<double>(x.size()));
    const double gamma = params.gamma;
    const double kappa = params.kappa;

    LcdResult r;
    r.resolution = opts.resolution;
    const double step = opts.resolution / inf_norm;
    // When the condition fails by a margin g at theta, it keeps failing on
    // [theta, theta + g / ((1 + gamma) ||x||)): dist moves at most ||x|| per unit
    // theta and the threshold at most gamma ||x||. Such intervals are skipped.
    const double lip = (1.0 + gamma) * nrm;

    double certified = 0.0;  // no satisfying theta in (0, certified)
    double theta = std::min(step, theta_max);
    while (true) {
        const double d = dist_to_lattice(x, theta);
        const double thr = std::min(gamma * theta * nrm, kappa);
        if (d < thr) break;
        certified = theta + (d - thr) / lip;
        if (theta >= theta_max) {
            r.value = theta_max;
            r.at_least = true;
            return r;
        }
        theta = std::min(std::max(theta + step, certified), theta_max);
    }

    double lo = std::min(certified, theta);
    double hi = theta;
    while (hi - lo > opts.resolution) {
        const double mid = 0.5 * (lo + hi);
        if (lcd_condition(x, mid, gamma, kappa))
            hi = mid;
        else
            lo = mid;
    }
    r.value = hi;
    r.witness_theta = hi;
    return r;
}

std::size_t binomial_saturating(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    constexpr std::size_t cap = std::numeric_limits<std::size_t>::max();
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        // r * (n - k + i) / i is exact at every step; guard the product
        const std::size_t f = n - k + i;
        if (r > cap / f) return cap;
        r = r * f / i;
    }
    return r;
}

RlcdResult regularized_lcd(const Eigen::VectorXd& x, const StructureParams& params, const RlcdOptions& opts) {
    if (opts.budget < 1) throw SpecError("regularized_lcd: budget must be at least 1");
    const auto spread = spread_set(x, params);
    const std::size_t k = opts.subset_size.value_or(static_cast<std::size_t>(
        std::ceil(params.alpha_or_default() * static_cast<double>(x.size()))));
    if (k < 1 || k > spread.size())
        throw SpecError("regularized_lcd: subset size " + std::to_string(k) + " exceeds spread size " +
                        std::to_string(spread.size()));

    RlcdResult best;
    bool have = false;
    auto consider = [&](const std::vector<Eigen::Index>& subset) {
        const LcdResult l = lcd(normalized_restriction(x, subset), params, opts.lcd);
        ++best.subsets_evaluated;
        const bool better = !have || (l.at_least && !best.at_least) ||
                            (l.at_least == best.at_least && l.value > best.value);
        if (better) {
            best.value = l.value;
            best.at_least = l.at_least;
            best.best_subset = subset;
            have = true;
        }
    };

    const std::size_t total = binomial_saturating(spread.size(), k);
    std::vector<Eigen::Index> subset(k);
    if (total <= opts.budget && !opts.force_sampled) {
        best.mode = RlcdResult::Mode::Exhaustive;
        std::vector<std::size_t> c(k);
        std::iota(c.begin(), c.end(), std::size_t{0});
        do {
            for (std::size_t i = 0; i < k; ++i) subset[i] = spread[c[i]];
            consider(subset);
        } while (next_combination(c, spread.size()));
    } else {
        best.mode = RlcdResult::Mode::Sampled;
        best.is_lower_bound = true;
        SplitMix64 rng(opts.seed);
        std::vector<Eigen::Index> pool = spread;
        const std::size_t draws = std::max<std::size_t>(opts.samples, 1);
        for (std::size_t s = 0; s < draws; ++s) {
            // partial Fisher-Yates: the first k entries are a uniform k-subset
            for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
            subset.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
            std::sort(subset.begin(), subset.end());
            consider(subset);
        }
    }
    return best;
}

double binomial_ci95(double p, std::size_t samples) {
    if (samples == 0) return 1.0;
    return 1.96 * std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(samples));
}

double max_window_fraction(std::vector<double> values, double epsilon) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double width = 2.0 * epsilon;
    std::size_t best = 0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (j < i) j = i;
        while (j < values.size() && values[j] - values[i] <= width) ++j;
        best = std::max(best, j - i);
    }
    return static_cast<double>(best) / static_cast<double>(values.size());
}

ConcentrationEstimate levy_concentration(const ScalarSampler& sampler, double epsilon, std::size_t samples,
                                         std::uint64_t seed) {
    if (!(epsilon > 0.0)) throw SpecError("levy_concentration: epsilon must be positive");
    if (samples < 1000) throw SpecError("levy_concentration: needs at least 1000 samples");
    SplitMix64 rng(seed);
    std::vector<double> v(samples);
    for (auto& s : v) s = sampler(rng);
    ConcentrationEstimate e;
    e.epsilon = epsilon;
    e.samples = samples;
    e.estimate = max_window_fraction(std::move(v), epsilon);
    e.ci95 = binomial_ci95(e.estimate, samples);
    return e;
}

ConcentrationEstimate levy_concentration(const AtomDistribution& atom, double epsilon, std::size_t samples,
                                         std::uint64_t seed) {
    return levy_concentration([&atom](SplitMix64& rng) { return atom.sample(rng); }, epsilon, samples, seed);
}

ConcentrationEstimate small_ball_dot(const Eigen::VectorXd& x, const AtomDistribution& atom, double epsilon,
                                     std::size_t samples, std::uint64_t seed) {
    if (x.size() == 0) throw SpecError("small_ball_dot: empty vector");
    return levy_concentration(
        [&](SplitMix64& rng) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) s += x(i) * atom.sample(rng);
            return s;
        },
        epsilon, samples, seed);
}

VectorStructureReport structure_report(const Eigen::VectorXd& x, const StructureParams& params,
                                       const StructureReportOptions& opts) {
    require_unit(x, "structure_report");
    VectorStructureReport r;
    r.m = x.size();
    r.sparse_dist = sparse_distance(x, sparse_support_size(r.m, params));
    r.compressible = r.sparse_dist <= params.c1;
    if (opts.compute_lcd) r.lcd = lcd(x, params, opts.rlcd.lcd);
    if (!r.compressible) {
        try {
            r.spread_size = static_cast<Eigen::Index>(spread_set(x, params).size());
            if (opts.compute_rlcd) r.rlcd = regularized_lcd(x, params, opts.rlcd);
        } catch (const SpecError&) {
            r.spread_size = 0;
        }
    }
    return r;
}

std::string structure_csv_header() { return "m,sparse_dist,compressible,spread_size,lcd,lcd_mode,rlcd,rlcd_mode"; }

std::string structure_csv_row(const VectorStructureReport& r) {
    std::ostringstream os;
    os << r.m << ',' << format_double(r.sparse_dist) << ',' << (r.compressible ? 1 : 0) << ',' << r.spread_size
       << ',';
    if (r.lcd) os << format_double(r.lcd->value) << ',' << (r.lcd->at_least ? "at_least" : "finite");
    else os << ',';
    os << ',';
    if (r.rlcd) {
        os << format_double(r.rlcd->value) << ','
           << (r.rlcd->mode == RlcdResult::Mode::Exhaustive ? "exhaustive" : "sampled");
    } else {
        os << ',';
    }
    return os.str();
}

}  // namespace svgap
