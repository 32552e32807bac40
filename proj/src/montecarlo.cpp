#include "svgap/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "svgap/error.hpp"

namespace svgap {

std::string library_version() { return SVGAP_VERSION; }

// Config ----------------------------------------------------------------------

std::size_t ExperimentConfig::fixed_gap_index() const {
    if (gap_index != 0) return gap_index;
    return std::max<std::size_t>(1, static_cast<std::size_t>(ensemble.p) / 2);
}

void ExperimentConfig::validate() const {
    ensemble.validate();
    const auto p = static_cast<std::size_t>(ensemble.p);
    if (p < 2) throw SpecError("experiment: p must be at least 2");
    if (trials < 1) throw SpecError("experiment: trials must be at least 1");
    if (!(K >= 1.0)) throw SpecError("experiment: K must be >= 1");
    structure.validate();
    for (std::size_t k = 0; k < delta_grid.size(); ++k) {
        if (!(delta_grid[k] > 0.0) || !std::isfinite(delta_grid[k]))
            throw SpecError("experiment: delta grid values must be positive");
        if (k > 0 && !(delta_grid[k] > delta_grid[k - 1]))
            throw SpecError("experiment: delta grid must be strictly ascending");
    }
    for (auto n : n_list)
        if (n < 2) throw SpecError("experiment: n_list entries must be at least 2");
    if (fixed_gap_index() > p - 1) throw SpecError("experiment: gap index must lie in [1, p-1]");
    for (auto i : survey_indices)
        if (i < 1 || i > p) throw SpecError("experiment: survey index out of range");
    for (auto i : diagnostic_indices)
        if (i < 1 || i > p - 1) throw SpecError("experiment: diagnostic index must lie in [1, p-1]");
    if (!(deltamin_slack >= 0.0)) throw SpecError("experiment: deltamin slack must be nonnegative");
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["ensemble"] = to_json(c.ensemble);
    j["trials"] = c.trials;
    j["K"] = c.K;
    j["structure"] = {{"c0", c.structure.c0},
                      {"c1", c.structure.c1},
                      {"kappa", c.structure.kappa},
                      {"gamma", c.structure.gamma},
                      {"alpha", c.structure.alpha}};
    j["delta_grid"] = c.delta_grid;
    j["n_list"] = c.n_list;
    j["simple_tol"] = c.simple_tol;
    j["rank_tol"] = c.rank_tol;
    j["gap_index"] = c.gap_index;
    j["deltamin_slack"] = c.deltamin_slack;
    j["keep_vectors"] = c.keep_vectors;
    j["survey"] = c.survey;
    j["survey_indices"] = c.survey_indices;
    j["survey_rlcd"] = c.survey_rlcd;
    j["diagnostic"] = c.diagnostic;
    j["diagnostic_indices"] = c.diagnostic_indices;
    return j;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SpecError("experiment config must be a JSON object");
    static const std::vector<std::string> known{
        "ensemble", "trials",       "K",      "structure",      "delta_grid",  "n_list",
        "simple_tol", "rank_tol",   "gap_index", "deltamin_slack", "keep_vectors", "survey",
        "survey_indices", "survey_rlcd", "diagnostic", "diagnostic_indices", "workers"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw SpecError("experiment config: unknown key '" + key + "'");
    ExperimentConfig c;
    c.ensemble = ensemble_from_json(j.at("ensemble"));
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt("trials", c.trials);
    opt("K", c.K);
    if (j.contains("structure")) {
        const auto& s = j.at("structure");
        static const std::vector<std::string> sk{"c0", "c1", "kappa", "gamma", "alpha"};
        for (const auto& [key, _] : s.items())
            if (std::find(sk.begin(), sk.end(), key) == sk.end())
                throw SpecError("structure config: unknown key '" + key + "'");
        if (s.contains("c0")) c.structure.c0 = s.at("c0").get<double>();
        if (s.contains("c1")) c.structure.c1 = s.at("c1").get<double>();
        if (s.contains("kappa")) c.structure.kappa = s.at("kappa").get<double>();
        if (s.contains("gamma")) c.structure.gamma = s.at("gamma").get<double>();
        if (s.contains("alpha")) c.structure.alpha = s.at("alpha").get<double>();
    }
    opt("delta_grid", c.delta_grid);
    opt("n_list", c.n_list);
    opt("simple_tol", c.simple_tol);
    opt("rank_tol", c.rank_tol);
    opt("gap_index", c.gap_index);
    opt("deltamin_slack", c.deltamin_slack);
    opt("keep_vectors", c.keep_vectors);
    opt("survey", c.survey);
    opt("survey_indices", c.survey_indices);
    opt("survey_rlcd", c.survey_rlcd);
    opt("diagnostic", c.diagnostic);
    opt("diagnostic_indices", c.diagnostic_indices);
    opt("workers", c.workers);
    c.validate();
    return c;
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string text = to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Diagnostic ------------------------------------------------------------------

namespace {

DiagnosticResult diagnostic_from(const SpectralDecomposition& dA, const SpectralDecomposition& dA1,
                                 const Eigen::MatrixXd& S, const Eigen::VectorXd& X, std::size_t i, double L,
                                 Eigen::Index n) {
    const auto k = static_cast<Eigen::Index>(i - 1);
    DiagnosticResult r;
    r.index = i;
    const Eigen::Index p = dA.right_vectors.rows();
    r.b = dA.right_vectors(p - 1, k);
    const double s = dA.values(k);
    const double s1 = dA1.values(k);
    const Eigen::VectorXd Sv = S * dA1.left_vectors.col(k);
    const double sv_norm = Sv.norm();
    if (sv_norm > 0.0) r.lhs = std::abs(Sv.dot(X)) / sv_norm;
    const double sq_diff = std::abs((s - s1) * (s + s1));
    if (s1 > 0.0) r.delta_implied = sq_diff * std::sqrt(static_cast<double>(n)) / s1;
    r.conclusive = std::abs(r.b) > 1e-12 && s1 > 0.0 && sv_norm > 0.0;
    if (r.conclusive) {
        r.rhs = L * sq_diff / (s1 * std::abs(r.b));
        // s and s1 are accurate to a few eps sigma_1, and s - s1 cancels when b is small
        const double abs_err = 64.0 * std::numeric_limits<double>::epsilon() * dA.values(0);
        r.rounding = L * (s + s1) * 2.0 * abs_err / (s1 * std::abs(r.b));
        r.holds = r.lhs <= r.rhs * (1.0 + 1e-8) + r.rounding;
    }
    return r;
}

}  // namespace

DiagnosticResult decomposition_diagnostic(const MatrixSample& sample, std::size_t i, double L) {
    const Eigen::Index n = sample.effective.rows();
    const Eigen::Index p = sample.effective.cols();
    if (p < 2) throw SpecError("decomposition_diagnostic: needs p >= 2");
    if (i < 1 || i > static_cast<std::size_t>(p - 1))
        throw SpecError("decomposition_diagnostic: index must lie in [1, p-1]");
    if (L <= 0.0) L = sample.spec.covariance.bound();
    const Eigen::MatrixXd S = covariance_sqrt(sample.spec.covariance, n);
    const Eigen::MatrixXd Mm = sample.model_matrix();
    const auto dA = svd(sample.effective, true);
    const auto dA1 = svd(sample.effective.leftCols(p - 1), true);
    return diagnostic_from(dA, dA1, S, Mm.col(p - 1), i, L, n);
}

// Survey ------------------------------------------------------------------------

std::vector<SurveyEntry> survey_vectors(const SpectralDecomposition& d, const Eigen::MatrixXd& S,
                                        const StructureParams& params, const std::vector<std::size_t>& indices,
                                        bool with_rlcd, std::uint64_t seed) {
    if (!d.has_vectors()) throw SpecError("survey: decomposition carries no singular vectors");
    const Eigen::Index p = d.right_vectors.rows();
    const Eigen::Index n = d.left_vectors.rows();
    std::vector<std::size_t> idx = indices;
    if (idx.empty()) {
        idx.resize(static_cast<std::size_t>(p));
        std::iota(idx.begin(), idx.end(), std::size_t{1});
    }
    const double B = params.c1 / std::sqrt(2.0) / std::sqrt(static_cast<double>(p));
    const double threshold = params.c0 * params.c1 * params.c1 * static_cast<double>(p) / 2.0;
    const Eigen::Index ku = sparse_support_size(p, params);
    const Eigen::Index kw = sparse_support_size(n, params);

    std::vector<SurveyEntry> out;
    out.reserve(idx.size());
    for (auto i : idx) {
        const auto k = static_cast<Eigen::Index>(i - 1);
        SurveyEntry e;
        e.index = i;
        const Eigen::VectorXd u = d.right_vectors.col(k).normalized();
        const Eigen::VectorXd w = (S * d.left_vectors.col(k)).normalized();
        e.u_sparse_dist = sparse_distance(u, ku);
        e.w_sparse_dist = sparse_distance(w, kw);
        e.u_compressible = e.u_sparse_dist <= params.c1;
        e.w_compressible = e.w_sparse_dist <= params.c1;
        e.large_count = large_coordinate_count(u, B);
        e.large_ok = static_cast<double>(e.large_count) >= threshold;
        if (with_rlcd) {
            RlcdOptions o;
            o.seed = derive_key(seed, i);
            auto try_rlcd = [&](const Eigen::VectorXd& x, bool compressible) -> std::optional<RlcdResult> {
                if (compressible) return std::nullopt;
                try {
                    return regularized_lcd(x, params, o);
                } catch (const SpecError&) {
                    return std::nullopt;
                }
            };
            e.u_rlcd = try_rlcd(u, e.u_compressible);
            e.w_rlcd = try_rlcd(w, e.w_compressible);
        }
        out.push_back(std::move(e));
    }
    return out;
}

// Trials --------------------------------------------------------------------------

TrialRecord run_trial(const ExperimentConfig& cfg, std::size_t trial) {
    TrialRecord r;
    r.trial = trial;
    r.seed = derive_key(cfg.ensemble.seed, trial);
    try {
        EnsembleSpec spec = cfg.ensemble;
        spec.seed = r.seed;
        const MatrixSample s = sample_matrix(spec);
        const Eigen::Index n = spec.n;
        const Eigen::Index p = spec.p;
        const bool vectors = cfg.keep_vectors || cfg.survey || cfg.diagnostic;
        SpectralDecomposition d = svd(s.effective, vectors);
        r.values = d.values;
        r.flags = s.effective == s.raw ? event_flags_from_values(d.values, n, cfg.K, cfg.rank_tol)
                                       : event_flags(s.raw, cfg.K, cfg.rank_tol);
        r.gaps = gap_report(d.values, cfg.simple_tol);

        const Eigen::MatrixXd minor = s.effective.leftCols(p - 1);
        std::optional<SpectralDecomposition> dminor;
        if (cfg.diagnostic) dminor = svd(minor, true);
        r.interlacing = check_interlacing(d.values, dminor ? dminor->values : singular_values(minor));

        const std::size_t fixed = cfg.fixed_gap_index();
        for (double delta : cfg.delta_grid) {
            r.fixed_events.push_back(gap_event_indicator(d.values, fixed, delta, n) ? 1 : 0);
            char any = 0;
            for (std::size_t i = 1; i < static_cast<std::size_t>(p) && !any; ++i)
                any = gap_event_indicator(d.values, i, delta, n) ? 1 : 0;
            r.worst_events.push_back(any);
        }

        if (cfg.survey || cfg.diagnostic) {
            const Eigen::MatrixXd S = covariance_sqrt(spec.covariance, n);
            if (cfg.survey)
                r.survey = survey_vectors(d, S, cfg.structure, cfg.survey_indices, cfg.survey_rlcd, r.seed);
            if (cfg.diagnostic) {
                const Eigen::VectorXd X = s.model_matrix().col(p - 1);
                std::vector<std::size_t> idx = cfg.diagnostic_indices;
                if (idx.empty()) {
                    idx.resize(static_cast<std::size_t>(p - 1));
                    std::iota(idx.begin(), idx.end(), std::size_t{1});
                }
                for (auto i : idx)
                    r.diagnostics.push_back(diagnostic_from(d, *dminor, S, X, i, spec.covariance.bound(), n));
            }
        }
        if (cfg.keep_vectors) r.decomposition = std::move(d);
        r.ok = true;
    } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
    }
    return r;
}

std::vector<TrialRecord> run_trials(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<TrialRecord> records(cfg.trials);
    parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) { records[t] = run_trial(cfg, t); });
    return records;
}

// Aggregation ---------------------------------------------------------------------

Proportion proportion(std::size_t hits, std::size_t total) {
    Proportion p;
    p.hits = hits;
    p.total = total;
    if (total == 0) return p;
    p.rate = static_cast<double>(hits) / static_cast<double>(total);
    p.ci95 = std::min(binomial_ci95(p.rate, total), 1.0);
    return p;
}

std::vector<CurvePoint> gap_probability_curve(const std::vector<TrialRecord>& records, IndexSelector sel,
                                              const std::vector<double>& delta_grid) {
    std::size_t usable = 0;
    std::vector<std::size_t> hits(delta_grid.size(), 0);
    for (const auto& r : records) {
        if (!r.ok) continue;
        const auto& ev = sel == IndexSelector::Fixed ? r.fixed_events : r.worst_events;
        if (ev.size() != delta_grid.size()) throw SpecError("gap curve: records do not match the delta grid");
        ++usable;
        if (!r.flags.e_K) continue;
        for (std::size_t k = 0; k < ev.size(); ++k) hits[k] += ev[k] ? 1 : 0;
    }
    if (usable == 0) throw SpecError("gap curve: no usable records");
    std::vector<CurvePoint> out;
    for (std::size_t k = 0; k < delta_grid.size(); ++k) out.push_back({delta_grid[k], proportion(hits[k], usable)});
    return out;
}

LinearShapeCheck linear_shape_check(const std::vector<CurvePoint>& curve) {
    LinearShapeCheck c;
    if (curve.empty()) return c;
    c.monotone = true;
    for (std::size_t k = 1; k < curve.size(); ++k)
        if (curve[k].p.rate < curve[k - 1].p.rate) c.monotone = false;
    std::size_t arg = 0;
    c.min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < curve.size(); ++k) {
        const double ratio = curve[k].p.rate / curve[k].delta;
        if (ratio > c.max_ratio || k == 0) {
            c.max_ratio = ratio;
            arg = k;
        }
        c.min_ratio = std::min(c.min_ratio, ratio);
    }
    c.slack = 2.0 * curve[arg].p.ci95 / curve[arg].delta;
    c.passes = c.monotone && c.max_ratio <= 3.0 * c.min_ratio + c.slack;
    return c;
}

Proportion simple_spectrum_rate(const std::vector<TrialRecord>& records, double tol) {
    std::size_t hits = 0, total = 0;
    for (const auto& r : records) {
        if (!r.ok) continue;
        ++total;
        hits += gap_report(r.values, tol).simple ? 1 : 0;
    }
    return proportion(hits, total);
}

FailureSummary failures(const std::vector<TrialRecord>& records) {
    FailureSummary f;
    for (const auto& r : records) {
        if (r.ok) continue;
        ++f.failed;
        if (f.messages.size() < 5) f.messages.push_back("trial " + std::to_string(r.trial) + ": " + r.error);
    }
    return f;
}

bool interlacing_holds(const std::vector<TrialRecord>& records, std::size_t* violations) {
    std::size_t bad = 0;
    for (const auto& r : records)
        if (r.ok && !r.interlacing.holds) ++bad;
    if (violations) *violations = bad;
    return bad == 0;
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw SpecError("quantile of empty data");
    std::sort(v.begin(), v.end());
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

LeastSquares fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw SpecError("fit_line: needs at least two points");
    const double k = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / k;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / k;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw SpecError("fit_line: x values are all equal");
    LeastSquares f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

DeltaMinScaling deltamin_scaling(const ExperimentConfig& cfg) {
    if (cfg.n_list.size() < 3) throw SpecError("deltamin scaling: needs at least three values of n");
    if (cfg.trials < 100) throw SpecError("deltamin scaling: needs at least 100 trials per n");
    const bool square = cfg.ensemble.n == cfg.ensemble.p;
    const double ratio = cfg.ensemble.aspect_ratio();
    DeltaMinScaling out;
    std::vector<double> lx, ly;
    for (auto n : cfg.n_list) {
        ExperimentConfig c = cfg;
        c.ensemble.n = n;
        c.ensemble.p = square ? n : std::max<Eigen::Index>(2, std::llround(ratio * static_cast<double>(n)));
        c.ensemble.seed = derive_key(cfg.ensemble.seed, static_cast<std::uint64_t>(n));
        c.delta_grid.clear();
        c.gap_index = 0;
        c.survey = c.diagnostic = c.keep_vectors = false;
        auto records = run_trials(c);

        DeltaMinRow row;
        row.n = n;
        row.p = c.ensemble.p;
        row.trials = records.size();
        row.threshold = std::pow(static_cast<double>(n), -1.5 - cfg.deltamin_slack);
        std::vector<double> dm;
        std::size_t below = 0;
        for (const auto& r : records) {
            if (!r.ok) {
                ++row.failed;
                continue;
            }
            dm.push_back(r.gaps.delta_min);
            below += r.gaps.delta_min < row.threshold ? 1 : 0;
        }
        if (dm.empty()) throw NumericError("deltamin scaling: every trial failed at n = " + std::to_string(n));
        row.median = quantile(dm, 0.5);
        row.q10 = quantile(dm, 0.1);
        row.q90 = quantile(dm, 0.9);
        row.violation_fraction = static_cast<double>(below) / static_cast<double>(dm.size());
        row.interlacing = interlacing_holds(records);
        if (!(row.median > 0.0)) throw NumericError("deltamin scaling: median delta_min is zero");
        lx.push_back(std::log(static_cast<double>(n)));
        ly.push_back(std::log(row.median));
        out.rows.push_back(row);
        out.records.push_back(std::move(records));
    }
    const auto fit = fit_line(lx, ly);
    out.slope = fit.slope;
    out.intercept = fit.intercept;
    return out;
}

// Figures ---------------------------------------------------------------------------

FigureResult figure_windows(const Eigen::VectorXd& values, Eigen::Index n) {
    FigureResult f;
    f.n = n;
    const double nd = static_cast<double>(n);
    f.windows = {{"hard_edge", 0.04 * nd, 0.056 * nd, {}},
                 {"bulk", 2.0 * nd, 2.016 * nd, {}},
                 {"soft_edge", 3.6 * nd, 3.616 * nd, {}}};
    // ascending order for the rug data
    for (Eigen::Index k = values.size(); k-- > 0;) {
        const double x = values(k) * values(k);
        for (auto& w : f.windows)
            if (x >= w.lo && x <= w.hi) w.values.push_back(x);
        if (x > 4.0 * nd) ++f.above_edge;
    }
    if (values.size()) f.sigma1_sq = values(0) * values(0);
    return f;
}

FigureResult figure_reproduction(const ExperimentConfig& cfg) {
    const EnsembleSpec& spec = cfg.ensemble;
    if (spec.n != spec.p) throw SpecError("figures: needs a square ensemble (n = p)");
    spec.validate();
    const MatrixSample s = sample_matrix(spec);
    return figure_windows(singular_values(s.effective), spec.n);
}

void write_figure_tsv(std::ostream& os, const FigureResult& fig) {
    os << "window\tvalue\n";
    for (const auto& w : fig.windows)
        for (double x : w.values) os << w.name << '\t' << format_double(x) << '\n';
}

void write_figure_svg(std::ostream& os, const FigureResult& fig) {
    constexpr int width = 640, panel = 90, margin = 40;
    const int height = panel * static_cast<int>(fig.windows.size()) + 20;
    char buf[160];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    for (std::size_t k = 0; k < fig.windows.size(); ++k) {
        const auto& w = fig.windows[k];
        const int y0 = 10 + panel * static_cast<int>(k);
        const int axis = y0 + panel - 30;
        std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" font-size=\"12\">%s [%g, %g]: %zu</text>\n", margin,
                      y0 + 14, w.name.c_str(), w.lo, w.hi, w.count());
        os << buf;
        std::snprintf(buf, sizeof buf, "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", margin,
                      axis, width - margin, axis);
        os << buf;
        for (double x : w.values) {
            const double t = (x - w.lo) / (w.hi - w.lo);
            const double px = margin + t * (width - 2 * margin);
            std::snprintf(buf, sizeof buf,
                          "<line x1=\"%.2f\" y1=\"%d\" x2=\"%.2f\" y2=\"%d\" stroke=\"steelblue\"/>\n", px,
                          axis - 20, px, axis);
            os << buf;
        }
    }
    os << "</svg>\n";
}

// Survey and diagnostic summaries --------------------------------------------------

SurveySummary structure_survey(const std::vector<TrialRecord>& records, const ExperimentConfig& cfg) {
    SurveySummary s;
    const auto& sp = cfg.structure;
    const double p = static_cast<double>(cfg.ensemble.p);
    s.large_threshold = sp.c0 * sp.c1 * sp.c1 * p / 2.0;
    s.B = sp.c1 / std::sqrt(2.0) / std::sqrt(p);
    std::size_t u_inc = 0, w_inc = 0, large = 0;
    for (const auto& r : records) {
        if (!r.ok) continue;
        for (const auto& e : r.survey) {
            ++s.vectors;
            u_inc += e.u_compressible ? 0 : 1;
            w_inc += e.w_compressible ? 0 : 1;
            large += e.large_ok ? 1 : 0;
        }
    }
    s.u_incompressible = proportion(u_inc, s.vectors);
    s.w_incompressible = proportion(w_inc, s.vectors);
    s.large_count_ok = proportion(large, s.vectors);
    return s;
}

DiagnosticSummary diagnostic_summary(const std::vector<TrialRecord>& records) {
    DiagnosticSummary s;
    for (const auto& r : records) {
        if (!r.ok) continue;
        for (const auto& d : r.diagnostics) {
            ++s.evaluated;
            if (!d.conclusive) continue;
            ++s.conclusive;
            if (!d.holds) ++s.violations;
            const double allowed = d.rhs * (1.0 + 1e-8) + d.rounding;
            if (allowed > 0.0) s.worst_ratio = std::max(s.worst_ratio, d.lhs / allowed);
        }
    }
    return s;
}

// Output ------------------------------------------------------------------------------

namespace {

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

nlohmann::json proportion_json(const Proportion& p) {
    return {{"rate", p.rate}, {"ci95", p.ci95}, {"hits", p.hits}, {"total", p.total}};
}

nlohmann::json curve_json(const std::vector<CurvePoint>& curve) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& c : curve) {
        auto j = proportion_json(c.p);
        j["delta"] = c.delta;
        pts.push_back(j);
    }
    const auto shape = linear_shape_check(curve);
    return {{"points", pts},
            {"monotone", shape.monotone},
            {"max_ratio", shape.max_ratio},
            {"min_ratio", shape.min_ratio},
            {"slack", shape.slack},
            {"linear_shape", shape.passes}};
}

}  // namespace

void write_experiment_csv(std::ostream& os, const ExperimentConfig& cfg, const std::vector<TrialRecord>& records) {
    os << "trial,seed,ok,e_K,norm_ok,full_rank,norm,sigma_min,delta_min,argmin,simple,interlacing,"
          "interlacing_violation";
    for (double d : cfg.delta_grid) os << ",fixed_" << format_double(d) << ",worst_" << format_double(d);
    os << ",error\n";
    for (const auto& r : records) {
        os << r.trial << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ',';
        if (r.ok) {
            os << (r.flags.e_K ? 1 : 0) << ',' << (r.flags.norm_ok ? 1 : 0) << ',' << (r.flags.full_rank ? 1 : 0)
               << ',' << format_double(r.flags.norm) << ',' << format_double(r.flags.sigma_min) << ','
               << format_double(r.gaps.delta_min) << ',' << r.gaps.argmin << ',' << (r.gaps.simple ? 1 : 0) << ','
               << (r.interlacing.holds ? 1 : 0) << ',' << format_double(r.interlacing.max_violation);
            for (std::size_t k = 0; k < r.fixed_events.size(); ++k)
                os << ',' << int(r.fixed_events[k]) << ',' << int(r.worst_events[k]);
        } else {
            os << ",,,,,,,,,";
            for (std::size_t k = 0; k < cfg.delta_grid.size(); ++k) os << ",,";
        }
        os << ',' << csv_quote(r.error) << '\n';
    }
}

void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& fixed, const std::vector<CurvePoint>& worst) {
    os << "selector,delta,p_hat,ci95,hits,trials\n";
    auto rows = [&](const char* name, const std::vector<CurvePoint>& c) {
        for (const auto& pt : c)
            os << name << ',' << format_double(pt.delta) << ',' << format_double(pt.p.rate) << ','
               << format_double(pt.p.ci95) << ',' << pt.p.hits << ',' << pt.p.total << '\n';
    };
    rows("fixed", fixed);
    rows("worst", worst);
}

void write_deltamin_csv(std::ostream& os, const DeltaMinScaling& s) {
    os << "n,p,trials,failed,median,q10,q90,threshold,violation_fraction,interlacing\n";
    for (const auto& r : s.rows)
        os << r.n << ',' << r.p << ',' << r.trials << ',' << r.failed << ',' << format_double(r.median) << ','
           << format_double(r.q10) << ',' << format_double(r.q90) << ',' << format_double(r.threshold) << ','
           << format_double(r.violation_fraction) << ',' << (r.interlacing ? 1 : 0) << '\n';
}

void write_survey_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
    os << "trial,index,u_sparse_dist,u_compressible,w_sparse_dist,w_compressible,large_count,large_ok,u_rlcd,w_rlcd\n";
    auto rl = [](const std::optional<RlcdResult>& r) { return r ? format_double(r->value) : std::string(); };
    for (const auto& r : records)
        for (const auto& e : r.survey)
            os << r.trial << ',' << e.index << ',' << format_double(e.u_sparse_dist) << ','
               << (e.u_compressible ? 1 : 0) << ',' << format_double(e.w_sparse_dist) << ','
               << (e.w_compressible ? 1 : 0) << ',' << e.large_count << ',' << (e.large_ok ? 1 : 0) << ','
               << rl(e.u_rlcd) << ',' << rl(e.w_rlcd) << '\n';
}

nlohmann::json provenance(const ExperimentConfig& cfg) {
    return {{"config", to_json(cfg)}, {"config_hash", config_hash(cfg)}, {"version", library_version()}};
}

nlohmann::json summary_json(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records) {
    nlohmann::json j = provenance(cfg);
    const auto f = failures(records);
    j["trials"] = records.size();
    j["failed"] = f.failed;
    j["failure_messages"] = f.messages;
    std::size_t ek = 0, usable = 0;
    for (const auto& r : records)
        if (r.ok) {
            ++usable;
            ek += r.flags.e_K ? 1 : 0;
        }
    j["e_K"] = proportion_json(proportion(ek, usable));
    j["simple_spectrum"] = proportion_json(simple_spectrum_rate(records, cfg.simple_tol));
    std::size_t bad = 0;
    j["interlacing"] = {{"holds", interlacing_holds(records, &bad)}, {"violations", bad}};
    if (!cfg.delta_grid.empty() && usable > 0) {
        j["gap_index"] = cfg.fixed_gap_index();
        j["curve_fixed"] = curve_json(gap_probability_curve(records, IndexSelector::Fixed, cfg.delta_grid));
        j["curve_worst"] = curve_json(gap_probability_curve(records, IndexSelector::Worst, cfg.delta_grid));
    }
    if (cfg.survey) {
        const auto s = structure_survey(records, cfg);
        j["survey"] = {{"vectors", s.vectors},
                       {"u_incompressible", proportion_json(s.u_incompressible)},
                       {"w_incompressible", proportion_json(s.w_incompressible)},
                       {"large_count_ok", proportion_json(s.large_count_ok)},
                       {"large_threshold", s.large_threshold},
                       {"B", s.B}};
    }
    if (cfg.diagnostic) {
        const auto d = diagnostic_summary(records);
        j["diagnostic"] = {{"evaluated", d.evaluated},
                           {"conclusive", d.conclusive},
                           {"violations", d.violations},
                           {"worst_ratio", d.worst_ratio}};
    }
    return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw SpecError("cannot open " + path.string() + " for writing");
    f << contents;
    if (!f) throw SpecError("failed writing " + path.string());
}

void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                       const std::vector<TrialRecord>& records) {
    std::filesystem::create_directories(dir);
    std::ostringstream os;
    write_experiment_csv(os, cfg, records);
    write_text_file(dir / "experiment.csv", os.str());
    const bool any_ok = std::any_of(records.begin(), records.end(), [](const TrialRecord& r) { return r.ok; });
    if (!cfg.delta_grid.empty() && any_ok) {
        std::ostringstream cs;
        write_curve_csv(cs, gap_probability_curve(records, IndexSelector::Fixed, cfg.delta_grid),
                        gap_probability_curve(records, IndexSelector::Worst, cfg.delta_grid));
        write_text_file(dir / "curve.csv", cs.str());
    }
    if (cfg.survey) {
        std::ostringstream ss;
        write_survey_csv(ss, records);
        write_text_file(dir / "survey.csv", ss.str());
    }
    write_text_file(dir / "summary.json", summary_json(cfg, records).dump(2) + "\n");
}

}  // namespace svgap
