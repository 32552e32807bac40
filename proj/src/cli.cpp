#include "svgap/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "svgap/bipartite_gi.hpp"
#include "svgap/ensemble.hpp"
#include "svgap/error.hpp"
#include "svgap/montecarlo.hpp"
#include "svgap/rng.hpp"
#include "svgap/spectral.hpp"
#include "svgap/vecstruct.hpp"

namespace svgap {

namespace {

namespace fs = std::filesystem;

std::string human(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw SpecError(what + ": bad number '" + tok + "'");
        }
    }
    if (out.empty()) throw SpecError(what + ": empty list");
    return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

AtomDistribution parse_atom(const std::string& s) {
    if (s.rfind("custom:", 0) == 0) {
        // custom:v1:p1,v2:p2,...
        std::vector<std::pair<double, double>> support;
        std::stringstream ss(s.substr(7));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) throw SpecError("--atom custom: expected value:probability pairs");
            const auto v = parse_list(item.substr(0, colon), "--atom");
            const auto p = parse_list(item.substr(colon + 1), "--atom");
            support.emplace_back(v.at(0), p.at(0));
        }
        return AtomDistribution::custom(std::move(support));
    }
    return atom_from_json(nlohmann::json(s));
}

// Smallest L with every eigenvalue in [L^-2, L^2].
double infer_bound(const Eigen::VectorXd& eig) {
    if (eig.size() == 0) return 1.0;
    const double hi = std::sqrt(eig.maxCoeff());
    const double lo = eig.minCoeff() > 0.0 ? 1.0 / std::sqrt(eig.minCoeff()) : INFINITY;
    return std::max({1.0, hi, lo});
}

CovarianceSpec parse_sigma(const std::string& s, std::optional<double> L, Eigen::Index n, std::uint64_t seed) {
    if (s == "identity") return CovarianceSpec::identity(L.value_or(1.0));
    Eigen::VectorXd d;
    if (s.rfind("diag:", 0) == 0) {
        d = to_vector(parse_list(s.substr(5), "--sigma"));
    } else if (s.rfind("diag-uniform:", 0) == 0) {
        const auto b = parse_list(s.substr(13), "--sigma");
        if (b.size() != 2 || !(0.0 < b[0] && b[0] <= b[1])) throw SpecError("--sigma diag-uniform: expected lo,hi");
        SplitMix64 rng(derive_key(seed, 0x5349474d41ULL));
        d.resize(n);
        for (Eigen::Index k = 0; k < n; ++k) d(k) = b[0] + (b[1] - b[0]) * rng.uniform01();
    } else {
        std::istringstream in(read_file(s));
        Eigen::MatrixXd m = read_matrix(in);
        if (m.cols() == 1) {
            d = m.col(0);
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
            return CovarianceSpec::full(m, L.value_or(infer_bound(es.eigenvalues())));
        }
    }
    return CovarianceSpec::diagonal(d, L.value_or(infer_bound(d)));
}

Eigen::VectorXd parse_direction(const std::string& s, Eigen::Index dim, const char* flag) {
    Eigen::VectorXd v;
    if (s == "ones") {
        v = Eigen::VectorXd::Ones(dim);
    } else if (s.size() > 1 && s[0] == 'e' && s.find(',') == std::string::npos) {
        const auto k = static_cast<Eigen::Index>(parse_list(s.substr(1), flag).at(0));
        if (k < 1 || k > dim) throw SpecError(std::string(flag) + ": basis index out of range");
        v = Eigen::VectorXd::Unit(dim, k - 1);
    } else {
        v = to_vector(parse_list(s, flag));
        if (v.size() != dim) throw SpecError(std::string(flag) + ": wrong length");
    }
    const double nrm = v.norm();
    if (!(nrm > 0.0)) throw SpecError(std::string(flag) + ": zero vector");
    return v / nrm;
}

// Options ---------------------------------------------------------------------

struct Options {
    // ensemble
    Eigen::Index n = 0, p = 0;
    std::string atom = "rademacher", sigma = "identity", preset = "random";
    double L = 0.0, eta = 0.0;
    std::string w = "ones", z = "ones";
    std::uint64_t seed = 0;
    std::string config, matrix;
    // experiment
    std::size_t trials = 100;
    double K = 3.0, tol = -1.0, rank_tol = -1.0, slack = 0.1;
    std::string delta_grid, n_list;
    std::size_t gap_index = 0;
    unsigned workers = 1;
    std::string out;
    bool survey_rlcd = false, diagnostic = false;
    // structure
    double c0 = 0.1, c1 = 0.5, kappa = 1.0, gamma = 0.5, alpha = 0.0;
    // vectors
    std::string x, vector_file;
    double theta_max = 0.0, resolution = 1e-4, eps = 0.5;
    bool regularized = false, sampled = false;
    std::size_t subset_size = 0, budget = 100000, samples = 200, levy_samples = 100000;
    // misc
    bool vectors = false, raw = false, brute_fallback = false;
    std::string graph_a, graph_b;

    std::map<std::string, CLI::Option*> opt;

    bool given(const std::string& name) const {
        const auto it = opt.find(name);
        return it != opt.end() && it->second->count() > 0;
    }
};

void add_ensemble_flags(CLI::App* app, Options& o) {
    o.opt["n"] = app->add_option("--n", o.n, "rows of M (ambient dimension)");
    o.opt["p"] = app->add_option("--p", o.p, "columns of M (defaults to n)");
    o.opt["atom"] = app->add_option("--atom", o.atom,
                                    "rademacher | gaussian | uniform | bernoulli | custom:v1:p1,v2:p2,...");
    o.opt["sigma"] = app->add_option("--sigma", o.sigma,
                                     "identity | diag:v1,v2,... | diag-uniform:lo,hi | path to a matrix file");
    o.opt["L"] = app->add_option("--L", o.L, "covariance bound; inferred from Sigma when omitted");
    o.opt["eta"] = app->add_option("--eta", o.eta, "rank-one perturbation strength");
    o.opt["w"] = app->add_option("--w", o.w, "perturbation left direction: ones | e<k> | v1,v2,...");
    o.opt["z"] = app->add_option("--z", o.z, "perturbation right direction: ones | e<k> | v1,v2,...");
    o.opt["seed"] = app->add_option("--seed", o.seed, "master seed (generated and recorded when omitted)");
    o.opt["preset"] = app->add_option("--preset", o.preset, "random | identity | ladder | bernoulli-adjacency");
    o.opt["config"] = app->add_option("--config", o.config, "experiment JSON; explicit flags override it");
}

void add_structure_flags(CLI::App* app, Options& o) {
    o.opt["c0"] = app->add_option("--c0", o.c0, "sparsity fraction c0");
    o.opt["c1"] = app->add_option("--c1", o.c1, "compressibility radius c1");
    o.opt["kappa"] = app->add_option("--kappa", o.kappa, "LCD additive cap kappa (default n^0.1 in experiments)");
    o.opt["gamma"] = app->add_option("--gamma", o.gamma, "LCD relative factor gamma");
    o.opt["alpha"] = app->add_option("--alpha", o.alpha, "regularized LCD subset fraction (default c'/4)");
}

void add_run_flags(CLI::App* app, Options& o) {
    o.opt["trials"] = app->add_option("--trials", o.trials, "number of trials");
    o.opt["K"] = app->add_option("--K", o.K, "norm bound in the event E_K");
    o.opt["tol"] = app->add_option("--tol", o.tol, "simple-spectrum tolerance (default relative to sigma_1)");
    o.opt["rank-tol"] = app->add_option("--rank-tol", o.rank_tol, "rank tolerance for E_K");
    o.opt["workers"] = app->add_option("--workers", o.workers, "worker threads; results do not depend on it");
    o.opt["out"] = app->add_option("--out", o.out, "output directory");
}

void add_vector_flags(CLI::App* app, Options& o) {
    o.opt["x"] = app->add_option("--x", o.x, "vector as v1,v2,...");
    o.opt["vector"] = app->add_option("--vector", o.vector_file, "file with whitespace-separated entries");
}

ExperimentConfig build_config(const Options& o, std::ostream& err, bool need_n = true) {
    ExperimentConfig cfg;
    bool seed_known = false;
    if (!o.config.empty()) {
        cfg = experiment_from_json(nlohmann::json::parse(read_file(o.config)));
        seed_known = true;
    }
    EnsembleSpec& e = cfg.ensemble;
    if (o.given("n")) e.n = o.n;
    if (o.given("p"))
        e.p = o.p;
    else if (o.given("n"))
        e.p = e.n;
    if (need_n && o.config.empty() && !o.given("n")) throw SpecError("--n is required (or --config)");
    if (o.given("seed")) {
        e.seed = o.seed;
        seed_known = true;
    }
    if (!seed_known) {
        std::random_device rd;
        e.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        err << "seed: " << e.seed << " (generated)\n";
    }
    if (o.given("preset") && o.preset == "bernoulli-adjacency") {
        e = EnsembleSpec::bernoulli_adjacency(e.n, e.p, e.seed);
    } else {
        if (o.given("preset")) {
            nlohmann::json j = to_json(e);
            j["preset"] = o.preset;
            e = ensemble_from_json(j);
        }
        if (o.given("atom")) e.atom = parse_atom(o.atom);
        if (o.given("sigma") || o.given("L")) {
            std::optional<double> L;
            if (o.given("L")) L = o.L;
            e.covariance = parse_sigma(o.sigma, L, e.n, e.seed);
        }
        if (o.given("eta") || o.given("w") || o.given("z")) {
            RankOnePerturbation r;
            r.eta = o.eta;
            r.w = parse_direction(o.w, e.n, "--w");
            r.z = parse_direction(o.z, e.p, "--z");
            e.perturbation = r;
        }
    }

    if (o.config.empty()) cfg.structure = StructureParams::defaults_for(e.n);
    if (o.given("c0")) cfg.structure.c0 = o.c0;
    if (o.given("c1")) cfg.structure.c1 = o.c1;
    if (o.given("kappa")) cfg.structure.kappa = o.kappa;
    if (o.given("gamma")) cfg.structure.gamma = o.gamma;
    if (o.given("alpha")) cfg.structure.alpha = o.alpha;

    if (o.given("trials") || o.config.empty()) cfg.trials = o.trials;
    if (o.given("K")) cfg.K = o.K;
    if (o.given("tol")) cfg.simple_tol = o.tol;
    if (o.given("rank-tol")) cfg.rank_tol = o.rank_tol;
    if (o.given("delta-grid")) cfg.delta_grid = parse_list(o.delta_grid, "--delta-grid");
    if (o.given("n-list")) {
        cfg.n_list.clear();
        for (double v : parse_list(o.n_list, "--n-list")) cfg.n_list.push_back(static_cast<Eigen::Index>(v));
    }
    if (o.given("gap-index")) cfg.gap_index = o.gap_index;
    if (o.given("slack")) cfg.deltamin_slack = o.slack;
    if (o.given("survey-rlcd")) cfg.survey_rlcd = o.survey_rlcd;
    if (o.given("diagnostic")) cfg.diagnostic = o.diagnostic;
    if (o.given("workers")) cfg.workers = o.workers;
    return cfg;
}

Eigen::VectorXd read_vector(const Options& o) {
    if (o.given("x") == o.given("vector")) throw SpecError("give exactly one of --x and --vector");
    if (o.given("x")) return to_vector(parse_list(o.x, "--x"));
    std::istringstream in(read_file(o.vector_file));
    std::vector<double> v;
    std::string tok;
    while (in >> tok) v.push_back(parse_list(tok, "--vector").at(0));
    if (v.empty()) throw SpecError("--vector: no entries");
    return to_vector(v);
}

StructureParams structure_from(const Options& o) {
    StructureParams s;
    s.c0 = o.c0;
    s.c1 = o.c1;
    s.kappa = o.kappa;
    s.gamma = o.gamma;
    s.alpha = o.alpha;
    s.validate();
    return s;
}

fs::path ensure_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text_file(path, j.dump(2) + "\n"); }

// Obtains the matrix for svd and gaps: from --matrix or from the ensemble.
Eigen::MatrixXd input_matrix(const Options& o, std::ostream& err, std::optional<ExperimentConfig>& cfg) {
    if (o.given("matrix")) {
        std::istringstream in(read_file(o.matrix));
        return read_matrix(in);
    }
    cfg = build_config(o, err);
    return sample_matrix(cfg->ensemble).effective;
}

// Subcommands -----------------------------------------------------------------

int cmd_gen(const Options& o, std::ostream& out, std::ostream& err) {
    const auto cfg = build_config(o, err);
    const auto s = sample_matrix(cfg.ensemble);
    std::ostringstream ss;
    write_matrix(ss, o.raw ? s.raw : s.effective);
    if (o.given("out")) {
        const auto dir = ensure_dir(o.out);
        write_text_file(dir / "matrix.txt", ss.str());
        write_json(dir / "summary.json", provenance(cfg));
    } else {
        out << ss.str();
    }
    return 0;
}

int cmd_svd(const Options& o, std::ostream& out, std::ostream& err) {
    std::optional<ExperimentConfig> cfg;
    const auto A = input_matrix(o, err, cfg);
    const auto d = svd(A, o.vectors);
    std::ostringstream spectrum;
    write_spectrum_csv(spectrum, d.values);
    if (o.given("out")) {
        const auto dir = ensure_dir(o.out);
        write_text_file(dir / "spectrum.csv", spectrum.str());
        if (o.vectors) {
            std::ostringstream l, r;
            write_matrix(l, d.left_vectors);
            write_matrix(r, d.right_vectors);
            write_text_file(dir / "left_vectors.txt", l.str());
            write_text_file(dir / "right_vectors.txt", r.str());
        }
        nlohmann::json j = cfg ? provenance(*cfg) : nlohmann::json{{"matrix", o.matrix}, {"version", library_version()}};
        j["residual"] = d.residual;
        write_json(dir / "summary.json", j);
    } else {
        out << spectrum.str();
    }
    return 0;
}

int cmd_gaps(const Options& o, std::ostream& out, std::ostream& err) {
    std::optional<ExperimentConfig> cfg;
    const auto A = input_matrix(o, err, cfg);
    const auto values = singular_values(A);
    std::ostringstream csv;
    csv << "i,delta,sq_gap\n";
    if (values.size() < 2) throw SpecError("gaps: need at least two singular values");
    const auto g = gap_report(values, o.given("tol") ? o.tol : -1.0);
    for (Eigen::Index i = 0; i < g.gaps.size(); ++i)
        csv << (i + 1) << ',' << format_double(g.gaps(i)) << ',' << format_double(g.squared_gaps(i)) << '\n';
    if (o.given("out")) {
        const auto dir = ensure_dir(o.out);
        write_text_file(dir / "gaps.csv", csv.str());
        nlohmann::json j = cfg ? provenance(*cfg) : nlohmann::json{{"matrix", o.matrix}, {"version", library_version()}};
        j["delta_min"] = g.delta_min;
        j["argmin"] = g.argmin;
        j["simple"] = g.simple;
        j["tolerance"] = g.tolerance;
        write_json(dir / "summary.json", j);
    } else {
        out << csv.str();
    }
    err << "delta_min " << human(g.delta_min) << " at i = " << g.argmin << ", "
        << (g.simple ? "simple" : "not simple") << " at tol " << human(g.tolerance) << '\n';
    return 0;
}

int cmd_lcd(const Options& o, std::ostream& out) {
    const auto x = read_vector(o);
    const auto params = structure_from(o);
    LcdOptions lo;
    lo.theta_max = o.theta_max;
    lo.resolution = o.resolution;
    if (!o.regularized) {
        const auto r = lcd(x, params, lo);
        out << "value,mode,witness_theta,resolution\n"
            << format_double(r.value) << ',' << (r.at_least ? "at_least" : "finite") << ','
            << (r.at_least ? "" : format_double(r.witness_theta)) << ',' << format_double(r.resolution) << '\n';
        return 0;
    }
    RlcdOptions ro;
    ro.lcd = lo;
    ro.budget = o.budget;
    ro.samples = o.samples;
    ro.force_sampled = o.sampled;
    ro.seed = o.seed;
    if (o.given("subset-size")) ro.subset_size = static_cast<Eigen::Index>(o.subset_size);
    const auto r = regularized_lcd(x, params, ro);
    out << "value,mode,sampling,subsets,lower_bound\n"
        << format_double(r.value) << ',' << (r.at_least ? "at_least" : "finite") << ','
        << (r.mode == RlcdResult::Mode::Exhaustive ? "exhaustive" : "sampled") << ',' << r.subsets_evaluated << ','
        << (r.is_lower_bound ? 1 : 0) << '\n';
    return 0;
}

int cmd_compress(const Options& o, std::ostream& out) {
    const auto x = read_vector(o);
    StructureReportOptions so;
    so.compute_lcd = false;
    so.compute_rlcd = false;
    const auto r = structure_report(x, structure_from(o), so);
    out << structure_csv_header() << '\n' << structure_csv_row(r) << '\n';
    return 0;
}

int cmd_levy(const Options& o, std::ostream& out, std::ostream& err) {
    std::uint64_t seed = o.seed;
    if (!o.given("seed")) {
        std::random_device rd;
        seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        err << "seed: " << seed << " (generated)\n";
    }
    const auto atom = parse_atom(o.atom);
    const auto est = o.given("x") || o.given("vector") ? small_ball_dot(read_vector(o), atom, o.eps, o.levy_samples, seed)
                                                       : levy_concentration(atom, o.eps, o.levy_samples, seed);
    out << "estimate,ci95,samples,epsilon\n"
        << format_double(est.estimate) << ',' << format_double(est.ci95) << ',' << est.samples << ','
        << format_double(est.epsilon) << '\n';
    return 0;
}

void print_proportion(std::ostream& out, const std::string& label, const Proportion& p) {
    out << label << ' ' << human(p.rate) << " +- " << human(p.ci95) << " (" << p.hits << '/' << p.total << ")\n";
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err, bool survey, bool need_grid) {
    if (!o.given("out")) throw SpecError("--out DIR is required");
    auto cfg = build_config(o, err);
    if (survey) cfg.survey = true;
    if (need_grid && cfg.delta_grid.empty()) throw SpecError("--delta-grid is required");
    const auto records = run_trials(cfg);
    const auto dir = ensure_dir(o.out);
    write_run_outputs(dir, cfg, records);

    const auto f = failures(records);
    out << "config " << config_hash(cfg) << ", " << records.size() << " trials, " << f.failed << " failed\n";
    for (const auto& m : f.messages) err << "trial failure: " << m << '\n';
    if (f.failed == records.size()) return cli_error_exit;
    print_proportion(out, "simple spectrum", simple_spectrum_rate(records, cfg.simple_tol));
    std::size_t bad = 0;
    out << "interlacing " << (interlacing_holds(records, &bad) ? "holds" : "violated") << " (" << bad
        << " violations)\n";
    if (!cfg.delta_grid.empty()) {
        const auto fixed = gap_probability_curve(records, IndexSelector::Fixed, cfg.delta_grid);
        const auto worst = gap_probability_curve(records, IndexSelector::Worst, cfg.delta_grid);
        out << "delta  p_fixed  ci95  p_worst  ci95   (i = " << cfg.fixed_gap_index() << ")\n";
        for (std::size_t k = 0; k < fixed.size(); ++k)
            out << human(fixed[k].delta) << "  " << human(fixed[k].p.rate) << "  " << human(fixed[k].p.ci95) << "  "
                << human(worst[k].p.rate) << "  " << human(worst[k].p.ci95) << '\n';
        if (need_grid) {
            const auto s = linear_shape_check(fixed);
            out << "linear shape " << (s.passes ? "passes" : "fails") << ": monotone " << (s.monotone ? "yes" : "no")
                << ", max P/delta " << human(s.max_ratio) << " <= 3 * " << human(s.min_ratio) << " + "
                << human(s.slack) << '\n';
        }
    }
    if (cfg.survey) {
        const auto s = structure_survey(records, cfg);
        print_proportion(out, "u incompressible", s.u_incompressible);
        print_proportion(out, "w incompressible", s.w_incompressible);
        print_proportion(out, "large coordinates", s.large_count_ok);
    }
    if (cfg.diagnostic) {
        const auto d = diagnostic_summary(records);
        out << "diagnostic " << d.conclusive << '/' << d.evaluated << " conclusive, " << d.violations
            << " violations, worst lhs/bound " << human(d.worst_ratio) << '\n';
    }
    return 0;
}

int cmd_scan_deltamin(const Options& o, std::ostream& out, std::ostream& err) {
    if (!o.given("out")) throw SpecError("--out DIR is required");
    auto cfg = build_config(o, err, false);
    if (!o.given("n") && o.config.empty() && !cfg.n_list.empty()) {
        cfg.ensemble.n = cfg.n_list.front();
        cfg.ensemble.p = cfg.n_list.front();
    }
    const auto s = deltamin_scaling(cfg);
    const auto dir = ensure_dir(o.out);
    std::ostringstream csv;
    write_deltamin_csv(csv, s);
    write_text_file(dir / "deltamin.csv", csv.str());
    nlohmann::json j = provenance(cfg);
    j["slope"] = s.slope;
    j["intercept"] = s.intercept;
    write_json(dir / "summary.json", j);

    out << "n  median  q10  q90  threshold  violations  interlacing\n";
    for (const auto& r : s.rows)
        out << r.n << "  " << human(r.median) << "  " << human(r.q10) << "  " << human(r.q90) << "  "
            << human(r.threshold) << "  " << human(r.violation_fraction) << "  " << (r.interlacing ? "ok" : "violated")
            << '\n';
    out << "slope " << human(s.slope) << '\n';
    return 0;
}

int cmd_figures(const Options& o, std::ostream& out, std::ostream& err) {
    auto cfg = build_config(o, err);
    if (o.given("p") && o.p != cfg.ensemble.n) throw SpecError("figures: p must equal n");
    cfg.ensemble.p = cfg.ensemble.n;
    const auto fig = figure_reproduction(cfg);
    out << "window,lo,hi,count\n";
    for (const auto& w : fig.windows)
        out << w.name << ',' << format_double(w.lo) << ',' << format_double(w.hi) << ',' << w.count() << '\n';
    err << "sigma_1^2 " << human(fig.sigma1_sq) << ", " << fig.above_edge << " above 4n\n";
    if (o.given("out")) {
        const auto dir = ensure_dir(o.out);
        std::ostringstream tsv, svg;
        write_figure_tsv(tsv, fig);
        write_figure_svg(svg, fig);
        write_text_file(dir / "figure.tsv", tsv.str());
        write_text_file(dir / "figure.svg", svg.str());
        nlohmann::json j = provenance(cfg);
        for (const auto& w : fig.windows) j["counts"][w.name] = w.count();
        j["above_edge"] = fig.above_edge;
        j["sigma1_sq"] = fig.sigma1_sq;
        write_json(dir / "summary.json", j);
    }
    return 0;
}

int cmd_gi(const Options& o, std::ostream& out) {
    const auto g = parse_graph(read_file(o.graph_a));
    const auto h = parse_graph(read_file(o.graph_b));
    SpectralMatchOptions so;
    if (o.given("tol")) so.tol = o.tol;
    auto r = spectral_match(g, h, so);
    if (r.verdict == GiResult::Verdict::Indeterminate && o.brute_fallback && g.n_left() <= brute_force_limit) {
        out << "spectral: " << r.describe() << "; falling back to exhaustive search\n";
        r = brute_force_gi(g, h);
    }
    out << r.describe() << '\n';
    if (r.verdict == GiResult::Verdict::Isomorphic) write_mapping(out, r);
    switch (r.verdict) {
        case GiResult::Verdict::Isomorphic: return 0;
        case GiResult::Verdict::NotIsomorphic: return 1;
        case GiResult::Verdict::Indeterminate: return 2;
    }
    return cli_error_exit;
}

}  // namespace

std::vector<std::string> cli_subcommands() {
    return {"gen", "svd", "gaps", "lcd", "compress", "levy", "run", "scan-deltamin", "curve", "figures", "survey", "gi"};
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"svgap: singular value gaps of Sigma^{1/2}(M + eta w z^T)", "svgap"};
    app.set_version_flag("--version", library_version());
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "sample one matrix and write it");
    add_ensemble_flags(gen, o);
    o.opt["raw"] = gen->add_flag("--raw", o.raw, "write the raw atom matrix M instead of the model matrix");
    o.opt["out"] = gen->add_option("--out", o.out, "output directory (stdout when omitted)");

    auto* svd_cmd = app.add_subcommand("svd", "singular values (and vectors) of a matrix");
    auto* gaps_cmd = app.add_subcommand("gaps", "consecutive singular value gaps of a matrix");
    for (auto* c : {svd_cmd, gaps_cmd}) {
        add_ensemble_flags(c, o);
        o.opt["matrix"] = c->add_option("--matrix", o.matrix, "matrix file ('n p' header then rows)");
        o.opt["out"] = c->add_option("--out", o.out, "output directory (stdout when omitted)");
    }
    o.opt["vectors"] = svd_cmd->add_flag("--vectors", o.vectors, "also write singular vectors (needs --out)");
    o.opt["tol"] = gaps_cmd->add_option("--tol", o.tol, "simple-spectrum tolerance");

    auto* lcd_cmd = app.add_subcommand("lcd", "least common denominator of a vector");
    add_vector_flags(lcd_cmd, o);
    add_structure_flags(lcd_cmd, o);
    o.opt["theta-max"] = lcd_cmd->add_option("--theta-max", o.theta_max, "scan limit (default 1e3 sqrt(m))");
    o.opt["resolution"] = lcd_cmd->add_option("--resolution", o.resolution, "bisection resolution");
    o.opt["regularized"] = lcd_cmd->add_flag("--regularized", o.regularized, "regularized LCD over spread subsets");
    o.opt["subset-size"] = lcd_cmd->add_option("--subset-size", o.subset_size, "override ceil(alpha m)");
    o.opt["budget"] = lcd_cmd->add_option("--budget", o.budget, "exhaustive when the subset count is within it");
    o.opt["samples"] = lcd_cmd->add_option("--samples", o.samples, "subsets drawn in sampled mode");
    o.opt["sampled"] = lcd_cmd->add_flag("--sampled", o.sampled, "force sampled mode");
    o.opt["seed"] = lcd_cmd->add_option("--seed", o.seed, "seed for sampled subsets");

    auto* compress_cmd = app.add_subcommand("compress", "sparse distance, compressibility and spread size");
    add_vector_flags(compress_cmd, o);
    o.opt["c0"] = compress_cmd->add_option("--c0", o.c0, "sparsity fraction c0");
    o.opt["c1"] = compress_cmd->add_option("--c1", o.c1, "compressibility radius c1");

    auto* levy_cmd = app.add_subcommand("levy", "Levy concentration of an atom or of sum x_i xi_i");
    add_vector_flags(levy_cmd, o);
    o.opt["atom"] = levy_cmd->add_option("--atom", o.atom, "rademacher | gaussian | uniform | bernoulli | custom:...");
    o.opt["eps"] = levy_cmd->add_option("--eps", o.eps, "small-ball radius");
    o.opt["samples"] = levy_cmd->add_option("--samples", o.levy_samples, "Monte-Carlo samples (>= 1000)");
    o.opt["seed"] = levy_cmd->add_option("--seed", o.seed, "seed (generated and recorded when omitted)");

    auto* run_cmd = app.add_subcommand("run", "Monte-Carlo campaign with per-trial records");
    auto* curve_cmd = app.add_subcommand("curve", "gap probability curve and its linear shape check");
    auto* survey_cmd = app.add_subcommand("survey", "incompressibility survey of singular vectors");
    for (auto* c : {run_cmd, curve_cmd, survey_cmd}) {
        add_ensemble_flags(c, o);
        add_run_flags(c, o);
        add_structure_flags(c, o);
        o.opt["delta-grid"] = c->add_option("--delta-grid", o.delta_grid, "comma-separated delta values");
        o.opt["gap-index"] = c->add_option("--gap-index", o.gap_index, "fixed 1-based index (default floor(p/2))");
        o.opt["survey-rlcd"] = c->add_flag("--survey-rlcd", o.survey_rlcd, "include regularized LCD in the survey");
        o.opt["diagnostic"] = c->add_flag("--diagnostic", o.diagnostic, "evaluate the decomposition diagnostic");
    }

    auto* scan_cmd = app.add_subcommand("scan-deltamin", "delta_min across sizes with a log-log fit");
    add_ensemble_flags(scan_cmd, o);
    add_run_flags(scan_cmd, o);
    o.opt["n-list"] = scan_cmd->add_option("--n-list", o.n_list, "comma-separated sizes (at least three)");
    o.opt["slack"] = scan_cmd->add_option("--slack", o.slack, "exponent slack in the threshold n^{-3/2-slack}");

    auto* fig_cmd = app.add_subcommand("figures", "window counts of squared singular values at n = p");
    add_ensemble_flags(fig_cmd, o);
    o.opt["out"] = fig_cmd->add_option("--out", o.out, "output directory for TSV, SVG and summary");

    auto* gi_cmd = app.add_subcommand("gi", "isomorphism of two balanced bipartite graphs");
    gi_cmd->add_option("a", o.graph_a, "first graph file")->required();
    gi_cmd->add_option("b", o.graph_b, "second graph file")->required();
    o.opt["tol"] = gi_cmd->add_option("--tol", o.tol, "singular value tolerance (default 1e-8)");
    o.opt["brute-fallback"] =
        gi_cmd->add_flag("--brute-fallback", o.brute_fallback, "exhaustive search when indeterminate and n <= 8");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return cli_error_exit;
    }

    // the same flag name is registered on several subcommands; rebind each
    // name to the option of the subcommand that runs
    CLI::App* active = app.get_subcommands().front();
    for (auto it = o.opt.begin(); it != o.opt.end();) {
        it->second = active->get_option_no_throw("--" + it->first);
        it = it->second ? std::next(it) : o.opt.erase(it);
    }

    const std::string cmd = active->get_name();
    try {
        if (cmd == "gen") return cmd_gen(o, out, err);
        if (cmd == "svd") return cmd_svd(o, out, err);
        if (cmd == "gaps") return cmd_gaps(o, out, err);
        if (cmd == "lcd") return cmd_lcd(o, out);
        if (cmd == "compress") return cmd_compress(o, out);
        if (cmd == "levy") return cmd_levy(o, out, err);
        if (cmd == "run") return cmd_run(o, out, err, false, false);
        if (cmd == "curve") return cmd_run(o, out, err, false, true);
        if (cmd == "survey") return cmd_run(o, out, err, true, false);
        if (cmd == "scan-deltamin") return cmd_scan_deltamin(o, out, err);
        if (cmd == "figures") return cmd_figures(o, out, err);
        if (cmd == "gi") return cmd_gi(o, out);
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return cli_error_exit;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return cli_error_exit;
    }
    err << "error: unknown subcommand\n";
    return cli_error_exit;
}

}  // namespace svgap
