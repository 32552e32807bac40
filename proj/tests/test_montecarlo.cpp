#include "doctest.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/SVD>

#include "svgap/error.hpp"
#include "svgap/montecarlo.hpp"

using namespace svgap;

namespace {

ExperimentConfig square(Eigen::Index n, std::size_t trials, std::uint64_t seed) {
    ExperimentConfig c;
    c.ensemble.n = n;
    c.ensemble.p = n;
    c.ensemble.seed = seed;
    c.trials = trials;
    return c;
}

std::string csv_of(const ExperimentConfig& c, const std::vector<TrialRecord>& r) {
    std::ostringstream os;
    write_experiment_csv(os, c, r);
    return os.str();
}

// Both sides of the diagnostic recomputed through Eigen's Jacobi SVD.
std::pair<double, double> jacobi_diagnostic(const MatrixSample& s, Eigen::Index i, double L) {
    const Eigen::Index n = s.effective.rows(), p = s.effective.cols();
    const Eigen::MatrixXd S = covariance_sqrt(s.spec.covariance, n);
    const Eigen::MatrixXd A = S * s.model_matrix();
    Eigen::JacobiSVD<Eigen::MatrixXd> full(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::JacobiSVD<Eigen::MatrixXd> minor(A.leftCols(p - 1), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double b = full.matrixV()(p - 1, i - 1);
    const Eigen::VectorXd w = (S * minor.matrixU().col(i - 1)).normalized();
    const double lhs = std::abs(w.dot(s.model_matrix().col(p - 1)));
    const double a = full.singularValues()(i - 1), a1 = minor.singularValues()(i - 1);
    const double rhs = L * std::abs(a * a - a1 * a1) / (a1 * std::abs(b));
    return {lhs, rhs};
}

}  // namespace

TEST_CASE("degenerate atom gives a record without E_K") {
    auto c = square(4, 1, 1);
    c.ensemble.atom = AtomDistribution::constant(0.0);
    const auto r = run_trials(c);
    REQUIRE(r.size() == 1);
    CHECK(r[0].ok);
    CHECK_FALSE(r[0].flags.e_K);
}

TEST_CASE("trial seeds follow the master seed and are reproducible") {
    auto c = square(20, 12, 99);
    c.delta_grid = {0.1, 1.0};
    const auto a = run_trials(c);
    const auto b = run_trials(c);
    CHECK(csv_of(c, a) == csv_of(c, b));
    for (std::size_t t = 0; t < a.size(); ++t) CHECK(a[t].seed == derive_key(99, t));
    // a trial can be replayed on its own
    CHECK(run_trial(c, 7).values == a[7].values);
}

TEST_CASE("results do not depend on the worker count") {
    auto c = square(30, 40, 5);
    c.delta_grid = {0.01, 0.1, 1.0};
    c.survey = true;
    c.diagnostic = true;
    c.diagnostic_indices = {1, 2, 3};
    c.workers = 1;
    const auto one = run_trials(c);
    const auto s1 = summary_json(c, one).dump();
    for (unsigned w : {2u, 4u, 16u}) {
        c.workers = w;
        const auto many = run_trials(c);
        CHECK(csv_of(c, many) == csv_of(c, one));
        CHECK(summary_json(c, many).dump() == s1);
    }
}

TEST_CASE("interlacing holds on every trial") {
    const auto r = run_trials(square(50, 100, 3));
    std::size_t bad = 99;
    CHECK(interlacing_holds(r, &bad));
    CHECK(bad == 0);
    for (const auto& t : r) CHECK(t.ok);
}

TEST_CASE("gap probability curve") {
    auto c = square(50, 500, 11);
    c.delta_grid = {1e-12, 1e-3, 0.1, 1.0, 1e9};
    const auto r = run_trials(c);
    std::size_t ek = 0;
    for (const auto& t : r) ek += t.flags.e_K ? 1 : 0;

    for (auto sel : {IndexSelector::Fixed, IndexSelector::Worst}) {
        const auto curve = gap_probability_curve(r, sel, c.delta_grid);
        REQUIRE(curve.size() == 5);
        for (std::size_t k = 1; k < curve.size(); ++k) CHECK(curve[k].p.rate >= curve[k - 1].p.rate);
        // saturated event
        CHECK(curve.back().p.hits == ek);
        // delta -> 0: no exact ties
        CHECK(curve.front().p.hits == 0);
        for (const auto& pt : curve) {
            CHECK(pt.p.lo() >= 0.0);
            CHECK(pt.p.hi() <= 1.0);
        }
    }
    CHECK(simple_spectrum_rate(r).rate == 1.0);

    // the fixed index event implies the worst-index event
    for (const auto& t : r)
        for (std::size_t k = 0; k < t.fixed_events.size(); ++k) CHECK((!t.fixed_events[k] || t.worst_events[k]));

    CHECK_THROWS_AS(gap_probability_curve({}, IndexSelector::Fixed, c.delta_grid), SpecError);
    CHECK_THROWS_AS(gap_probability_curve(r, IndexSelector::Fixed, {1.0}), SpecError);
}

TEST_CASE("linear shape check") {
    auto pt = [](double d, std::size_t hits) { return CurvePoint{d, proportion(hits, 1000)}; };
    auto s = linear_shape_check({pt(0.1, 10), pt(0.2, 20), pt(0.4, 40)});
    CHECK(s.monotone);
    CHECK(s.passes);
    CHECK(s.max_ratio == doctest::Approx(0.1));

    // quadratic growth at good resolution fails the ratio test
    s = linear_shape_check({pt(0.1, 1), pt(0.3, 90), pt(1.0, 1000)});
    CHECK(s.monotone);
    CHECK_FALSE(s.passes);

    s = linear_shape_check({pt(0.1, 20), pt(0.2, 10)});
    CHECK_FALSE(s.monotone);
    CHECK_FALSE(s.passes);

    s = linear_shape_check({pt(0.1, 0), pt(0.2, 0)});
    CHECK(s.passes);
}

TEST_CASE("simple spectrum rate") {
    auto c = square(3, 1, 0);
    c.ensemble.atom = AtomDistribution::constant(1.0);
    CHECK(simple_spectrum_rate(run_trials(c)).rate == 0.0);

    c = square(5, 2, 0);
    c.ensemble.preset = MatrixPreset::Identity;
    CHECK(simple_spectrum_rate(run_trials(c)).rate == 0.0);

    c = square(100, 200, 21);
    c.ensemble.p = 80;
    const auto r = run_trials(c);
    const auto rate = simple_spectrum_rate(r);
    CHECK(rate.rate == 1.0);
    CHECK(rate.total == 200);
    CHECK(rate.ci95 == 0.0);
}

TEST_CASE("delta_min scaling on the diagonal ladder") {
    auto c = square(16, 100, 0);
    c.ensemble.preset = MatrixPreset::DiagonalLadder;
    c.n_list = {16, 64, 144};
    const auto s = deltamin_scaling(c);
    REQUIRE(s.rows.size() == 3);
    for (const auto& row : s.rows) {
        CHECK(row.median == doctest::Approx(1.0 / std::sqrt(static_cast<double>(row.n))).epsilon(1e-12));
        CHECK(row.violation_fraction == 0.0);
        CHECK(row.interlacing);
    }
    CHECK(s.slope == doctest::Approx(-0.5).epsilon(1e-10));

    c.n_list = {16, 64};
    CHECK_THROWS_AS(deltamin_scaling(c), SpecError);
    c.n_list = {16, 32, 64};
    c.trials = 50;
    CHECK_THROWS_AS(deltamin_scaling(c), SpecError);
}

TEST_CASE("quantile and line fit") {
    CHECK(quantile({3, 1, 2}, 0.5) == 2.0);
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile({1, 2, 3, 4, 5}, 0.1) == doctest::Approx(1.4));
    CHECK_THROWS_AS(quantile({}, 0.5), SpecError);
    const auto f = fit_line({0, 1, 2}, {1, 3, 5});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK_THROWS_AS(fit_line({1, 1}, {0, 1}), SpecError);
}

TEST_CASE("figure windows") {
    // squared values 110, 130, 5010, 9020, 10100 at n = 2500
    Eigen::VectorXd v(6);
    v << std::sqrt(10100.0), std::sqrt(9020.0), std::sqrt(5010.0), std::sqrt(130.0), std::sqrt(110.0), 1.0;
    const auto f = figure_windows(v, 2500);
    REQUIRE(f.windows.size() == 3);
    CHECK(f.windows[0].lo == doctest::Approx(100));
    CHECK(f.windows[0].hi == doctest::Approx(140));
    CHECK(f.windows[1].lo == doctest::Approx(5000));
    CHECK(f.windows[2].hi == doctest::Approx(9040));
    CHECK(f.windows[0].count() == 2);
    CHECK(f.windows[1].count() == 1);
    CHECK(f.windows[2].count() == 1);
    CHECK(f.above_edge == 1);
    CHECK(f.windows[0].values.front() < f.windows[0].values.back());

    std::ostringstream tsv;
    write_figure_tsv(tsv, f);
    CHECK(tsv.str().rfind("window\tvalue\nhard_edge\t", 0) == 0);
    std::ostringstream svg;
    write_figure_svg(svg, f);
    CHECK(svg.str().find("<svg") == 0);

    auto c = square(10, 1, 0);
    c.ensemble.p = 8;
    CHECK_THROWS_AS(figure_reproduction(c), SpecError);
}

TEST_CASE("structure survey") {
    auto c = square(60, 10, 17);
    c.survey = true;
    const auto r = run_trials(c);
    const auto s = structure_survey(r, c);
    CHECK(s.vectors == 600);
    CHECK(s.u_incompressible.rate >= 0.95);
    CHECK(s.w_incompressible.rate >= 0.95);
    CHECK(s.B == doctest::Approx(0.5 / std::sqrt(2.0) / std::sqrt(60.0)));

    // Sigma = I: w is the left vector itself
    c.keep_vectors = true;
    c.trials = 1;
    const auto one = run_trials(c);
    const auto& d = *one[0].decomposition;
    const auto k = sparse_support_size(60, c.structure);
    for (const auto& e : one[0].survey)
        CHECK(e.w_sparse_dist ==
              doctest::Approx(sparse_distance(d.left_vectors.col(static_cast<Eigen::Index>(e.index - 1)), k)));

    // opt-in regularized LCD lower bounds
    c.survey_rlcd = true;
    c.survey_indices = {1, 30};
    const auto rl = run_trials(c);
    REQUIRE(rl[0].survey.size() == 2);
    for (const auto& e : rl[0].survey)
        if (!e.u_compressible) CHECK(e.u_rlcd.has_value());
}

TEST_CASE("decomposition diagnostic holds and matches an independent computation") {
    EnsembleSpec spec;
    spec.n = 40;
    spec.p = 30;
    std::size_t conclusive = 0;
    for (int t = 0; t < 100; ++t) {
        spec.seed = derive_key(314, static_cast<std::uint64_t>(t));
        spec.covariance = t % 2 ? CovarianceSpec::identity() : CovarianceSpec::diagonal(Eigen::VectorXd::Constant(40, 4.0), 2.0);
        const auto s = sample_matrix(spec);
        const double L = spec.covariance.bound();
        for (std::size_t i = 1; i <= 10; ++i) {
            const auto d = decomposition_diagnostic(s, i);
            if (!d.conclusive) continue;
            ++conclusive;
            CHECK(d.holds);
            CHECK(d.lhs <= d.rhs * (1 + 1e-8));
            if (t < 10) {
                const auto [lhs, rhs] = jacobi_diagnostic(s, static_cast<Eigen::Index>(i), L);
                CHECK(d.lhs == doctest::Approx(lhs).epsilon(1e-6));
                CHECK(d.rhs == doctest::Approx(rhs).epsilon(1e-6));
            }
        }
    }
    CHECK(conclusive >= 990);
    EnsembleSpec small;
    small.n = 4;
    small.p = 3;
    CHECK_THROWS_AS(decomposition_diagnostic(sample_matrix(small), 3), SpecError);
}

TEST_CASE("diagnostic through the trial runner") {
    auto c = square(40, 20, 8);
    c.ensemble.p = 30;
    c.diagnostic = true;
    const auto r = run_trials(c);
    const auto s = diagnostic_summary(r);
    CHECK(s.evaluated == 20 * 29);
    CHECK(s.violations == 0);
    CHECK(s.worst_ratio <= 1.0 + 1e-8);
}

TEST_CASE("config json round trip and hash") {
    auto c = square(12, 7, 42);
    c.delta_grid = {0.5, 1.0};
    c.n_list = {8, 16, 32};
    c.structure.c0 = 0.2;
    const auto j = to_json(c);
    const auto back = experiment_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(config_hash(c).size() == 16);
    c.workers = 8;
    CHECK(config_hash(back) == config_hash(c));
    c.trials = 8;
    CHECK(config_hash(back) != config_hash(c));

    auto bad = j;
    bad["bogus"] = 1;
    CHECK_THROWS_AS(experiment_from_json(bad), SpecError);
    bad = j;
    bad["delta_grid"] = {1.0, 0.5};
    CHECK_THROWS_AS(experiment_from_json(bad), SpecError);
    bad = j;
    bad["structure"]["c9"] = 1;
    CHECK_THROWS_AS(experiment_from_json(bad), SpecError);
}

TEST_CASE("failed trials are recorded, not fatal") {
    auto c = square(6, 3, 1);
    // entries this large overflow inside the decomposition
    c.ensemble.atom = AtomDistribution::custom({{1e308, 0.5}, {-1e308, 0.5}});
    const auto r = run_trials(c);
    REQUIRE(r.size() == 3);
    const auto f = failures(r);
    CHECK(f.failed == 3);
    CHECK_FALSE(f.messages.empty());
    const auto csv = csv_of(c, r);
    CHECK(csv.find("\n0,") != std::string::npos);
    CHECK(simple_spectrum_rate(r).total == 0);
}

TEST_CASE("output files") {
    auto c = square(10, 5, 2);
    c.delta_grid = {0.5};
    c.survey = true;
    const auto dir = std::filesystem::temp_directory_path() / "svgap_mc_test";
    std::filesystem::remove_all(dir);
    write_run_outputs(dir, c, run_trials(c));
    CHECK(std::filesystem::exists(dir / "experiment.csv"));
    CHECK(std::filesystem::exists(dir / "curve.csv"));
    CHECK(std::filesystem::exists(dir / "survey.csv"));
    std::ifstream in(dir / "summary.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j.at("config_hash") == config_hash(c));
    CHECK(j.at("version") == library_version());
    CHECK(j.at("trials") == 5);
    std::ifstream csv(dir / "experiment.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header.rfind("trial,seed,ok,e_K,", 0) == 0);
    CHECK(header.find("fixed_0.5,worst_0.5,error") != std::string::npos);
    std::filesystem::remove_all(dir);
}
