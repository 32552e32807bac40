#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "svgap/ensemble.hpp"
#include "svgap/error.hpp"

using namespace svgap;

namespace {

EnsembleSpec square_spec(Eigen::Index n, Eigen::Index p, AtomDistribution atom, std::uint64_t seed = 1) {
    EnsembleSpec s;
    s.n = n;
    s.p = p;
    s.atom = std::move(atom);
    s.seed = seed;
    return s;
}

Eigen::MatrixXd random_spd(SplitMix64& rng, Eigen::Index n) {
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.gaussian();
    Eigen::MatrixXd s = g * g.transpose() / static_cast<double>(n) + Eigen::MatrixXd::Identity(n, n);
    return 0.5 * (s + s.transpose());
}

}  // namespace

TEST_CASE("degenerate atom gives the constant matrix") {
    auto spec = square_spec(2, 2, AtomDistribution::constant(1.0), 12345);
    const auto s = sample_matrix(spec);
    CHECK(s.raw == Eigen::MatrixXd::Ones(2, 2));
    CHECK(s.effective == Eigen::MatrixXd::Ones(2, 2));
}

TEST_CASE("diagonal covariance scales rows by the square root") {
    auto spec = square_spec(3, 2, AtomDistribution::constant(1.0));
    spec.covariance = CovarianceSpec::diagonal(Eigen::Vector3d(4, 4, 4), 2.0);
    const auto s = sample_matrix(spec);
    CHECK(s.effective.isApprox(2.0 * Eigen::MatrixXd::Ones(3, 2), 1e-15));
}

TEST_CASE("rademacher 1000x1000 sample moments") {
    const auto s = sample_matrix(square_spec(1000, 1000, AtomDistribution::rademacher(), 7));
    const double mean = s.raw.mean();
    const double var = (s.raw.array() - mean).square().mean();
    CHECK(std::abs(mean) < 3e-2);
    CHECK(std::abs(var - 1.0) < 1e-2);
}

TEST_CASE("centered atoms have mean 0 and variance 1 empirically") {
    for (const auto& atom : {AtomDistribution::rademacher(), AtomDistribution::gaussian(),
                             AtomDistribution::uniform_sym(),
                             AtomDistribution::custom({{-2.0, 0.125}, {0.0, 0.75}, {2.0, 0.125}})}) {
        CAPTURE(atom.name());
        REQUIRE(atom.centered());
        SplitMix64 rng(99);
        constexpr int N = 1'000'000;
        double sum = 0, sum2 = 0;
        for (int k = 0; k < N; ++k) {
            const double x = atom.sample(rng);
            sum += x;
            sum2 += x * x;
        }
        const double mean = sum / N;
        CHECK(std::abs(mean) < 5e-3);
        CHECK(std::abs(sum2 / N - mean * mean - 1.0) < 1e-2);
    }
    CHECK_FALSE(AtomDistribution::shifted_bernoulli().centered());
}

TEST_CASE("custom atom validation") {
    CHECK_THROWS_AS(AtomDistribution::custom({{1.0, 0.5}, {-1.0, 0.4}}), SpecError);
    CHECK_THROWS_AS(AtomDistribution::custom({{1.0, 1.5}, {-1.0, -0.5}}), SpecError);
    CHECK_THROWS_AS(AtomDistribution::custom({}), SpecError);
    CHECK_NOTHROW(AtomDistribution::custom({{1.0, 0.5}, {-1.0, 0.5 + 1e-13}}));
}

TEST_CASE("atom moments in closed form") {
    const auto r = atom_moments(AtomDistribution::rademacher());
    CHECK(r.m1 == 1.0);
    CHECK(r.m4 == 1.0);

    const auto g = atom_moments(AtomDistribution::gaussian());
    const double c = std::sqrt(2.0 / std::numbers::pi);
    CHECK(g.m1 == doctest::Approx(c).epsilon(1e-15));
    CHECK(g.m2 == 1.0);
    CHECK(g.m3 == doctest::Approx(2.0 * c).epsilon(1e-15));
    CHECK(g.m4 == 3.0);

    const auto t = atom_moments(AtomDistribution::custom({{2.0, 0.5}, {-2.0, 0.5}}));
    CHECK(t.m1 == 2.0);
    CHECK(t.m2 == 4.0);
    CHECK(t.m3 == 8.0);
    CHECK(t.m4 == 16.0);

    const auto u = atom_moments(AtomDistribution::uniform_sym());
    CHECK(u.m2 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(u.m4 == doctest::Approx(1.8).epsilon(1e-15));
}

TEST_CASE("gaussian absolute moments agree with Monte-Carlo") {
    SplitMix64 rng(5);
    const auto atom = AtomDistribution::gaussian();
    double m1 = 0, m3 = 0, m4 = 0;
    constexpr int N = 400'000;
    for (int k = 0; k < N; ++k) {
        const double a = std::abs(atom.sample(rng));
        m1 += a;
        m3 += a * a * a;
        m4 += a * a * a * a;
    }
    const auto exact = atom_moments(atom);
    CHECK(m1 / N == doctest::Approx(exact.m1).epsilon(1e-2));
    CHECK(m3 / N == doctest::Approx(exact.m3).epsilon(2e-2));
    CHECK(m4 / N == doctest::Approx(exact.m4).epsilon(3e-2));
}

TEST_CASE("covariance square roots") {
    CHECK(covariance_sqrt(CovarianceSpec::identity(), 3) == Eigen::MatrixXd::Identity(3, 3));

    const auto d = covariance_sqrt(CovarianceSpec::diagonal(Eigen::Vector2d(4, 9), 3.0), 2);
    CHECK(d.isApprox(Eigen::Vector2d(2, 3).asDiagonal().toDenseMatrix(), 1e-15));

    Eigen::Matrix2d sigma;
    sigma << 2, 1, 1, 2;
    const auto s = covariance_sqrt(CovarianceSpec::full(sigma, 2.0), 2);
    CHECK((s * s - sigma).norm() / sigma.norm() < 1e-10);
    // eigenvalues 1 (vector (1,-1)/sqrt2) and 3 (vector (1,1)/sqrt2)
    Eigen::Matrix2d q;
    q << 1, 1, -1, 1;
    q /= std::sqrt(2.0);
    const Eigen::Matrix2d expected = q * Eigen::Vector2d(1.0, std::sqrt(3.0)).asDiagonal() * q.transpose();
    CHECK((s - expected).norm() < 1e-12);
}

TEST_CASE("covariance_sqrt squares back for random SPD matrices") {
    SplitMix64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<Eigen::Index>(1 + rng.below(50));
        const Eigen::MatrixXd sigma = random_spd(rng, n);
        const auto s = covariance_sqrt(CovarianceSpec::full(sigma, 4.0), n);
        CHECK((s - s.transpose()).norm() == 0.0);
        CHECK((s * s - sigma).norm() / sigma.norm() < 1e-10);
    }
}

TEST_CASE("covariance validation errors") {
    CHECK_THROWS_AS(CovarianceSpec::diagonal(Eigen::Vector2d(4.5, 1.0), 2.0), SpecError);
    CHECK_THROWS_AS(CovarianceSpec::diagonal(Eigen::Vector2d(0.2, 1.0), 2.0), SpecError);
    Eigen::Matrix2d nonsym;
    nonsym << 2, 1, 0.5, 2;
    CHECK_THROWS_AS(CovarianceSpec::full(nonsym, 2.0), SpecError);
    Eigen::Matrix2d indefinite;
    indefinite << 1, 2, 2, 1;
    try {
        CovarianceSpec::full(indefinite, 2.0);
        FAIL("expected an error");
    } catch (const SpecError& e) {
        CHECK(std::string(e.what()).find("eigenvalue -1") != std::string::npos);
    }
    auto spec = square_spec(3, 2, AtomDistribution::rademacher());
    spec.covariance = CovarianceSpec::diagonal(Eigen::Vector2d(1, 1), 1.0);
    CHECK_THROWS_AS(sample_matrix(spec), SpecError);
}

TEST_CASE("ensemble validation") {
    CHECK_THROWS_AS(sample_matrix(square_spec(2, 3, AtomDistribution::rademacher())), SpecError);
    auto spec = square_spec(3, 2, AtomDistribution::rademacher());
    spec.perturbation = RankOnePerturbation{1.0, Eigen::Vector3d(1, 1, 0), Eigen::Vector2d(1, 0)};
    CHECK_THROWS_AS(sample_matrix(spec), SpecError);
}

TEST_CASE("sampling is deterministic and seed-sensitive") {
    auto spec = square_spec(20, 20, AtomDistribution::rademacher(), 0);
    for (std::uint64_t s = 0; s < 100; ++s) {
        spec.seed = s;
        const auto a = sample_matrix(spec).effective;
        const auto again = sample_matrix(spec).effective;
        CHECK(a == again);
        spec.seed = s + 1;
        const auto b = sample_matrix(spec).effective;
        CHECK(a != b);
    }
}

TEST_CASE("rank-one perturbation is added before Sigma^{1/2}") {
    auto spec = square_spec(3, 2, AtomDistribution::constant(0.0));
    spec.covariance = CovarianceSpec::diagonal(Eigen::Vector3d(4, 1, 1), 2.0);
    spec.perturbation = RankOnePerturbation{2.0, Eigen::Vector3d(1, 0, 0), Eigen::Vector2d(0, 1)};
    const auto s = sample_matrix(spec);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 2);
    expected(0, 1) = 4.0;
    CHECK(s.effective.isApprox(expected));
}

TEST_CASE("bernoulli adjacency preset yields a 0/1 matrix") {
    const auto s = sample_matrix(EnsembleSpec::bernoulli_adjacency(12, 10, 3));
    const Eigen::MatrixXd rounded = s.effective.array().round();
    CHECK((s.effective - rounded).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(rounded.minCoeff() == 0.0);
    CHECK(rounded.maxCoeff() == 1.0);
}

TEST_CASE("presets") {
    auto spec = square_spec(4, 3, AtomDistribution::rademacher());
    spec.preset = MatrixPreset::Identity;
    CHECK(sample_matrix(spec).raw == Eigen::MatrixXd::Identity(4, 3));
    spec.preset = MatrixPreset::DiagonalLadder;
    const auto ladder = sample_matrix(spec).raw;
    CHECK(ladder(0, 0) == doctest::Approx(1.5));
    CHECK(ladder(2, 2) == doctest::Approx(0.5));
}

TEST_CASE("ensemble spec survives a JSON round trip") {
    EnsembleSpec spec = EnsembleSpec::bernoulli_adjacency(5, 4, 0xdeadbeefcafef00dULL);
    spec.atom = AtomDistribution::custom({{-1.5, 0.25}, {0.5, 0.75}});
    spec.covariance = CovarianceSpec::diagonal((Eigen::VectorXd(5) << 1, 2, 0.5, 1, 1).finished(), 1.5);
    const auto j = to_json(spec);
    const auto back = ensemble_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.seed == spec.seed);
    CHECK(back.atom == spec.atom);
    CHECK(back.covariance == spec.covariance);
    CHECK(sample_matrix(back).effective == sample_matrix(spec).effective);

    auto bad = j;
    bad["bogus"] = 1;
    CHECK_THROWS_AS(ensemble_from_json(bad), SpecError);
}

TEST_CASE("matrix text format round-trips exactly") {
    auto spec = square_spec(7, 5, AtomDistribution::gaussian(), 31);
    spec.covariance = CovarianceSpec::diagonal(Eigen::VectorXd::LinSpaced(7, 0.5, 2.0), 1.5);
    const auto m = sample_matrix(spec).effective;
    std::stringstream ss;
    write_matrix(ss, m);
    CHECK(ss.str().substr(0, 4) == "7 5\n");
    CHECK(read_matrix(ss) == m);

    std::istringstream bad("2 2\n1 2\n3\n");
    CHECK_THROWS_AS(read_matrix(bad), ParseError);
}
