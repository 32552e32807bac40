#include "svgap/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "svgap/error.hpp"

namespace svgap {

namespace {

constexpr double kUnitTol = 1e-12;
constexpr double kSymTol = 1e-12;

std::string short_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

// AtomDistribution -----------------------------------------------------------

AtomDistribution AtomDistribution::custom(std::vector<std::pair<double, double>> support) {
    if (support.empty()) throw SpecError("custom atom: empty support");
    double total = 0.0;
    for (const auto& [value, prob] : support) {
        if (!std::isfinite(value) || !std::isfinite(prob))
            throw SpecError("custom atom: non-finite value or probability");
        if (prob < 0.0) throw SpecError("custom atom: negative probability");
        total += prob;
    }
    if (std::abs(total - 1.0) > kUnitTol)
        throw SpecError("custom atom: probabilities sum to " + short_double(total) + ", expected 1");
    AtomDistribution a(Kind::Custom);
    a.support_ = std::move(support);
    a.cumulative_.reserve(a.support_.size());
    double acc = 0.0;
    for (const auto& [value, prob] : a.support_) {
        acc += prob;
        a.cumulative_.push_back(acc);
    }
    a.cumulative_.back() = 1.0;
    return a;
}

double AtomDistribution::mean() const {
    switch (kind_) {
    case Kind::ShiftedBernoulli: return 0.5;
    case Kind::Custom: {
        double m = 0.0;
        for (const auto& [v, pr] : support_) m += v * pr;
        return m;
    }
    default: return 0.0;
    }
}

double AtomDistribution::variance() const {
    switch (kind_) {
    case Kind::ShiftedBernoulli: return 0.25;
    case Kind::Custom: {
        const double mu = mean();
        double s = 0.0;
        for (const auto& [v, pr] : support_) s += (v - mu) * (v - mu) * pr;
        return s;
    }
    default: return 1.0;
    }
}

bool AtomDistribution::centered() const {
    if (kind_ == Kind::ShiftedBernoulli) return false;
    if (kind_ == Kind::Custom) return std::abs(mean()) <= kUnitTol;
    return true;
}

bool AtomDistribution::degenerate() const {
    if (kind_ != Kind::Custom) return false;
    return std::count_if(support_.begin(), support_.end(),
                         [](const auto& s) { return s.second > 0.0; }) <= 1;
}

double AtomDistribution::sample(SplitMix64& rng) const {
    switch (kind_) {
    case Kind::Rademacher: return (rng() >> 63) ? 1.0 : -1.0;
    case Kind::StandardGaussian: return rng.gaussian();
    case Kind::UniformSym: return std::numbers::sqrt3 * (2.0 * rng.uniform01() - 1.0);
    case Kind::ShiftedBernoulli: return (rng() >> 63) ? 1.0 : 0.0;
    case Kind::Custom: {
        if (support_.size() == 1) return support_.front().first;
        const double u = rng.uniform01();
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                               support_.size() - 1);
        return support_[idx].first;
    }
    }
    return 0.0;
}

std::string AtomDistribution::name() const {
    switch (kind_) {
    case Kind::Rademacher: return "rademacher";
    case Kind::StandardGaussian: return "gaussian";
    case Kind::UniformSym: return "uniform";
    case Kind::ShiftedBernoulli: return "bernoulli";
    case Kind::Custom: return "custom";
    }
    return "unknown";
}

AbsoluteMoments atom_moments(const AtomDistribution& atom) {
    using K = AtomDistribution::Kind;
    switch (atom.kind()) {
    case K::Rademacher: return {1.0, 1.0, 1.0, 1.0};
    case K::StandardGaussian: {
        // E|g|^k = 2^{k/2} Gamma((k+1)/2) / sqrt(pi)
        const double r = std::sqrt(2.0 / std::numbers::pi);
        return {r, 1.0, 2.0 * r, 3.0};
    }
    case K::UniformSym: {
        // E|xi|^k = a^k / (k + 1) with a = sqrt(3)
        const double a = std::numbers::sqrt3;
        return {a / 2.0, 1.0, a * a * a / 4.0, 9.0 / 5.0};
    }
    case K::ShiftedBernoulli: return {0.5, 0.5, 0.5, 0.5};
    case K::Custom: {
        AbsoluteMoments m;
        for (const auto& [v, pr] : atom.support()) {
            const double a = std::abs(v);
            m.m1 += pr * a;
            m.m2 += pr * a * a;
            m.m3 += pr * a * a * a;
            m.m4 += pr * a * a * a * a;
        }
        return m;
    }
    }
    return {};
}

// CovarianceSpec -------------------------------------------------------------

namespace {

void check_bound(double L) {
    if (!(L >= 1.0) || !std::isfinite(L)) throw SpecError("covariance bound L must be finite and >= 1");
}

void check_eigenvalues(const Eigen::VectorXd& eig, double L) {
    const double lo = 1.0 / (L * L);
    const double hi = L * L;
    for (Eigen::Index k = 0; k < eig.size(); ++k) {
        const double e = eig(k);
        if (!(e >= lo * (1.0 - 1e-12)) || !(e <= hi * (1.0 + 1e-12))) {
            throw SpecError("covariance eigenvalue " + short_double(e) + " outside [L^-2, L^2] = [" +
                            short_double(lo) + ", " + short_double(hi) + "]");
        }
    }
}

}  // namespace

CovarianceSpec CovarianceSpec::identity(double L) {
    check_bound(L);
    CovarianceSpec c;
    c.kind_ = Kind::Identity;
    c.L_ = L;
    return c;
}

CovarianceSpec CovarianceSpec::diagonal(Eigen::VectorXd entries, double L) {
    check_bound(L);
    if (entries.size() == 0) throw SpecError("diagonal covariance: empty");
    if (!entries.allFinite()) throw SpecError("diagonal covariance: non-finite entry");
    Eigen::VectorXd sorted = entries;
    std::sort(sorted.begin(), sorted.end());
    check_eigenvalues(sorted, L);
    CovarianceSpec c;
    c.kind_ = Kind::Diagonal;
    c.L_ = L;
    c.diag_ = std::move(entries);
    return c;
}

CovarianceSpec CovarianceSpec::full(Eigen::MatrixXd sigma, double L) {
    check_bound(L);
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
        throw SpecError("full covariance: matrix must be square and non-empty");
    if (!sigma.allFinite()) throw SpecError("full covariance: non-finite entry");
    const double scale = std::max(sigma.norm(), 1e-300);
    if ((sigma - sigma.transpose()).norm() > kSymTol * scale)
        throw SpecError("full covariance: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
    check_eigenvalues(es.eigenvalues(), L);
    CovarianceSpec c;
    c.kind_ = Kind::FullSPD;
    c.L_ = L;
    c.full_ = std::move(sigma);
    return c;
}

std::optional<Eigen::Index> CovarianceSpec::dimension() const {
    switch (kind_) {
    case Kind::Diagonal: return diag_.size();
    case Kind::FullSPD: return full_.rows();
    default: return std::nullopt;
    }
}

Eigen::MatrixXd CovarianceSpec::matrix(Eigen::Index n) const {
    validate(n);
    switch (kind_) {
    case Kind::Identity: return Eigen::MatrixXd::Identity(n, n);
    case Kind::Diagonal: return diag_.asDiagonal();
    case Kind::FullSPD: return full_;
    }
    return {};
}

Eigen::VectorXd CovarianceSpec::eigenvalues(Eigen::Index n) const {
    switch (kind_) {
    case Kind::Identity: return Eigen::VectorXd::Ones(n);
    case Kind::Diagonal: {
        Eigen::VectorXd s = diag_;
        std::sort(s.begin(), s.end());
        return s;
    }
    case Kind::FullSPD: {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(full_, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }
    }
    return {};
}

void CovarianceSpec::validate(Eigen::Index n) const {
    if (const auto d = dimension(); d && *d != n)
        throw SpecError("covariance dimension " + std::to_string(*d) + " does not match n = " +
                        std::to_string(n));
    check_eigenvalues(eigenvalues(n), L_);
}

bool operator==(const CovarianceSpec& a, const CovarianceSpec& b) {
    return a.kind_ == b.kind_ && a.L_ == b.L_ && a.diag_.size() == b.diag_.size() &&
           a.diag_ == b.diag_ && a.full_.rows() == b.full_.rows() && a.full_.cols() == b.full_.cols() &&
           a.full_ == b.full_;
}

Eigen::MatrixXd covariance_sqrt(const CovarianceSpec& cov, Eigen::Index n) {
    cov.validate(n);
    switch (cov.kind()) {
    case CovarianceSpec::Kind::Identity: return Eigen::MatrixXd::Identity(n, n);
    case CovarianceSpec::Kind::Diagonal: return cov.diagonal_entries().cwiseSqrt().asDiagonal();
    case CovarianceSpec::Kind::FullSPD: {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.full_matrix());
        if (es.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");
        const Eigen::MatrixXd& q = es.eigenvectors();
        Eigen::MatrixXd s = q * es.eigenvalues().cwiseSqrt().asDiagonal() * q.transpose();
        return 0.5 * (s + s.transpose());
    }
    }
    return {};
}

// Perturbation / spec --------------------------------------------------------

void RankOnePerturbation::validate(Eigen::Index n, Eigen::Index p) const {
    if (!std::isfinite(eta)) throw SpecError("perturbation: eta must be finite");
    if (w.size() != n) throw SpecError("perturbation: w must have length n");
    if (z.size() != p) throw SpecError("perturbation: z must have length p");
    if (std::abs(w.norm() - 1.0) > kUnitTol) throw SpecError("perturbation: w is not a unit vector");
    if (std::abs(z.norm() - 1.0) > kUnitTol) throw SpecError("perturbation: z is not a unit vector");
}

void EnsembleSpec::validate() const {
    if (n < 1 || p < 1) throw SpecError("ensemble: n and p must be positive");
    if (p > n) throw SpecError("ensemble: p must not exceed n");
    if (!std::isfinite(scale)) throw SpecError("ensemble: scale must be finite");
    covariance.validate(n);
    if (perturbation) perturbation->validate(n, p);
}

EnsembleSpec EnsembleSpec::bernoulli_adjacency(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    EnsembleSpec s;
    s.n = n;
    s.p = p;
    s.atom = AtomDistribution::rademacher();
    s.seed = seed;
    s.scale = 0.5;
    RankOnePerturbation pert;
    pert.eta = std::sqrt(static_cast<double>(n) * static_cast<double>(p));
    pert.w = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    pert.z = Eigen::VectorXd::Constant(p, 1.0 / std::sqrt(static_cast<double>(p)));
    s.perturbation = std::move(pert);
    return s;
}

Eigen::MatrixXd MatrixSample::model_matrix() const {
    Eigen::MatrixXd m = raw;
    if (spec.perturbation) m.noalias() += spec.perturbation->eta * spec.perturbation->w * spec.perturbation->z.transpose();
    if (spec.scale != 1.0) m *= spec.scale;
    return m;
}

Eigen::MatrixXd sample_raw(const EnsembleSpec& spec) {
    spec.validate();
    const Eigen::Index n = spec.n, p = spec.p;
    switch (spec.preset) {
    case MatrixPreset::Identity: return Eigen::MatrixXd::Identity(n, p);
    case MatrixPreset::DiagonalLadder: {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, p);
        const double s = 1.0 / std::sqrt(static_cast<double>(n));
        for (Eigen::Index k = 0; k < p; ++k) m(k, k) = static_cast<double>(p - k) * s;
        return m;
    }
    case MatrixPreset::Random: break;
    }
    Eigen::MatrixXd m(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto entry = static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(p) +
                               static_cast<std::uint64_t>(j);
            SplitMix64 rng(derive_key(spec.seed, entry));
            m(i, j) = spec.atom.sample(rng);
        }
    }
    return m;
}

MatrixSample sample_matrix(const EnsembleSpec& spec) {
    MatrixSample s;
    s.spec = spec;
    s.raw = sample_raw(spec);
    Eigen::MatrixXd model = s.model_matrix();
    switch (spec.covariance.kind()) {
    case CovarianceSpec::Kind::Identity: s.effective = std::move(model); break;
    case CovarianceSpec::Kind::Diagonal:
        s.effective = spec.covariance.diagonal_entries().cwiseSqrt().asDiagonal() * model;
        break;
    case CovarianceSpec::Kind::FullSPD:
        s.effective = covariance_sqrt(spec.covariance, spec.n) * model;
        break;
    }
    return s;
}

// Serialization --------------------------------------------------------------

namespace {

nlohmann::json vector_json(const Eigen::VectorXd& v) {
    return nlohmann::json(std::vector<double>(v.begin(), v.end()));
}

Eigen::VectorXd vector_from(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const AtomDistribution& atom) {
    nlohmann::json j{{"kind", atom.name()}};
    if (atom.kind() == AtomDistribution::Kind::Custom) {
        auto arr = nlohmann::json::array();
        for (const auto& [v, pr] : atom.support()) arr.push_back({v, pr});
        j["support"] = std::move(arr);
    }
    return j;
}

AtomDistribution atom_from_json(const nlohmann::json& j) {
    const std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
    if (kind == "rademacher") return AtomDistribution::rademacher();
    if (kind == "gaussian") return AtomDistribution::gaussian();
    if (kind == "uniform") return AtomDistribution::uniform_sym();
    if (kind == "bernoulli") return AtomDistribution::shifted_bernoulli();
    if (kind == "custom") {
        std::vector<std::pair<double, double>> support;
        for (const auto& e : j.at("support")) support.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
        return AtomDistribution::custom(std::move(support));
    }
    throw SpecError("unknown atom kind '" + kind + "'");
}

nlohmann::json to_json(const CovarianceSpec& cov) {
    nlohmann::json j;
    switch (cov.kind()) {
    case CovarianceSpec::Kind::Identity: j["kind"] = "identity"; break;
    case CovarianceSpec::Kind::Diagonal:
        j["kind"] = "diagonal";
        j["values"] = vector_json(cov.diagonal_entries());
        break;
    case CovarianceSpec::Kind::FullSPD: {
        j["kind"] = "full";
        auto rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < cov.full_matrix().rows(); ++r)
            rows.push_back(vector_json(cov.full_matrix().row(r).transpose()));
        j["matrix"] = std::move(rows);
        break;
    }
    }
    j["L"] = cov.bound();
    return j;
}

CovarianceSpec covariance_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const double L = j.value("L", 1.0);
    if (kind == "identity") return CovarianceSpec::identity(L);
    if (kind == "diagonal") return CovarianceSpec::diagonal(vector_from(j.at("values")), L);
    if (kind == "full") {
        const auto& rows = j.at("matrix");
        const auto n = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd m(n, n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto row = rows.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
            if (static_cast<Eigen::Index>(row.size()) != n) throw SpecError("full covariance: ragged matrix");
            for (Eigen::Index c = 0; c < n; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
        }
        return CovarianceSpec::full(std::move(m), L);
    }
    throw SpecError("unknown covariance kind '" + kind + "'");
}

namespace {

const char* preset_name(MatrixPreset p) {
    switch (p) {
    case MatrixPreset::Random: return "random";
    case MatrixPreset::Identity: return "identity";
    case MatrixPreset::DiagonalLadder: return "ladder";
    }
    return "random";
}

MatrixPreset preset_from(const std::string& s) {
    if (s == "random") return MatrixPreset::Random;
    if (s == "identity") return MatrixPreset::Identity;
    if (s == "ladder") return MatrixPreset::DiagonalLadder;
    throw SpecError("unknown preset '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const EnsembleSpec& spec) {
    nlohmann::json j{{"n", spec.n},
                     {"p", spec.p},
                     {"atom", to_json(spec.atom)},
                     {"sigma", to_json(spec.covariance)},
                     {"seed", spec.seed},
                     {"preset", preset_name(spec.preset)},
                     {"scale", spec.scale}};
    if (spec.perturbation) {
        j["perturbation"] = {{"eta", spec.perturbation->eta},
                             {"w", vector_json(spec.perturbation->w)},
                             {"z", vector_json(spec.perturbation->z)}};
    } else {
        j["perturbation"] = nullptr;
    }
    return j;
}

EnsembleSpec ensemble_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known{"n", "p", "atom", "sigma", "perturbation", "seed", "preset", "scale"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw SpecError("ensemble config: unknown key '" + key + "'");
    }
    EnsembleSpec s;
    s.n = j.at("n").get<Eigen::Index>();
    s.p = j.at("p").get<Eigen::Index>();
    if (j.contains("atom")) s.atom = atom_from_json(j.at("atom"));
    if (j.contains("sigma")) s.covariance = covariance_from_json(j.at("sigma"));
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("preset")) s.preset = preset_from(j.at("preset").get<std::string>());
    if (j.contains("scale")) s.scale = j.at("scale").get<double>();
    if (j.contains("perturbation") && !j.at("perturbation").is_null()) {
        const auto& pj = j.at("perturbation");
        RankOnePerturbation pert;
        pert.eta = pj.at("eta").get<double>();
        pert.w = vector_from(pj.at("w"));
        pert.z = vector_from(pj.at("z"));
        s.perturbation = std::move(pert);
    }
    s.validate();
    return s;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    os << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) os << ' ';
            os << format_double(m(i, j));
        }
        os << '\n';
    }
}

Eigen::MatrixXd read_matrix(std::istream& is) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(is, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };
    if (!next_line()) throw ParseError(1, "missing 'n p' header");
    long long n = 0, p = 0;
    {
        std::istringstream hs(line);
        std::string extra;
        if (!(hs >> n >> p) || (hs >> extra)) throw ParseError(line_no, "expected 'n p' header");
        if (n < 1 || p < 1) throw ParseError(line_no, "dimensions must be positive");
    }
    Eigen::MatrixXd m(n, p);
    for (long long i = 0; i < n; ++i) {
        if (!next_line()) throw ParseError(line_no + 1, "expected " + std::to_string(n) + " rows");
        std::istringstream rs(line);
        for (long long j = 0; j < p; ++j) {
            std::string tok;
            if (!(rs >> tok)) throw ParseError(line_no, "expected " + std::to_string(p) + " values");
            try {
                std::size_t used = 0;
                m(i, j) = std::stod(tok, &used);
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ParseError(line_no, "bad number '" + tok + "'");
            }
        }
        std::string extra;
        if (rs >> extra) throw ParseError(line_no, "too many values");
    }
    if (next_line()) throw ParseError(line_no, "trailing data after matrix");
    return m;
}

}  // namespace svgap
