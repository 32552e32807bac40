#pragma once

// Seeded Monte-Carlo campaigns over the ensemble. Trials run on a small thread
// pool; every trial derives its own seed from (master seed, trial index) and
// results are folded in trial order, so output never depends on the worker
// count.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "svgap/ensemble.hpp"
#include "svgap/spectral.hpp"
#include "svgap/vecstruct.hpp"

namespace svgap {

std::string library_version();

struct ExperimentConfig {
    EnsembleSpec ensemble;  // ensemble.seed is the master seed
    std::size_t trials = 1;
    double K = 3.0;
    StructureParams structure;
    std::vector<double> delta_grid;
    std::vector<Eigen::Index> n_list;
    double simple_tol = -1.0;  // < 0: default_simple_tolerance
    double rank_tol = -1.0;    // < 0: default_rank_tolerance
    /// 1-based index for the fixed-index gap curve; 0 selects floor(p/2).
    std::size_t gap_index = 0;
    /// Exponent slack in the delta_min violation threshold n^{-3/2 - slack}.
    double deltamin_slack = 0.1;
    bool keep_vectors = false;
    bool survey = false;
    /// 1-based singular indices to survey; empty means all.
    std::vector<std::size_t> survey_indices;
    bool survey_rlcd = false;
    bool diagnostic = false;
    /// 1-based indices for the decomposition diagnostic; empty means all.
    std::vector<std::size_t> diagnostic_indices;
    /// Not part of the result; excluded from the config hash.
    unsigned workers = 1;

    std::size_t fixed_gap_index() const;
    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const nlohmann::json& j);

/// FNV-1a 64 of the canonical JSON (workers excluded), as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct DiagnosticResult {
    std::size_t index = 0;  // 1-based
    double lhs = 0.0;       // |w_hat^T X|
    double rhs = 0.0;       // L delta_implied n^{-1/2} / |b|
    double b = 0.0;         // last coordinate of the right singular vector u_i
    double delta_implied = 0.0;
    double rounding = 0.0;  // allowance for cancellation in sigma^2 - sigma'^2
    bool conclusive = false;
    bool holds = true;
};

/// Splits the model matrix as (M' | X), takes the i-th singular pairs of
/// A = Sigma^{1/2} M and A' = Sigma^{1/2} M', and evaluates both sides of
/// |w_hat^T X| <= L |delta n^{-1/2} / b|. L <= 0 takes the covariance bound.
/// The check allows 1e-8 relative slack plus the rounding allowance.
DiagnosticResult decomposition_diagnostic(const MatrixSample& sample, std::size_t i, double L = -1.0);

struct SurveyEntry {
    std::size_t index = 0;  // 1-based
    bool u_compressible = false;
    bool w_compressible = false;
    double u_sparse_dist = 0.0;
    double w_sparse_dist = 0.0;
    Eigen::Index large_count = 0;
    bool large_ok = false;
    std::optional<RlcdResult> u_rlcd;
    std::optional<RlcdResult> w_rlcd;
};

/// Survey of right vectors u_i and of w_i = S v_i / ||S v_i||.
std::vector<SurveyEntry> survey_vectors(const SpectralDecomposition& d, const Eigen::MatrixXd& sigma_sqrt,
                                        const StructureParams& params, const std::vector<std::size_t>& indices,
                                        bool with_rlcd, std::uint64_t seed);

struct TrialRecord {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    EventFlags flags;
    GapReport gaps;
    Eigen::VectorXd values;
    InterlacingCheck interlacing;
    std::vector<char> fixed_events;  // per delta at the fixed index
    std::vector<char> worst_events;  // per delta, any index
    std::vector<SurveyEntry> survey;
    std::vector<DiagnosticResult> diagnostics;
    std::optional<SpectralDecomposition> decomposition;
};

TrialRecord run_trial(const ExperimentConfig& cfg, std::size_t trial);

/// All trials in index order. Failing trials are recorded with ok = false.
std::vector<TrialRecord> run_trials(const ExperimentConfig& cfg);

struct Proportion {
    double rate = 0.0;
    double ci95 = 0.0;  // normal-approximation half-width
    std::size_t hits = 0;
    std::size_t total = 0;

    /// Interval ends clipped to [0,1].
    double lo() const { return rate - ci95 < 0.0 ? 0.0 : rate - ci95; }
    double hi() const { return rate + ci95 > 1.0 ? 1.0 : rate + ci95; }
};

Proportion proportion(std::size_t hits, std::size_t total);

enum class IndexSelector { Fixed, Worst };

struct CurvePoint {
    double delta = 0.0;
    Proportion p;
};

/// P_hat(delta) = fraction of usable trials with the gap event and E_K.
/// Throws SpecError when no usable record exists.
std::vector<CurvePoint> gap_probability_curve(const std::vector<TrialRecord>& records, IndexSelector sel,
                                              const std::vector<double>& delta_grid);

struct LinearShapeCheck {
    bool monotone = false;
    double max_ratio = 0.0;
    double min_ratio = 0.0;
    double slack = 0.0;  // 2 ci95(delta*) / delta* at the argmax delta*
    bool passes = false;
};

/// max P/delta <= 3 min P/delta + 2 ci95(delta*) / delta*, together with
/// monotonicity of P in delta.
LinearShapeCheck linear_shape_check(const std::vector<CurvePoint>& curve);

/// Fraction of usable trials with a simple spectrum; tol < 0 is the default.
Proportion simple_spectrum_rate(const std::vector<TrialRecord>& records, double tol = -1.0);

struct FailureSummary {
    std::size_t failed = 0;
    std::vector<std::string> messages;  // first few
};

FailureSummary failures(const std::vector<TrialRecord>& records);

/// Every usable record satisfies interlacing.
bool interlacing_holds(const std::vector<TrialRecord>& records, std::size_t* violations = nullptr);

struct DeltaMinRow {
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    std::size_t trials = 0;
    std::size_t failed = 0;
    double median = 0.0;
    double q10 = 0.0;
    double q90 = 0.0;
    double threshold = 0.0;  // n^{-3/2 - slack}
    double violation_fraction = 0.0;
    bool interlacing = true;
};

struct DeltaMinScaling {
    std::vector<DeltaMinRow> rows;
    double slope = 0.0;  // least squares of log median vs log n
    double intercept = 0.0;
    std::vector<std::vector<TrialRecord>> records;  // per n, for rates and interlacing
};

/// Runs cfg once per n in n_list. The template's p/n ratio is preserved
/// (p = n when the template is square). Requires >= 3 sizes and >= 100 trials.
DeltaMinScaling deltamin_scaling(const ExperimentConfig& cfg);

/// Linear-interpolated quantile (type 7) of unsorted data.
double quantile(std::vector<double> v, double q);

struct LeastSquares {
    double slope = 0.0;
    double intercept = 0.0;
};
LeastSquares fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct Window {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> values;
    std::size_t count() const { return values.size(); }
};

struct FigureResult {
    Eigen::Index n = 0;
    std::vector<Window> windows;  // hard_edge, bulk, soft_edge
    std::size_t above_edge = 0;   // squared values above 4n
    double sigma1_sq = 0.0;
};

/// Squared singular values counted in [0.04n, 0.056n], [2n, 2.016n] and
/// [3.6n, 3.616n]; at n = 2500 these are [100,140], [5000,5040], [9000,9040].
FigureResult figure_windows(const Eigen::VectorXd& values, Eigen::Index n);

/// One sample at n = p with Sigma = I from cfg.ensemble (seed = master seed).
FigureResult figure_reproduction(const ExperimentConfig& cfg);

/// Rug data: "window\tvalue" header, one row per squared value.
void write_figure_tsv(std::ostream& os, const FigureResult& fig);
void write_figure_svg(std::ostream& os, const FigureResult& fig);

struct SurveySummary {
    std::size_t vectors = 0;
    Proportion u_incompressible;
    Proportion w_incompressible;
    Proportion large_count_ok;
    double large_threshold = 0.0;  // c0 c1^2 p / 2
    double B = 0.0;                // (c1 / sqrt 2) p^{-1/2}
};

SurveySummary structure_survey(const std::vector<TrialRecord>& records, const ExperimentConfig& cfg);

struct DiagnosticSummary {
    std::size_t evaluated = 0;
    std::size_t conclusive = 0;
    std::size_t violations = 0;
    double worst_ratio = 0.0;  // max lhs / allowed bound over conclusive cases
};

DiagnosticSummary diagnostic_summary(const std::vector<TrialRecord>& records);

// Result files ----------------------------------------------------------------

/// experiment.csv: one row per trial.
void write_experiment_csv(std::ostream& os, const ExperimentConfig& cfg, const std::vector<TrialRecord>& records);
/// curve.csv: selector,delta,p_hat,ci95,hits,trials
void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& fixed, const std::vector<CurvePoint>& worst);
/// deltamin.csv: one row per n.
void write_deltamin_csv(std::ostream& os, const DeltaMinScaling& s);
/// survey.csv: one row per surveyed vector.
void write_survey_csv(std::ostream& os, const std::vector<TrialRecord>& records);

/// Provenance block: the config with its hash, plus the library version.
nlohmann::json provenance(const ExperimentConfig& cfg);

nlohmann::json summary_json(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records);

/// Writes experiment.csv, curve.csv (when a delta grid is set), survey.csv
/// (when surveyed) and summary.json into dir.
void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                       const std::vector<TrialRecord>& records);

void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace svgap

#include "svgap/detail/parallel.hpp"
