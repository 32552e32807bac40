// Thin pybind11 layer. Structured inputs and outputs cross the boundary as JSON
// text; the pure-Python package turns them into dicts.

#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "svgap/bipartite_gi.hpp"
#include "svgap/cli.hpp"
#include "svgap/ensemble.hpp"
#include "svgap/error.hpp"
#include "svgap/montecarlo.hpp"
#include "svgap/spectral.hpp"
#include "svgap/vecstruct.hpp"

namespace py = pybind11;
using namespace svgap;

namespace {

py::dict gi_dict(const GiResult& r) {
    static const char* verdicts[] = {"isomorphic", "not_isomorphic", "indeterminate"};
    py::dict d;
    d["verdict"] = verdicts[static_cast<int>(r.verdict)];
    d["description"] = r.describe();
    d["index"] = r.index;
    d["difference"] = r.difference;
    d["left_map"] = r.left_map;
    d["right_map"] = r.right_map;
    return d;
}

StructureParams params(double c0, double c1, double gamma, double kappa, double alpha) {
    StructureParams p;
    p.c0 = c0;
    p.c1 = c1;
    p.gamma = gamma;
    p.kappa = kappa;
    p.alpha = alpha;
    p.validate();
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "svgap native core";
    py::register_exception<SpecError>(m, "SpecError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def("version", &library_version);

    m.def(
        "sample_matrix",
        [](const std::string& spec_json) {
            const auto s = sample_matrix(ensemble_from_json(nlohmann::json::parse(spec_json)));
            return py::make_tuple(s.raw, s.effective);
        },
        py::arg("spec_json"), "(raw M, effective matrix) for an ensemble given as JSON");

    m.def("singular_values", &singular_values, py::arg("a"));
    m.def(
        "svd",
        [](const Eigen::MatrixXd& a) {
            const auto d = svd(a, true);
            return py::make_tuple(d.values, d.left_vectors, d.right_vectors);
        },
        py::arg("a"), "(values, left vectors n x p, right vectors p x p)");
    m.def(
        "gap_report",
        [](const Eigen::VectorXd& values, double tol) {
            const auto g = gap_report(values, tol);
            py::dict d;
            d["gaps"] = g.gaps;
            d["squared_gaps"] = g.squared_gaps;
            d["delta_min"] = g.delta_min;
            d["argmin"] = g.argmin;
            d["simple"] = g.simple;
            d["tolerance"] = g.tolerance;
            return d;
        },
        py::arg("values"), py::arg("tol") = -1.0);
    m.def(
        "interlacing",
        [](const Eigen::MatrixXd& a) {
            const auto c = check_interlacing(a);
            return py::make_tuple(c.holds, c.max_violation, c.slack);
        },
        py::arg("a"));

    m.def("sparse_distance", &sparse_distance, py::arg("x"), py::arg("k"));
    m.def(
        "is_compressible",
        [](const Eigen::VectorXd& x, double c0, double c1) { return is_compressible(x, params(c0, c1, 0.5, 1.0, 0.0)); },
        py::arg("x"), py::arg("c0") = 0.1, py::arg("c1") = 0.5);
    m.def(
        "lcd",
        [](const Eigen::VectorXd& x, double gamma, double kappa, double theta_max, double resolution) {
            LcdOptions o;
            o.theta_max = theta_max;
            o.resolution = resolution;
            const auto r = lcd(x, params(0.1, 0.5, gamma, kappa, 0.0), o);
            return py::make_tuple(r.value, r.at_least);
        },
        py::arg("x"), py::arg("gamma") = 0.5, py::arg("kappa") = 1.0, py::arg("theta_max") = 0.0,
        py::arg("resolution") = 1e-4, "(value, at_least)");
    m.def(
        "regularized_lcd",
        [](const Eigen::VectorXd& x, double c0, double c1, double gamma, double kappa, double alpha,
           std::size_t samples, bool sampled, std::uint64_t seed) {
            RlcdOptions o;
            o.samples = samples;
            o.force_sampled = sampled;
            o.seed = seed;
            const auto r = regularized_lcd(x, params(c0, c1, gamma, kappa, alpha), o);
            return py::make_tuple(r.value, r.at_least, r.mode == RlcdResult::Mode::Sampled, r.subsets_evaluated);
        },
        py::arg("x"), py::arg("c0") = 0.1, py::arg("c1") = 0.5, py::arg("gamma") = 0.5, py::arg("kappa") = 1.0,
        py::arg("alpha") = 0.0, py::arg("samples") = 200, py::arg("sampled") = false, py::arg("seed") = 0,
        "(value, at_least, sampled, subsets evaluated)");
    m.def(
        "small_ball",
        [](const std::string& atom_json, double eps, std::size_t samples, std::uint64_t seed,
           std::optional<Eigen::VectorXd> x) {
            const auto atom = atom_from_json(nlohmann::json::parse(atom_json));
            const auto e = x ? small_ball_dot(*x, atom, eps, samples, seed)
                             : levy_concentration(atom, eps, samples, seed);
            return py::make_tuple(e.estimate, e.ci95);
        },
        py::arg("atom_json"), py::arg("eps"), py::arg("samples"), py::arg("seed"), py::arg("x") = py::none(),
        "(estimate, ci95) of sup_a P{|X - a| <= eps}");

    m.def(
        "run_experiment",
        [](const std::string& config_json) {
            const auto cfg = experiment_from_json(nlohmann::json::parse(config_json));
            py::gil_scoped_release release;
            const auto records = run_trials(cfg);
            return summary_json(cfg, records).dump();
        },
        py::arg("config_json"), "summary JSON of a Monte-Carlo campaign");

    m.def(
        "spectral_match",
        [](const std::string& a, const std::string& b, double tol) {
            SpectralMatchOptions o;
            o.tol = tol;
            return gi_dict(spectral_match(parse_graph(a), parse_graph(b), o));
        },
        py::arg("a"), py::arg("b"), py::arg("tol") = 1e-8, "graphs in the text format");
    m.def(
        "brute_force_gi", [](const std::string& a, const std::string& b) {
            return gi_dict(brute_force_gi(parse_graph(a), parse_graph(b)));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "(exit code, stdout, stderr)");
}
