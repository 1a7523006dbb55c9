#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fracperm/bounds.hpp"
#include "fracperm/ensembles.hpp"
#include "fracperm/errors.hpp"
#include "fracperm/exact.hpp"
#include "fracperm/gamma_star.hpp"
#include "fracperm/matching.hpp"
#include "fracperm/pruning.hpp"
#include "fracperm/ryser.hpp"
#include "fracperm/variational.hpp"
#include "fracperm/zdd.hpp"

namespace py = pybind11;
using namespace fracperm;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

WeightMatrix from_array(const Array& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw Error(ErrorCode::dimension_mismatch, "expected a square matrix");
    const int n = static_cast<int>(a.shape(0));
    return WeightMatrix::from_dense(n, std::span<const double>(a.data(), static_cast<std::size_t>(n) * n));
}

py::array_t<double> to_array(int n, const std::vector<double>& dense) {
    py::array_t<double> out({n, n});
    std::copy(dense.begin(), dense.end(), out.mutable_data());
    return out;
}

SolverConfig solver_config(double gamma, double damping, double tol, int max_iter, const std::string& init, bool polish) {
    SolverConfig c;
    c.gamma = gamma;
    c.damping = damping;
    c.tol = tol;
    c.max_iter = max_iter;
    c.init = parse_init_kind(init);
    c.polish = polish;
    return c;
}

py::dict solve_dict(const SolveResult& r) {
    py::dict d;
    d["gamma"] = r.gamma;
    d["status"] = to_string(r.status);
    d["free_energy"] = r.free_energy;
    d["log_z"] = r.z.log();
    d["residual"] = r.residual;
    d["iterations"] = r.iterations;
    d["method"] = r.method;
    d["degenerate"] = r.degenerate;
    d["beliefs"] = to_array(r.beliefs.n(), r.beliefs.dense());
    return d;
}

}  // namespace

PYBIND11_MODULE(_fracperm, m) {
    m.doc() = "Exact and variational permanents of non-negative matrices";

    py::register_exception<Error>(m, "FracpermError", PyExc_ValueError);

    m.def(
        "permanent",
        [](const Array& a, const std::string& method) {
            return exact_permanent(from_array(a), parse_exact_method(method)).to_double();
        },
        py::arg("p"), py::arg("method") = "auto");
    m.def(
        "log_permanent",
        [](const Array& a, const std::string& method) {
            return exact_permanent(from_array(a), parse_exact_method(method)).log();
        },
        py::arg("p"), py::arg("method") = "auto");
    m.def(
        "engine_costs",
        [](const Array& a) {
            const WeightMatrix p = from_array(a);
            CostCounter rc, zc;
            ryser_permanent(p, &rc);
            zdd_permanent(p, &zc);
            return py::make_tuple(rc.total(), zc.total());
        },
        py::arg("p"), "Memory-access counts of Ryser and of the ZDD engine.");

    m.def(
        "solve",
        [](const Array& a, double gamma, double damping, double tol, int max_iter, const std::string& init, bool polish) {
            return solve_dict(solve_fractional(from_array(a), solver_config(gamma, damping, tol, max_iter, init, polish)));
        },
        py::arg("p"), py::arg("gamma") = -1.0, py::arg("damping") = 0.45, py::arg("tol") = 1e-10,
        py::arg("max_iter") = 100000, py::arg("init") = "mf", py::arg("polish") = true);
    m.def(
        "free_energy",
        [](const Array& beta, const Array& a, double gamma) {
            const WeightMatrix p = from_array(a);
            const WeightMatrix b = from_array(beta);
            Beliefs bel{p.pattern_ptr(), std::vector<double>(p.nnz()), {}, {}};
            for (const Entry& e : b.entries()) {
                const auto k = p.pattern().find(e.row, e.col);
                if (k < 0) throw Error(ErrorCode::support_violation, "beliefs outside the support of p");
                bel.beta[static_cast<std::size_t>(k)] = e.value;
            }
            return free_energy(bel, p, gamma);
        },
        py::arg("beta"), py::arg("p"), py::arg("gamma"));
    m.def(
        "sinkhorn",
        [](const Array& a, double tol) {
            const SinkhornResult s = sinkhorn_balance(from_array(a), tol);
            return to_array(s.beliefs.n(), s.beliefs.dense());
        },
        py::arg("p"), py::arg("tol") = 1e-12);

    m.def(
        "bounds",
        [](const Array& a, std::vector<double> gammas, bool with_exact) {
            const WeightMatrix p = from_array(a);
            BoundsConfig cfg;
            cfg.gammas = std::move(gammas);
            BoundReport rep = evaluate_bounds(p, cfg);
            if (with_exact) compare_with_exact(rep, exact_permanent(p));
            py::list out;
            for (const auto& e : rep.entries) {
                py::dict d;
                d["name"] = e.name;
                d["kind"] = to_string(e.kind);
                d["gamma"] = e.gamma;
                d["color"] = e.color;
                d["valid"] = e.valid;
                d["log_value"] = e.valid ? py::cast(e.value.log()) : py::none();
                d["holds"] = e.holds ? py::cast(*e.holds) : py::none();
                d["reason"] = e.reason;
                out.append(d);
            }
            return out;
        },
        py::arg("p"), py::arg("gammas") = std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0}, py::arg("with_exact") = false);

    m.def(
        "gamma_star",
        [](const Array& a, double tol_gamma, const std::string& method) {
            const WeightMatrix p = from_array(a);
            GammaStarConfig cfg;
            cfg.tol_gamma = tol_gamma;
            const GammaStarResult g = find_gamma_star(p, exact_permanent(p, parse_exact_method(method)), cfg);
            py::dict d;
            d["gamma_star"] = g.gamma_star;
            d["status"] = to_string(g.status);
            d["bracket"] = py::make_tuple(g.lo, g.hi);
            d["residual"] = g.g_mid;
            d["slope"] = g.slope;
            d["boundary_at_minus_one"] = g.boundary_at_minus_one;
            return d;
        },
        py::arg("p"), py::arg("tol_gamma") = 1e-4, py::arg("method") = "auto");

    m.def(
        "generate",
        [](const std::string& kind, int n, std::uint64_t seed, double rho, double delta, double w, double T) {
            EnsembleSpec spec;
            spec.kind = parse_ensemble_kind(kind);
            spec.rho = rho;
            spec.delta = delta;
            spec.w = w;
            spec.T = T;
            return to_array(n, generate(spec, n, seed).dense());
        },
        py::arg("kind"), py::arg("n"), py::arg("seed") = 1, py::arg("rho") = 1.0, py::arg("delta") = 1.0,
        py::arg("w") = 2.0, py::arg("T") = 1.0);
    m.def("pdet_exact", [](int n, double w, double T) { return pdet_exact(n, w, T).to_double(); }, py::arg("n"),
          py::arg("w"), py::arg("T"));

    m.def(
        "prune",
        [](const Array& a, double keep, double ratio) {
            const WeightMatrix p = from_array(a);
            const WeightMatrix q = ratio > 0.0 ? prune_threshold(p, ratio) : prune_fraction(p, keep);
            return to_array(q.n(), q.dense());
        },
        py::arg("p"), py::arg("keep") = 1.0, py::arg("ratio") = 0.0);
    m.def(
        "max_weight_matching",
        [](const Array& a) { return max_weight_matching(from_array(a)).perm; }, py::arg("p"));
}
