#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>

#include "fracperm/bounds.hpp"
#include "fracperm/ensembles.hpp"
#include "fracperm/errors.hpp"
#include "fracperm/exact.hpp"
#include "fracperm/experiments.hpp"
#include "fracperm/gamma_star.hpp"
#include "fracperm/io.hpp"
#include "fracperm/variational.hpp"
#include "fracperm/zdd.hpp"

using namespace fracperm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInvariant = 2;
constexpr int kExitNonConvergence = 3;

// Options shared by several subcommands.
struct Common {
    std::uint64_t seed = 1;
    std::string out;
    int threads = 1;
    std::string exact_method = "auto";
    double prune_keep = 1.0;
    double prune_ratio = 0.0;
    std::string format = "dense";

    PruneSpec prune() const { return {prune_keep, prune_ratio}; }
    ExactMethod exact() const { return parse_exact_method(exact_method); }
};

struct EnsembleOpts {
    std::string kind = "uniform";
    EnsembleSpec spec;

    EnsembleSpec resolve() {
        spec.kind = parse_ensemble_kind(kind);
        spec.flow_out.dt = spec.flow_in.dt;
        return spec;
    }
};

struct SolverOpts {
    double gamma = -1.0;
    double damping = 0.45;
    double tol = 1e-10;
    int max_iter = 100000;
    std::string init = "mf";
    bool no_polish = false;

    SolverConfig config() const {
        SolverConfig c;
        c.gamma = gamma;
        c.damping = damping;
        c.tol = tol;
        c.max_iter = max_iter;
        c.init = parse_init_kind(init);
        c.polish = !no_polish;
        return c;
    }
};

struct RangeOpts {
    int n_min = 4;
    int n_max = 10;
    int n_step = 1;
    int instances = 10;
};

// Writes to --out when given, stdout otherwise.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (path.empty() || path == "-") return;
        file_ = std::make_unique<std::ofstream>(path);
        if (!*file_) throw Error(ErrorCode::invalid_argument, "cannot open " + path);
    }
    std::ostream& get() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

void add_common(CLI::App* app, Common& c, bool exact, bool prune) {
    app->add_option("--seed", c.seed, "Master seed");
    app->add_option("-o,--out", c.out, "Output file (stdout if omitted)");
    app->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
    if (exact)
        app->add_option("--exact-method", c.exact_method, "auto, brute, ryser or zdd")
            ->check(CLI::IsMember({"auto", "brute", "ryser", "zdd"}));
    if (prune) {
        app->add_option("--prune-keep", c.prune_keep, "Keep this fraction of entries")->check(CLI::Range(0.0, 1.0));
        app->add_option("--prune-ratio", c.prune_ratio, "Keep entries scoring at least this ratio")
            ->check(CLI::Range(0.0, 1.0));
    }
}

void add_format(CLI::App* app, Common& c) {
    app->add_option("--format", c.format, "Matrix file format: dense or sparse")
        ->check(CLI::IsMember({"dense", "sparse", "dense-text", "sparse-triplet"}));
}

void add_ensemble(CLI::App* app, EnsembleOpts& e) {
    app->add_option("--kind", e.kind, "flow, uniform, exp, shifted or pdet");
    app->add_option("--rho", e.spec.rho, "Uniform range / shifted noise");
    app->add_option("--delta", e.spec.delta, "Exponential mean");
    app->add_option("--w", e.spec.w, "pdet diagonal weight");
    app->add_option("--T", e.spec.T, "pdet temperature");
    app->add_option("--a-in", e.spec.flow_in.a);
    app->add_option("--b-in", e.spec.flow_in.b);
    app->add_option("--c-in", e.spec.flow_in.c);
    app->add_option("--kappa-in", e.spec.flow_in.kappa);
    app->add_option("--a-out", e.spec.flow_out.a);
    app->add_option("--b-out", e.spec.flow_out.b);
    app->add_option("--c-out", e.spec.flow_out.c);
    app->add_option("--kappa-out", e.spec.flow_out.kappa);
    app->add_option("--dt", e.spec.flow_in.dt, "Flow time step (both flows)");
}

void add_solver(CLI::App* app, SolverOpts& s, bool gamma) {
    if (gamma) app->add_option("--gamma", s.gamma, "Entropy coefficient in [-1, 1]")->check(CLI::Range(-1.0, 1.0));
    app->add_option("--damping", s.damping, "Damping in (0, 1)");
    app->add_option("--tol", s.tol, "Fixed point tolerance");
    app->add_option("--max-iter", s.max_iter, "Iteration cap");
    app->add_option("--init", s.init, "mf, uniform or corner");
    app->add_flag("--no-polish", s.no_polish, "Plain fixed point iteration only");
}

void add_range(CLI::App* app, RangeOpts& r, int n_min, int n_max, int instances) {
    r.n_min = n_min;
    r.n_max = n_max;
    r.instances = instances;
    app->add_option("--n-min", r.n_min, "Smallest matrix size");
    app->add_option("--n-max", r.n_max, "Largest matrix size");
    app->add_option("--n-step", r.n_step, "Size step");
    app->add_option("--instances", r.instances, "Instances per size");
}

BatchSpec batch_of(const Common& c, EnsembleOpts& e, const RangeOpts& r) {
    BatchSpec b;
    b.ensemble = e.resolve();
    b.n_min = r.n_min;
    b.n_max = r.n_max;
    b.n_step = r.n_step;
    b.instances = r.instances;
    b.seed = c.seed;
    b.threads = c.threads;
    b.exact = c.exact();
    b.prune = c.prune();
    return b;
}

WeightMatrix load(const std::string& path, const Common& c) {
    WeightMatrix p = [&] {
        if (path == "-") return read_matrix(std::cin, parse_matrix_format(c.format));
        return load_matrix(path, parse_matrix_format(c.format));
    }();
    return apply_pruning(p, c.prune());
}

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------- subcommands

int cmd_gen(const Common& c, EnsembleOpts& e, int n) {
    const WeightMatrix p = apply_pruning(generate(e.resolve(), n, c.seed), c.prune());
    Sink sink(c.out);
    write_matrix(sink.get(), p, parse_matrix_format(c.format));
    return kExitOk;
}

int cmd_exact(const Common& c, const std::string& file, bool cost, const std::string& dump) {
    const WeightMatrix p = load(file, c);
    ExactMethod m = c.exact();
    if (m == ExactMethod::automatic) m = auto_exact_method(p);
    CostCounter counter;
    const LogValue v = exact_permanent(p, m, &counter);
    Sink sink(c.out);
    std::ostream& out = sink.get();
    out << "n: " << p.n() << "\nnnz: " << p.nnz() << "\nmethod: " << to_string(m) << "\nlog_perm: " << fmt(v.log())
        << "\nperm: " << std::setprecision(17) << v.to_double() << '\n';
    if (cost) out << "cost_reads: " << counter.reads << "\ncost_writes: " << counter.writes << "\ncost_total: " << counter.total() << '\n';
    if (!dump.empty()) {
        const Zdd z = build_matching_zdd(p);
        std::ofstream f(dump);
        if (!f) throw Error(ErrorCode::invalid_argument, "cannot open " + dump);
        z.dump(f);
        out << "zdd_nodes: " << z.size() << '\n';
    }
    return kExitOk;
}

int cmd_approx(const Common& c, const SolverOpts& s, const std::string& file, bool beliefs) {
    const WeightMatrix p = load(file, c);
    const SolverConfig cfg = s.config();
    const SolveResult r = solve_fractional(p, cfg);
    Sink sink(c.out);
    std::ostream& out = sink.get();
    const double ds = r.beliefs.max_ds_deviation();
    out << "gamma: " << fmt(r.gamma) << "\nstatus: " << to_string(r.status) << "\nfree_energy: " << fmt(r.free_energy)
        << "\nlog_z: " << fmt(r.z.log()) << "\nresidual: " << fmt(r.residual) << "\nds_deviation: " << fmt(ds)
        << "\niterations: " << r.iterations << "\nmethod: " << r.method << "\ndegenerate: " << (r.degenerate ? "yes" : "no")
        << '\n';
    if (beliefs) {
        const std::vector<double> b = r.beliefs.dense();
        const int n = p.n();
        out << "beliefs:\n";
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) out << (j ? " " : "") << fmt(b[static_cast<std::size_t>(i) * n + j]);
            out << '\n';
        }
    }
    if (r.status == SolveStatus::non_converged) return kExitNonConvergence;
    if (ds > 1e-8 || r.residual > 1e-8) return kExitInvariant;
    return kExitOk;
}

int cmd_bounds(const Common& c, const SolverOpts& s, const std::string& file, const std::vector<double>& gammas,
               double diag, bool csv, bool with_exact) {
    const WeightMatrix p = load(file, c);
    BoundsConfig cfg;
    cfg.solver = s.config();
    if (!gammas.empty()) cfg.gammas = gammas;
    cfg.diagnostic_constant = diag;
    BoundReport rep = evaluate_bounds(p, cfg);
    LogValue exact;
    if (with_exact) {
        exact = exact_permanent(p, c.exact());
        compare_with_exact(rep, exact);
    }
    Sink sink(c.out);
    std::ostream& out = sink.get();
    if (csv) {
        out << "bound,color,kind,gamma,valid,log_value,holds,reason\n";
        for (const auto& e : rep.entries)
            out << e.name << ',' << e.color << ',' << to_string(e.kind) << ',' << fmt(e.gamma) << ',' << (e.valid ? 1 : 0)
                << ',' << (e.valid ? fmt(e.value.log()) : "") << ',' << (e.holds ? (*e.holds ? "yes" : "no") : "") << ','
                << e.reason << '\n';
    } else {
        if (with_exact) out << "log_perm: " << fmt(exact.log()) << '\n';
        out << std::left << std::setw(22) << "name" << std::setw(11) << "kind" << std::setw(7) << "gamma" << std::setw(26)
            << "log value" << std::setw(7) << "valid" << "holds\n";
        for (const auto& e : rep.entries) {
            out << std::left << std::setw(22) << e.name << std::setw(11) << to_string(e.kind) << std::setw(7) << fmt(e.gamma)
                << std::setw(26) << (e.valid ? fmt(e.value.log()) : "-") << std::setw(7) << (e.valid ? "yes" : "no")
                << (e.holds ? (*e.holds ? "yes" : "NO") : "-");
            if (!e.valid) out << "  (" << e.reason << ')';
            out << '\n';
        }
    }
    for (const auto& e : rep.entries)
        if (e.kind != BoundKind::conjecture && e.holds && !*e.holds) return kExitInvariant;
    return kExitOk;
}

int cmd_gamma_star(const Common& c, const SolverOpts& s, const std::string& file, double tol_gamma) {
    const WeightMatrix p = load(file, c);
    GammaStarConfig cfg;
    cfg.tol_gamma = tol_gamma;
    cfg.solver = s.config();
    const LogValue exact = exact_permanent(p, c.exact());
    const GammaStarResult g = find_gamma_star(p, exact, cfg);
    Sink sink(c.out);
    sink.get() << "gamma_star: " << fmt(g.gamma_star) << "\nstatus: " << to_string(g.status) << "\nbracket: [" << fmt(g.lo)
               << ", " << fmt(g.hi) << "]\ng_bracket: [" << fmt(g.g_lo) << ", " << fmt(g.g_hi) << "]\nresidual: "
               << fmt(g.g_mid) << "\nslope: " << fmt(g.slope) << "\nlog_perm: " << fmt(exact.log())
               << "\nboundary_at_minus_one: " << (g.boundary_at_minus_one ? "yes" : "no") << "\nsolves: " << g.solves
               << '\n';
    if (g.status == GammaStarStatus::failed) {
        sink.get() << "failed_gamma: " << fmt(g.failed_gamma) << '\n';
        return kExitNonConvergence;
    }
    return kExitOk;
}

int cmd_sweep(const Common& c, EnsembleOpts& e, const RangeOpts& r, const SolverOpts& s, const std::string& what,
              double tol_gamma, const std::vector<double>& gammas) {
    Sink sink(c.out);
    if (what == "bounds") {
        BoundsSweepConfig cfg;
        cfg.batch = batch_of(c, e, r);
        cfg.bounds.solver = s.config();
        if (!gammas.empty()) cfg.bounds.gammas = gammas;
        const BoundsSweepResult res = run_bounds_sweep(cfg);
        write_bounds_csv(sink.get(), cfg, res);
        if (res.violations > 0) {
            std::cerr << "bound violations: " << res.violations << '\n';
            return kExitInvariant;
        }
        return kExitOk;
    }
    GammaSweepConfig cfg;
    cfg.batch = batch_of(c, e, r);
    cfg.gamma.tol_gamma = tol_gamma;
    cfg.gamma.solver = s.config();
    const auto rows = run_gamma_star_sweep(cfg);
    write_gamma_star_csv(sink.get(), cfg, rows);
    int failed = 0;
    for (const auto& row : rows) failed += row.status == "failed" ? 1 : 0;
    if (failed > 0) {
        std::cerr << "gamma* searches that failed to converge: " << failed << '\n';
        return kExitNonConvergence;
    }
    return kExitOk;
}

int cmd_gurvits(const Common& c, const RangeOpts& r) {
    GurvitsConfig cfg;
    cfg.n_min = r.n_min;
    cfg.n_max = r.n_max;
    cfg.instances = r.instances;
    cfg.seed = c.seed;
    cfg.threads = c.threads;
    cfg.exact = c.exact();
    const auto rows = run_gurvits_experiment(cfg);
    Sink sink(c.out);
    write_gurvits_csv(sink.get(), cfg, rows);
    for (const auto& row : rows)
        if (row.violations > 0) return kExitInvariant;
    return kExitOk;
}

int cmd_cost(const Common& c, EnsembleOpts& e, int n, const std::vector<double>& sparsity, int instances,
             double budget_factor, std::size_t node_cap) {
    CostConfig cfg;
    cfg.n = n;
    if (!sparsity.empty()) cfg.sparsity = sparsity;
    cfg.instances = instances;
    cfg.seed = c.seed;
    cfg.threads = c.threads;
    cfg.ensemble = e.resolve();
    cfg.budget_factor = budget_factor;
    cfg.zdd_node_cap = node_cap;
    const auto rows = run_cost_comparison(cfg);
    Sink sink(c.out);
    write_cost_csv(sink.get(), cfg, rows);
    std::map<double, std::pair<std::vector<double>, std::vector<double>>> by;
    int mismatches = 0;
    for (const auto& row : rows) {
        by[row.sparsity].first.push_back(static_cast<double>(row.ryser_cost));
        by[row.sparsity].second.push_back(static_cast<double>(row.zdd_cost));
        if (!row.zdd_censored && row.relative_gap > 1e-9) ++mismatches;
    }
    for (const auto& [s, v] : by)
        std::cerr << "sparsity " << fmt(s) << ": median ryser " << fmt(median(v.first)) << ", median zdd "
                  << fmt(median(v.second)) << '\n';
    return mismatches > 0 ? kExitInvariant : kExitOk;
}

int cmd_verify(const Common& c, EnsembleOpts& e, const RangeOpts& r, const SolverOpts& s,
               const std::vector<double>& gammas, double threshold) {
    VerifyConfig cfg;
    cfg.batch = batch_of(c, e, r);
    if (!gammas.empty()) cfg.gammas = gammas;
    cfg.threshold = threshold;
    cfg.solver = s.config();
    const VerifyResult res = verify_identities(cfg);
    Sink sink(c.out);
    write_verify_csv(sink.get(), cfg, res);
    std::cerr << "checked " << res.checked << ", max relative gap " << fmt(res.max_gap) << ", non-converged "
              << res.non_converged << '\n';
    return res.ok ? kExitOk : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact and variational permanents of non-negative matrices"};
    app.require_subcommand(1);

    Common common;
    EnsembleOpts ens;
    SolverOpts solver;
    RangeOpts range;
    std::string file;
    int n = 6;
    bool cost = false, beliefs = false, csv = false, with_exact = false;
    std::string dump, what = "gamma-star";
    std::vector<double> gammas, sparsity;
    double diag = 0.01, tol_gamma = 1e-4, threshold = 1e-6, budget_factor = 4.0;
    int instances = 20, cost_n = 20;
    std::size_t node_cap = 20'000'000;

    auto* gen = app.add_subcommand("gen", "Generate a random or deterministic matrix");
    add_common(gen, common, false, true);
    add_format(gen, common);
    add_ensemble(gen, ens);
    gen->add_option("-n,--n", n, "Matrix size")->check(CLI::PositiveNumber);

    auto* exact = app.add_subcommand("exact", "Exact permanent");
    add_common(exact, common, true, true);
    add_format(exact, common);
    exact->add_option("file", file, "Matrix file, - for stdin")->required();
    exact->add_flag("--cost", cost, "Report memory-access counts");
    exact->add_option("--dump-zdd", dump, "Write the matching ZDD as text edges");

    auto* approx = app.add_subcommand("approx", "Fractional free energy minimization");
    add_common(approx, common, false, true);
    add_format(approx, common);
    add_solver(approx, solver, true);
    approx->add_option("file", file, "Matrix file, - for stdin")->required();
    approx->add_flag("--beliefs", beliefs, "Print the belief matrix");

    auto* bounds = app.add_subcommand("bounds", "Lower and upper bounds on the permanent");
    add_common(bounds, common, true, true);
    add_format(bounds, common);
    add_solver(bounds, solver, false);
    bounds->add_option("file", file, "Matrix file, - for stdin")->required();
    bounds->add_option("--gamma", gammas, "Gamma values for the fractional families (repeatable)");
    bounds->add_option("--diag-const", diag, "Constant of the diagnostic entry");
    bounds->add_flag("--csv", csv, "CSV output");
    bounds->add_flag("--exact", with_exact, "Compare every entry with the exact permanent");

    auto* gstar = app.add_subcommand("gamma-star", "Gamma at which the fractional estimate is exact");
    add_common(gstar, common, true, true);
    add_format(gstar, common);
    add_solver(gstar, solver, false);
    gstar->add_option("file", file, "Matrix file, - for stdin")->required();
    gstar->add_option("--tol-gamma", tol_gamma, "Bracket width");

    auto* sweep = app.add_subcommand("sweep", "Batch gamma* or bounds sweep to CSV");
    add_common(sweep, common, true, true);
    add_ensemble(sweep, ens);
    add_range(sweep, range, 4, 10, 10);
    add_solver(sweep, solver, false);
    sweep->add_option("--what", what, "gamma-star or bounds")->check(CLI::IsMember({"gamma-star", "bounds"}));
    sweep->add_option("--tol-gamma", tol_gamma, "Bracket width");
    sweep->add_option("--gamma", gammas, "Gamma values for the bounds sweep (repeatable)");

    auto* gurvits = app.add_subcommand("gurvits", "Ratios on Sinkhorn balanced uniform matrices");
    add_common(gurvits, common, true, false);
    add_range(gurvits, range, 4, 10, 100);

    auto* costc = app.add_subcommand("cost", "Ryser versus ZDD memory-access counts");
    add_common(costc, common, false, false);
    add_ensemble(costc, ens);
    costc->add_option("-n,--n", cost_n, "Matrix size")->check(CLI::PositiveNumber);
    costc->add_option("--sparsity", sparsity, "Fractions of entries pruned away (repeatable)");
    costc->add_option("--instances", instances, "Instances per sparsity level");
    costc->add_option("--budget-factor", budget_factor, "ZDD budget as a multiple of the Ryser cost");
    costc->add_option("--node-cap", node_cap, "ZDD node limit");

    auto* verify = app.add_subcommand("verify", "Check the product identity over a batch");
    add_common(verify, common, false, true);
    add_ensemble(verify, ens);
    add_range(verify, range, 4, 6, 10);
    add_solver(verify, solver, false);
    verify->add_option("--gamma", gammas, "Gamma values (repeatable)");
    verify->add_option("--threshold", threshold, "Largest acceptable relative gap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*gen) return cmd_gen(common, ens, n);
        if (*exact) return cmd_exact(common, file, cost, dump);
        if (*approx) return cmd_approx(common, solver, file, beliefs);
        if (*bounds) return cmd_bounds(common, solver, file, gammas, diag, csv, with_exact);
        if (*gstar) return cmd_gamma_star(common, solver, file, tol_gamma);
        if (*sweep) return cmd_sweep(common, ens, range, solver, what, tol_gamma, gammas);
        if (*gurvits) return cmd_gurvits(common, range);
        if (*costc) return cmd_cost(common, ens, cost_n, sparsity, instances, budget_factor, node_cap);
        if (*verify) return cmd_verify(common, ens, range, solver, gammas, threshold);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
        switch (e.code()) {
            case ErrorCode::support_violation:
            case ErrorCode::boundary_belief:
            case ErrorCode::not_interior: return kExitInvariant;
            default: return kExitError;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
