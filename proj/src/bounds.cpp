#include "fracperm/bounds.hpp"

#include <cmath>

#include "fracperm/errors.hpp"
#include "fracperm/exact.hpp"
#include "fracperm/matching.hpp"

namespace fracperm {

const char* to_string(BoundKind kind) {
    switch (kind) {
        case BoundKind::lower: return "lower";
        case BoundKind::upper: return "upper";
        case BoundKind::conjecture: return "conjecture";
    }
    return "unknown";
}

const BoundEntry* BoundReport::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

const BoundEntry* BoundReport::find(const std::string& name, double gamma) const {
    for (const auto& e : entries)
        if (e.name == name && e.gamma == gamma) return &e;
    return nullptr;
}

namespace {

double log_factorial_ratio(int n) { return std::lgamma(n + 1.0) - n * std::log(static_cast<double>(n)); }

BoundEntry make(std::string name, BoundKind kind, const SolveResult& r, std::string color = {}) {
    BoundEntry e;
    e.name = std::move(name);
    e.kind = kind;
    e.gamma = r.gamma;
    e.color = std::move(color);
    return e;
}

bool require_converged(BoundEntry& e, const SolveResult& r) {
    if (r.status == SolveStatus::non_converged) {
        e.reason = "solver did not converge";
        return false;
    }
    return true;
}

bool require_interior(BoundEntry& e, const SolveResult& r) {
    if (!require_converged(e, r)) return false;
    if (r.status != SolveStatus::interior) {
        e.reason = std::string("needs an interior solution, got ") + to_string(r.status);
        return false;
    }
    return true;
}

void require_gamma(const SolveResult& r, double gamma, const char* what) {
    if (r.gamma != gamma) throw Error(ErrorCode::invalid_argument, std::string(what) + " needs a solve at gamma = " + std::to_string(gamma));
}

}  // namespace

BoundEntry bp_lower(const SolveResult& bp) {
    require_gamma(bp, -1.0, "bp_lower");
    BoundEntry e = make("bp_lower", BoundKind::lower, bp, "white");
    e.value = bp.z;
    e.valid = require_converged(e, bp);
    return e;
}

BoundEntry bp_lower_vdw(const SolveResult& bp) {
    require_gamma(bp, -1.0, "bp_lower_vdw");
    BoundEntry e = make("bp_lower_vdw", BoundKind::lower, bp, "red");
    if (!require_interior(e, bp)) return e;
    double s = bp.z.log() + log_factorial_ratio(bp.beliefs.n());
    for (double b : bp.beliefs.beta) s += (b - 1.0) * std::log1p(-b);
    e.value = LogValue::from_log(s);
    e.valid = true;
    return e;
}

BoundEntry bp_lower_matching(const SolveResult& bp, std::span<const int> perm) {
    require_gamma(bp, -1.0, "bp_lower_matching");
    BoundEntry e = make("bp_lower_matching", BoundKind::lower, bp, "yellow");
    const auto& pat = *bp.beliefs.pattern;
    if (static_cast<int>(perm.size()) != pat.n()) throw Error(ErrorCode::dimension_mismatch, "permutation has the wrong length");
    if (!require_interior(e, bp)) return e;
    double s = std::log(2.0) + bp.z.log();
    for (double b : bp.beliefs.beta) s -= std::log1p(-b);
    for (int i = 0; i < pat.n(); ++i) {
        const std::ptrdiff_t k = pat.find(i, perm[i]);
        const double b = k < 0 ? 0.0 : bp.beliefs.beta[static_cast<std::size_t>(k)];
        if (b <= 0.0 || b >= 1.0) {
            e.reason = "zero factor on the permutation";
            return e;
        }
        s += std::log(b) + std::log1p(-b);
    }
    e.value = LogValue::from_log(s);
    e.valid = true;
    return e;
}

BoundEntry bp_lower_matching(const SolveResult& bp, const WeightMatrix& p) {
    const Matching m = max_weight_matching(p);
    if (!m.feasible) throw Error(ErrorCode::unsatisfiable, "matrix has no perfect matching");
    return bp_lower_matching(bp, m.perm);
}

BoundEntry bp_upper(const SolveResult& bp) {
    require_gamma(bp, -1.0, "bp_upper");
    BoundEntry e = make("bp_upper", BoundKind::upper, bp, "green");
    if (!require_interior(e, bp)) return e;
    const auto& pat = *bp.beliefs.pattern;
    double s = bp.z.log();
    for (double b : bp.beliefs.beta) s -= std::log1p(-b);
    for (int j = 0; j < pat.n(); ++j) {
        double sq = 0.0;
        for (std::size_t k : pat.col_edges(j)) sq += bp.beliefs.beta[k] * bp.beliefs.beta[k];
        s += std::log1p(-sq);
    }
    e.value = LogValue::from_log(s);
    e.valid = true;
    return e;
}

BoundEntry fractional_lower(const SolveResult& r) {
    BoundEntry e = make("fractional_lower", BoundKind::lower, r);
    if (!require_interior(e, r)) return e;
    double s = r.z.log() + log_factorial_ratio(r.beliefs.n());
    for (double b : r.beliefs.beta) s += r.gamma * (1.0 - b) * std::log1p(-b);
    e.value = LogValue::from_log(s);
    e.valid = true;
    return e;
}

BoundEntry fractional_upper(const SolveResult& r) {
    BoundEntry e = make("fractional_upper", BoundKind::upper, r);
    if (!require_interior(e, r)) return e;
    const auto& pat = *r.beliefs.pattern;
    double s = r.z.log();
    for (double b : r.beliefs.beta) s += r.gamma * std::log1p(-b);
    for (int j = 0; j < pat.n(); ++j) {
        double col = 0.0;
        for (std::size_t k : pat.col_edges(j)) {
            const double b = r.beliefs.beta[k];
            col += b * std::pow(1.0 - b, -r.gamma);
        }
        s += std::log(col);
    }
    e.value = LogValue::from_log(s);
    e.valid = true;
    return e;
}

BoundEntry nonnegative_gamma_upper(const SolveResult& r) {
    if (r.gamma < 0.0) throw Error(ErrorCode::invalid_argument, "nonnegative_gamma_upper needs gamma >= 0");
    std::string name = r.gamma == 0.0 ? "gamma0_upper" : r.gamma == 1.0 ? "mf_upper" : "fractional_opt_upper";
    std::string color = r.gamma == 0.0 ? "cyan" : r.gamma == 1.0 ? "blue" : "";
    BoundEntry e = make(std::move(name), BoundKind::upper, r, std::move(color));
    e.value = r.z;
    e.valid = require_converged(e, r);
    return e;
}

LogValue entropy_product(const WeightMatrix& phi) {
    double s = 0.0;
    for (double v : phi.values())
        if (v < 1.0) s += (1.0 - v) * std::log1p(-v);
    return LogValue::from_log(s);
}

GurvitsChain gurvits_chain(const WeightMatrix& phi, const SolverConfig& cfg) {
    return gurvits_chain(phi, exact_permanent(phi), cfg);
}

GurvitsChain gurvits_chain(const WeightMatrix& phi, const LogValue& exact, const SolverConfig& cfg) {
    const Beliefs as_beliefs{phi.pattern_ptr(), {phi.values().begin(), phi.values().end()}, {}, {}};
    if (!as_beliefs.doubly_stochastic(1e-8)) throw Error(ErrorCode::invalid_argument, "gurvits_chain needs a doubly stochastic matrix");
    GurvitsChain c;
    c.perm = exact;
    SolverConfig bp_cfg = cfg;
    bp_cfg.gamma = -1.0;
    c.z_obp = solve_fractional(phi, bp_cfg).z;
    c.product = entropy_product(phi);
    constexpr double slack = 1e-9;
    c.perm_ge_bp = c.perm.log() >= c.z_obp.log() - slack;
    c.bp_ge_product = c.z_obp.log() >= c.product.log() - slack;
    return c;
}

std::vector<BoundEntry> conjecture_checks(const WeightMatrix& p, const SolveResult& bp, const SolveResult& half,
                                          double diagnostic_constant) {
    require_gamma(bp, -1.0, "conjecture_checks");
    require_gamma(half, -0.5, "conjecture_checks");
    const int n = p.n();
    const double log_sqrt2n = 0.5 * n * std::log(2.0);
    std::vector<BoundEntry> out;

    BoundEntry c1 = make("conj1_sqrt2n", BoundKind::conjecture, bp);
    c1.value = bp.z * LogValue::from_log(log_sqrt2n);
    c1.valid = require_converged(c1, bp);
    out.push_back(std::move(c1));

    // perm(phi) = perm(p) prod r_i prod c_j for phi = diag(r) p diag(c)
    BoundEntry c2 = make("conj2_sqrt2n", BoundKind::conjecture, bp);
    c2.gamma = 0.0;
    const SinkhornResult s = sinkhorn_balance(p, 1e-13, 1000000);
    if (s.converged) {
        const WeightMatrix phi(p.pattern_ptr(), s.beliefs.beta);
        double log_scale = 0.0;
        for (double r : s.beliefs.row_mult) log_scale += std::log(r);
        for (double c : s.beliefs.col_mult) log_scale += std::log(c);
        c2.value = LogValue::from_log(log_sqrt2n + entropy_product(phi).log() - log_scale);
        c2.valid = true;
    } else {
        c2.reason = "Sinkhorn balancing did not converge";
    }
    out.push_back(std::move(c2));

    BoundEntry c3 = make("conj3_half", BoundKind::conjecture, half, "black");
    c3.value = half.z;
    c3.valid = require_converged(c3, half);
    out.push_back(std::move(c3));

    BoundEntry d = make("diag_const_sqrt_n", BoundKind::conjecture, bp, "purple");
    d.value = bp.z * LogValue::from_double(diagnostic_constant * std::sqrt(static_cast<double>(n)));
    d.valid = require_converged(d, bp);
    out.push_back(std::move(d));
    return out;
}

void compare_with_exact(BoundReport& report, const LogValue& exact, double tol) {
    const double x = exact.log();
    for (auto& e : report.entries) {
        if (!e.valid) {
            e.holds.reset();
            continue;
        }
        if (e.name == "diag_const_sqrt_n") continue;
        const double v = e.value.log();
        e.holds = e.kind == BoundKind::lower ? v <= x + tol : v >= x - tol;
    }
}

BoundReport evaluate_bounds(const WeightMatrix& p, const BoundsConfig& cfg) {
    auto solve_at = [&](double gamma) {
        SolverConfig c = cfg.solver;
        c.gamma = gamma;
        return solve_fractional(p, c);
    };
    const SolveResult bp = solve_at(-1.0);
    const SolveResult half = solve_at(-0.5);
    const SolveResult zero = solve_at(0.0);
    const SolveResult mf = solve_at(1.0);

    BoundReport rep;
    rep.entries.push_back(nonnegative_gamma_upper(mf));
    rep.entries.push_back(bp_upper(bp));
    rep.entries.push_back(bp_lower_vdw(bp));
    rep.entries.push_back(bp_lower(bp));
    rep.entries.push_back(bp_lower_matching(bp, p));
    rep.entries.push_back(nonnegative_gamma_upper(zero));
    for (auto& e : conjecture_checks(p, bp, half, cfg.diagnostic_constant)) rep.entries.push_back(std::move(e));
    for (double g : cfg.gammas) {
        const SolveResult r = g == -1.0 ? bp : g == -0.5 ? half : g == 0.0 ? zero : g == 1.0 ? mf : solve_at(g);
        rep.entries.push_back(fractional_lower(r));
        rep.entries.push_back(fractional_upper(r));
    }
    return rep;
}

}  // namespace fracperm
