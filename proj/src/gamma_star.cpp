#include "fracperm/gamma_star.hpp"

#include "fracperm/errors.hpp"

namespace fracperm {

const char* to_string(GammaStarStatus status) {
    switch (status) {
        case GammaStarStatus::ok: return "ok";
        case GammaStarStatus::below_range: return "below-range";
        case GammaStarStatus::above_range: return "above-range";
        case GammaStarStatus::failed: return "failed";
    }
    return "unknown";
}

SolveResult solve_with_retries(const WeightMatrix& p, double gamma, const GammaStarConfig& cfg) {
    SolverConfig c = cfg.solver;
    c.gamma = gamma;
    SolveResult r = solve_fractional(p, c);
    for (int k = 0; k < cfg.damping_retries && r.status == SolveStatus::non_converged; ++k) {
        c.damping *= 0.5;
        r = solve_fractional(p, c);
    }
    return r;
}

GammaStarResult find_gamma_star(const WeightMatrix& p, const LogValue& exact, const GammaStarConfig& cfg) {
    if (!(cfg.tol_gamma > 0.0)) throw Error(ErrorCode::invalid_argument, "tol_gamma must be positive");
    if (exact.sign() <= 0) throw Error(ErrorCode::unsatisfiable, "permanent is zero");
    const double log_perm = exact.log();
    GammaStarResult res;

    bool failed = false;
    auto g = [&](double gamma, bool* interior = nullptr) {
        const SolveResult r = solve_with_retries(p, gamma, cfg);
        ++res.solves;
        if (r.status == SolveStatus::non_converged) {
            failed = true;
            res.failed_gamma = gamma;
        }
        if (interior) *interior = r.status == SolveStatus::interior;
        return r.z.log() - log_perm;
    };

    bool interior = true;
    res.g_lo = g(-1.0, &interior);
    res.boundary_at_minus_one = !interior;
    if (failed) return res;
    if (res.g_lo > 0.0) {
        res.status = GammaStarStatus::below_range;
        res.gamma_star = res.lo = res.hi = -1.0;
        res.g_hi = res.g_mid = res.g_lo;
        return res;
    }
    res.g_hi = g(0.0);
    if (failed) return res;
    if (res.g_hi < 0.0) {
        res.status = GammaStarStatus::above_range;
        res.gamma_star = res.lo = res.hi = 0.0;
        res.g_lo = res.g_mid = res.g_hi;
        return res;
    }

    while (res.hi - res.lo >= cfg.tol_gamma) {
        const double mid = 0.5 * (res.lo + res.hi);
        const double gm = g(mid);
        if (failed) return res;
        if (gm < 0.0) {
            res.lo = mid;
            res.g_lo = gm;
        } else {
            res.hi = mid;
            res.g_hi = gm;
        }
    }
    res.gamma_star = 0.5 * (res.lo + res.hi);
    res.slope = (res.g_hi - res.g_lo) / (res.hi - res.lo);
    res.g_mid = g(res.gamma_star);
    if (failed) return res;
    res.status = GammaStarStatus::ok;
    return res;
}

}  // namespace fracperm
