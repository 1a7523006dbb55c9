#pragma once

#include <limits>
#include <string>

#include "fracperm/log_value.hpp"
#include "fracperm/matrix.hpp"
#include "fracperm/variational.hpp"

namespace fracperm {

enum class GammaStarStatus {
    ok,
    below_range,    // g(-1) > 0: Z_of already exceeds perm at gamma = -1
    above_range,    // g(0) < 0: Z_of still below perm at gamma = 0
    failed,         // a solve did not converge even with reduced damping
};

const char* to_string(GammaStarStatus status);

struct GammaStarConfig {
    double tol_gamma = 1e-4;
    SolverConfig solver;
    int damping_retries = 3;  // halve the damping this many times on non-convergence
};

struct GammaStarResult {
    double gamma_star = 0.0;
    GammaStarStatus status = GammaStarStatus::failed;
    double lo = -1.0, hi = 0.0;      // final bracket
    double g_lo = 0.0, g_hi = 0.0;   // g at the bracket ends
    double g_mid = 0.0;              // g at gamma_star
    double slope = 0.0;              // secant slope of g over the final bracket
    double failed_gamma = std::numeric_limits<double>::quiet_NaN();  // where the solver gave up
    bool boundary_at_minus_one = false;  // the gamma = -1 optimum was not interior
    int solves = 0;
};

/// log Z_of at gamma, retrying with halved damping on non-convergence.
/// Returns the converged result; status non_converged if every retry failed.
SolveResult solve_with_retries(const WeightMatrix& p, double gamma, const GammaStarConfig& cfg);

/// Bisection on [-1, 0] for g(gamma) = log Z_of^gamma - log perm(p), which is
/// non-decreasing in gamma. Returns the bracket midpoint once the bracket is
/// narrower than tol_gamma. Out-of-range brackets return the nearer endpoint.
GammaStarResult find_gamma_star(const WeightMatrix& p, const LogValue& exact, const GammaStarConfig& cfg = {});

}  // namespace fracperm
