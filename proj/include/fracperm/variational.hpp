#pragma once

#include <string>
#include <vector>

#include "fracperm/log_value.hpp"
#include "fracperm/matrix.hpp"

namespace fracperm {

enum class InitKind { mf_output, uniform, max_matching_corner };
enum class SolveStatus { interior, partially_resolved, boundary, non_converged };

/// Factor multiplying p in the damped gamma <= 0 scheme. With (1 - beta)^(1+gamma)
/// the fixed point satisfies the stationarity equations for every gamma in
/// [-1, 0]; (1 + beta)^(1+gamma) only does so at gamma = -1 and is kept for
/// comparison.
enum class NegativeGammaFactor { one_minus_beta, one_plus_beta };

InitKind parse_init_kind(const std::string& name);
const char* to_string(InitKind kind);
const char* to_string(SolveStatus status);

struct SolverConfig {
    double gamma = -1.0;
    double damping = 0.45;
    double tol = 1e-10;
    int max_iter = 100000;
    InitKind init = InitKind::mf_output;
    double margin = 1e-7;  // interior / boundary classification
    bool polish = true;    // Newton refinement, continuation and face search
    NegativeGammaFactor factor = NegativeGammaFactor::one_minus_beta;
};

struct SolveResult {
    Beliefs beliefs;
    double gamma = 0.0;
    double free_energy = 0.0;
    LogValue z;  // exp(-free_energy)
    SolveStatus status = SolveStatus::non_converged;
    double residual = 0.0;  // max relative stationarity error over interior edges
    int iterations = 0;
    std::string method;      // which stage produced the answer
    bool degenerate = false; // distinct minimizers with equal free energy were found
};

/// sum over stored beta of beta log(beta / p) + gamma (1 - beta) log(1 - beta),
/// with 0 log 0 = 0. Throws support_violation if beta has weight where p has none.
double free_energy(const Beliefs& beliefs, const WeightMatrix& p, double gamma);

/// max over edges with beta in (margin, 1 - margin) of
/// |beta (1 - beta)^(-gamma) w_i w^j - p| / p, using the stored multipliers.
double stationarity_residual(const Beliefs& beliefs, const WeightMatrix& p, double gamma, double margin = 1e-7);

/// Interior / partially-resolved / boundary from the belief values alone.
SolveStatus classify(const Beliefs& beliefs, double margin = 1e-7);

/// Mean-field solve (gamma = 1): multiplicative multiplier updates from v = 1.
SolveResult solve_mf(const WeightMatrix& p, SolverConfig cfg = {});

/// Minimizer of the fractional free energy at cfg.gamma in [-1, 1]. Throws
/// unsatisfiable if p has no perfect matching.
SolveResult solve_fractional(const WeightMatrix& p, const SolverConfig& cfg);

/// solve_fractional at gamma = -1.
SolveResult solve_bp(const WeightMatrix& p, SolverConfig cfg = {});

struct IdentityReport {
    bool applicable = false;
    std::string reason;
    LogValue lhs;  // perm(p)
    LogValue rhs;  // Z * perm(beta (1 - beta)^(-gamma)) * prod (1 - beta)^gamma
    double relative_gap = 0.0;
};

/// Both sides of the product identity that ties perm(p) to a stationary point,
/// with exact permanents. Requires an interior result.
IdentityReport check_exact_identity(const WeightMatrix& p, const SolveResult& result, double gamma);

}  // namespace fracperm
