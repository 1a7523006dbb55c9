#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracperm/log_value.hpp"
#include "fracperm/matrix.hpp"
#include "fracperm/variational.hpp"

namespace fracperm {

enum class BoundKind { lower, upper, conjecture };

const char* to_string(BoundKind kind);

struct BoundEntry {
    std::string name;
    BoundKind kind = BoundKind::lower;
    LogValue value;          // the bound (or conjectured bound) on perm(p)
    bool valid = false;      // hypothesis of the bound held
    std::string reason;      // why not valid
    double gamma = 0.0;      // fractional coefficient the entry was built from
    std::string color;       // legend colour in the comparison figure, if any
    std::optional<bool> holds;  // set by compare_with_exact for valid entries
};

struct BoundReport {
    std::vector<BoundEntry> entries;

    const BoundEntry* find(const std::string& name) const;
    const BoundEntry* find(const std::string& name, double gamma) const;
};

/// log Z of the optimal gamma = -1 solve. Valid when the solve converged,
/// including boundary and partially-resolved optima.
BoundEntry bp_lower(const SolveResult& bp);

/// Z_BP prod (1 - beta)^(beta - 1) n!/n^n. Valid for interior solves.
BoundEntry bp_lower_vdw(const SolveResult& bp);

/// 2 Z_BP / prod(1 - beta) * prod_i beta_{i perm(i)} (1 - beta_{i perm(i)}).
/// Invalid when not interior or when a factor on the permutation vanishes.
BoundEntry bp_lower_matching(const SolveResult& bp, std::span<const int> perm);

/// Same with perm = maximum weight matching of p.
BoundEntry bp_lower_matching(const SolveResult& bp, const WeightMatrix& p);

/// Z_BP / prod(1 - beta) * prod_j (1 - sum_i beta_ij^2). Valid for interior solves.
BoundEntry bp_upper(const SolveResult& bp);

/// Z_f prod (1 - beta)^(gamma (1 - beta)) n!/n^n. Valid for interior solves.
BoundEntry fractional_lower(const SolveResult& r);

/// Z_f prod (1 - beta)^gamma prod_j sum_i beta_ij (1 - beta_ij)^(-gamma).
/// Valid for interior solves.
BoundEntry fractional_upper(const SolveResult& r);

/// log Z of the optimal solve at gamma >= 0 (gamma = 0 gives "gamma0_upper",
/// gamma = 1 gives "mf_upper").
BoundEntry nonnegative_gamma_upper(const SolveResult& r);

struct GurvitsChain {
    LogValue perm;
    LogValue z_obp;
    LogValue product;  // prod (1 - phi)^(1 - phi)
    bool perm_ge_bp = false;
    bool bp_ge_product = false;
    bool holds() const { return perm_ge_bp && bp_ge_product; }
};

/// perm(phi) >= Z_oBP(phi) >= prod (1 - phi_ij)^(1 - phi_ij) for doubly
/// stochastic phi. Relative slack 1e-9 on each comparison. Throws
/// invalid_argument if phi is not doubly stochastic within 1e-8.
GurvitsChain gurvits_chain(const WeightMatrix& phi, const SolverConfig& cfg = {});
GurvitsChain gurvits_chain(const WeightMatrix& phi, const LogValue& exact, const SolverConfig& cfg = {});

/// prod over stored entries of (1 - phi)^(1 - phi).
LogValue entropy_product(const WeightMatrix& phi);

/// Conjecture monitors, all expressed as conjectured upper bounds on perm(p):
///   conj1_sqrt2n:   Z_oBP sqrt(2)^n
///   conj2_sqrt2n:   sqrt(2)^n prod (1 - phi)^(1 - phi) for phi the Sinkhorn
///                   balanced p, mapped back through the balancing scalings
///   conj3_half:     Z_of at gamma = -1/2
/// and the diagnostic "diag_const_sqrt_n": constant * Z_BP * sqrt(n), which
/// makes no claim.
std::vector<BoundEntry> conjecture_checks(const WeightMatrix& p, const SolveResult& bp, const SolveResult& half,
                                          double diagnostic_constant = 0.01);

/// Fill `holds` of every valid entry: lower <= exact, upper >= exact and
/// conjectures >= exact, each with absolute tolerance `tol` on logs.
void compare_with_exact(BoundReport& report, const LogValue& exact, double tol = 1e-8);

struct BoundsConfig {
    SolverConfig solver;
    std::vector<double> gammas{-1.0, -0.5, 0.0, 0.5, 1.0};  // fractional lower / upper family
    double diagnostic_constant = 0.01;
};

/// Every entry above for one matrix: the eight comparison expressions, the
/// fractional families over cfg.gammas and the conjecture monitors.
BoundReport evaluate_bounds(const WeightMatrix& p, const BoundsConfig& cfg = {});

}  // namespace fracperm
