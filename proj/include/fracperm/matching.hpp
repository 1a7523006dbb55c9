#pragma once

#include <cstdint>
#include <vector>

#include "fracperm/log_value.hpp"
#include "fracperm/matrix.hpp"

namespace fracperm {

struct Matching {
    bool feasible = false;
    std::vector<int> perm;  // perm[i] = column matched to row i
    LogValue value;         // product of the matched weights; zero if infeasible
};

/// Maximum-product perfect matching, solved as a min-cost assignment on
/// -log p over the stored entries (shortest augmenting paths with duals).
/// Among optimal matchings the lexicographically smallest permutation is
/// returned.
Matching max_weight_matching(const WeightMatrix& p);

/// Best matching forced to contain (i, j). Infeasible if (i, j) is not stored
/// or lies on no perfect matching.
Matching forced_matching(const WeightMatrix& p, int i, int j);

struct LpCheckReport {
    bool feasible = false;
    LogValue z_ml;
    LogValue z_lp;           // equal to z_ml: the assignment polytope is integral
    bool lp_equals_ml = false;
    bool tie = false;        // more than one optimal matching
    double jitter_gap = 0;   // relative change of the optimum under weight jitter
    std::vector<int> perm;
};

/// Confirms the optimum is a stable vertex: re-solves with seeded
/// multiplicative jitter of relative size 1e-9 and compares values. Ties are
/// detected exactly as alternating cycles among zero-reduced-cost edges.
LpCheckReport z_ml_equals_z_lp_check(const WeightMatrix& p, std::uint64_t seed = 0);

/// Is there any perfect matching on the support?
bool has_perfect_matching(const SparsityPattern& pattern);

/// Per stored entry: does it lie on at least one perfect matching? All false
/// when no perfect matching exists.
std::vector<char> allowed_edges(const SparsityPattern& pattern);

}  // namespace fracperm
