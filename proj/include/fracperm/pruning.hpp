#pragma once

#include <vector>

#include "fracperm/matching.hpp"
#include "fracperm/matrix.hpp"

namespace fracperm {

struct EdgeScores {
    std::vector<double> score;  // per stored entry, in (0, 1]; 0 if on no perfect matching
    Matching best;              // the maximum matching used as reference
};

/// score(i, j) = (best matching forced through (i, j)) / (best matching),
/// computed from log values. Edges of the maximum matching score exactly 1.
/// Throws unsatisfiable if p has no perfect matching.
EdgeScores score_edges(const WeightMatrix& p);

/// Keep entries with score >= ratio, plus the maximum matching.
WeightMatrix prune_threshold(const WeightMatrix& p, double ratio);
WeightMatrix prune_threshold(const WeightMatrix& p, const EdgeScores& scores, double ratio);

/// Keep the ceil(keep_fraction * nnz) best-scoring entries (ties by (i, j)),
/// plus the maximum matching.
WeightMatrix prune_fraction(const WeightMatrix& p, double keep_fraction);
WeightMatrix prune_fraction(const WeightMatrix& p, const EdgeScores& scores, double keep_fraction);

}  // namespace fracperm
