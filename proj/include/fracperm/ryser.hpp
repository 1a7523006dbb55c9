#pragma once

#include "fracperm/cost_counter.hpp"
#include "fracperm/log_value.hpp"
#include "fracperm/matrix.hpp"

namespace fracperm {

constexpr int kRyserMaxN = 30;

/// Ryser inclusion-exclusion with subsets visited in Gray-code order, so each
/// step adds or removes one column from the running row sums. Only the stored
/// entries of the flipped column are touched.
///
/// The alternating sum is accumulated in plain doubles (rows are scaled by
/// their maxima first). Cancellation is severe for ill-conditioned inputs;
/// this engine is meant as an exact reference on modest n.
///
/// The counter records one read or write per access of a row-sum cell.
LogValue ryser_permanent(const WeightMatrix& p, CostCounter* counter = nullptr);

/// Same formula with every subset's row sums rebuilt from scratch. Exponentially
/// slower; used to cross-check the Gray-code bookkeeping.
LogValue ryser_permanent_naive(const WeightMatrix& p);

}  // namespace fracperm
