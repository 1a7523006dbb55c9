#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "fracperm/log_value.hpp"

namespace fracperm {

/// One stored cell of a non-negative matrix.
struct Entry {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

/// Immutable support (edge set) of an n x n matrix. Edges are numbered in
/// row-major order; the column view maps back to those edge ids.
class SparsityPattern {
public:
    SparsityPattern(int n, std::vector<std::pair<int, int>> cells);

    int n() const { return n_; }
    std::size_t size() const { return rows_.size(); }

    int row(std::size_t e) const { return rows_[e]; }
    int col(std::size_t e) const { return cols_[e]; }

    /// Edge ids [row_begin(i), row_end(i)) belong to row i, ordered by column.
    std::size_t row_begin(int i) const { return row_ptr_[i]; }
    std::size_t row_end(int i) const { return row_ptr_[i + 1]; }

    /// Edge ids of column j, ordered by row.
    std::span<const std::size_t> col_edges(int j) const {
        return {col_edges_.data() + col_ptr_[j], col_ptr_[j + 1] - col_ptr_[j]};
    }

    /// Edge id of (i, j) or -1 if structurally zero.
    std::ptrdiff_t find(int i, int j) const;

    bool row_empty(int i) const { return row_ptr_[i] == row_ptr_[i + 1]; }
    bool col_empty(int j) const { return col_ptr_[j] == col_ptr_[j + 1]; }

    bool operator==(const SparsityPattern& o) const {
        return n_ == o.n_ && rows_ == o.rows_ && cols_ == o.cols_;
    }

private:
    int n_;
    std::vector<int> rows_, cols_;
    std::vector<std::size_t> row_ptr_, col_ptr_, col_edges_;
};

using PatternPtr = std::shared_ptr<const SparsityPattern>;

/// Non-negative n x n matrix with an explicit zero pattern. Only strictly
/// positive weights are stored.
class WeightMatrix {
public:
    /// Zeros are dropped; negative, non-finite or duplicate cells throw.
    WeightMatrix(int n, std::vector<Entry> entries);
    WeightMatrix(PatternPtr pattern, std::vector<double> values);

    static WeightMatrix from_dense(int n, std::span<const double> row_major);
    static WeightMatrix from_rows(const std::vector<std::vector<double>>& rows);

    int n() const { return pattern_->n(); }
    std::size_t nnz() const { return values_.size(); }
    const SparsityPattern& pattern() const { return *pattern_; }
    const PatternPtr& pattern_ptr() const { return pattern_; }
    std::span<const double> values() const { return values_; }
    double value(std::size_t e) const { return values_[e]; }

    /// p_ij, 0 for structural zeros.
    double at(int i, int j) const;

    std::vector<double> dense() const;
    std::vector<Entry> entries() const;

    /// Every row and column has at least one stored entry. Necessary, not
    /// sufficient, for a perfect matching to exist.
    bool no_empty_lines() const;

    /// Keep only the listed edge ids.
    WeightMatrix restrict_to(std::span<const std::size_t> edge_ids) const;

private:
    PatternPtr pattern_;
    std::vector<double> values_;
};

constexpr double kDefaultTolDs = 1e-9;

/// Doubly stochastic beliefs on the support of a weight matrix, with the row
/// and column Lagrange multipliers that produced them.
struct Beliefs {
    PatternPtr pattern;
    std::vector<double> beta;     // aligned with pattern edge ids
    std::vector<double> row_mult;
    std::vector<double> col_mult;

    int n() const { return pattern->n(); }

    /// max_i |sum_j beta_ij - 1| and the same over columns.
    double max_row_deviation() const;
    double max_col_deviation() const;
    double max_ds_deviation() const;
    bool doubly_stochastic(double tol = kDefaultTolDs) const { return max_ds_deviation() < tol; }

    /// Every stored belief lies in (margin, 1 - margin).
    bool interior(double margin = 0.0) const;

    double at(int i, int j) const;
    std::vector<double> dense() const;
};

/// beta_ij * (1 - beta_ij)^(-gamma) on the support of beta. Entries that
/// evaluate to zero become structural zeros.
WeightMatrix hadamard_transform(const Beliefs& beliefs, double gamma);

/// Same as hadamard_transform but for a doubly stochastic weight matrix.
WeightMatrix hadamard_transform(const WeightMatrix& phi, double gamma);

/// Sum over all permutations, enumerated depth first over stored entries.
/// Plain double accumulation; guarded to n <= 12.
LogValue brute_force_permanent(const WeightMatrix& p);

struct SinkhornResult {
    Beliefs beliefs;
    bool converged = false;
    int iterations = 0;
    double max_deviation = 0.0;
};

/// Alternating row/column normalization. beta_ij = row_mult_i * p_ij * col_mult_j.
SinkhornResult sinkhorn_balance(const WeightMatrix& p, double tol = 1e-12, int max_iter = 100000);

}  // namespace fracperm
