#include "fracperm/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fracperm/errors.hpp"

namespace fracperm {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::parse: return "parse";
        case ErrorCode::negative_entry: return "negative-entry";
        case ErrorCode::dimension_mismatch: return "dimension-mismatch";
        case ErrorCode::too_large: return "too-large";
        case ErrorCode::boundary_belief: return "boundary-belief";
        case ErrorCode::support_violation: return "support-violation";
        case ErrorCode::unsatisfiable: return "unsatisfiable";
        case ErrorCode::capacity: return "capacity";
        case ErrorCode::missing_weight: return "missing-weight";
        case ErrorCode::not_interior: return "not-interior";
        case ErrorCode::invalid_argument: return "invalid-argument";
        case ErrorCode::budget_exceeded: return "budget-exceeded";
    }
    return "unknown";
}

double relative_difference(const LogValue& a, const LogValue& b) {
    if (a.is_zero() && b.is_zero()) return 0.0;
    const LogValue diff = a - b;
    if (diff.is_zero()) return 0.0;
    const double scale = std::max(a.log_abs(), b.log_abs());
    return std::exp(diff.log_abs() - scale);
}

// ---------------------------------------------------------------------------

SparsityPattern::SparsityPattern(int n, std::vector<std::pair<int, int>> cells) : n_(n) {
    if (n < 1) throw Error(ErrorCode::dimension_mismatch, "matrix side must be >= 1");
    std::sort(cells.begin(), cells.end());
    for (std::size_t k = 0; k < cells.size(); ++k) {
        auto [i, j] = cells[k];
        if (i < 0 || i >= n || j < 0 || j >= n) {
            std::ostringstream os;
            os << "cell (" << i << "," << j << ") outside " << n << "x" << n;
            throw Error(ErrorCode::dimension_mismatch, os.str());
        }
        if (k > 0 && cells[k - 1] == cells[k]) {
            std::ostringstream os;
            os << "duplicate cell (" << i << "," << j << ")";
            throw Error(ErrorCode::parse, os.str());
        }
    }
    rows_.reserve(cells.size());
    cols_.reserve(cells.size());
    row_ptr_.assign(n + 1, 0);
    col_ptr_.assign(n + 1, 0);
    for (auto [i, j] : cells) {
        rows_.push_back(i);
        cols_.push_back(j);
        ++row_ptr_[i + 1];
        ++col_ptr_[j + 1];
    }
    std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());
    std::partial_sum(col_ptr_.begin(), col_ptr_.end(), col_ptr_.begin());
    col_edges_.resize(cells.size());
    std::vector<std::size_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
    for (std::size_t e = 0; e < cells.size(); ++e) col_edges_[fill[cols_[e]]++] = e;
}

std::ptrdiff_t SparsityPattern::find(int i, int j) const {
    if (i < 0 || i >= n_) return -1;
    auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return -1;
    return it - cols_.begin();
}

// ---------------------------------------------------------------------------

namespace {

PatternPtr make_pattern(int n, std::vector<Entry>& entries, std::vector<double>& values) {
    std::vector<Entry> kept;
    kept.reserve(entries.size());
    for (const Entry& e : entries) {
        if (!std::isfinite(e.value)) {
            std::ostringstream os;
            os << "non-finite entry at (" << e.row << "," << e.col << ")";
            throw Error(ErrorCode::parse, os.str());
        }
        if (e.value < 0.0) {
            std::ostringstream os;
            os << "negative entry " << e.value << " at (" << e.row << "," << e.col << ")";
            throw Error(ErrorCode::negative_entry, os.str());
        }
        if (e.value > 0.0) kept.push_back(e);
    }
    std::sort(kept.begin(), kept.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::pair<int, int>> cells;
    cells.reserve(kept.size());
    values.clear();
    for (const Entry& e : kept) {
        cells.emplace_back(e.row, e.col);
        values.push_back(e.value);
    }
    return std::make_shared<const SparsityPattern>(n, std::move(cells));
}

}  // namespace

WeightMatrix::WeightMatrix(int n, std::vector<Entry> entries) {
    pattern_ = make_pattern(n, entries, values_);
}

WeightMatrix::WeightMatrix(PatternPtr pattern, std::vector<double> values)
    : pattern_(std::move(pattern)), values_(std::move(values)) {
    if (values_.size() != pattern_->size())
        throw Error(ErrorCode::dimension_mismatch, "value count does not match pattern");
    for (double v : values_) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw Error(ErrorCode::negative_entry, "stored weights must be positive and finite");
    }
}

WeightMatrix WeightMatrix::from_dense(int n, std::span<const double> row_major) {
    if (n < 1 || row_major.size() != static_cast<std::size_t>(n) * n)
        throw Error(ErrorCode::dimension_mismatch, "dense data is not n*n");
    std::vector<Entry> entries;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) entries.push_back({i, j, row_major[i * n + j]});
    return WeightMatrix(n, std::move(entries));
}

WeightMatrix WeightMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    const int n = static_cast<int>(rows.size());
    std::vector<double> flat;
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != n)
            throw Error(ErrorCode::dimension_mismatch, "matrix is not square");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return from_dense(n, flat);
}

double WeightMatrix::at(int i, int j) const {
    auto e = pattern_->find(i, j);
    return e < 0 ? 0.0 : values_[static_cast<std::size_t>(e)];
}

std::vector<double> WeightMatrix::dense() const {
    const int n = this->n();
    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
    for (std::size_t e = 0; e < nnz(); ++e)
        out[static_cast<std::size_t>(pattern_->row(e)) * n + pattern_->col(e)] = values_[e];
    return out;
}

std::vector<Entry> WeightMatrix::entries() const {
    std::vector<Entry> out;
    out.reserve(nnz());
    for (std::size_t e = 0; e < nnz(); ++e)
        out.push_back({pattern_->row(e), pattern_->col(e), values_[e]});
    return out;
}

bool WeightMatrix::no_empty_lines() const {
    for (int i = 0; i < n(); ++i)
        if (pattern_->row_empty(i) || pattern_->col_empty(i)) return false;
    return true;
}

WeightMatrix WeightMatrix::restrict_to(std::span<const std::size_t> edge_ids) const {
    std::vector<Entry> kept;
    kept.reserve(edge_ids.size());
    for (std::size_t e : edge_ids) kept.push_back({pattern_->row(e), pattern_->col(e), values_[e]});
    return WeightMatrix(n(), std::move(kept));
}

// ---------------------------------------------------------------------------

double Beliefs::max_row_deviation() const {
    double worst = 0.0;
    for (int i = 0; i < n(); ++i) {
        double s = 0.0;
        for (std::size_t e = pattern->row_begin(i); e < pattern->row_end(i); ++e) s += beta[e];
        worst = std::max(worst, std::fabs(s - 1.0));
    }
    return worst;
}

double Beliefs::max_col_deviation() const {
    double worst = 0.0;
    for (int j = 0; j < n(); ++j) {
        double s = 0.0;
        for (std::size_t e : pattern->col_edges(j)) s += beta[e];
        worst = std::max(worst, std::fabs(s - 1.0));
    }
    return worst;
}

double Beliefs::max_ds_deviation() const {
    return std::max(max_row_deviation(), max_col_deviation());
}

bool Beliefs::interior(double margin) const {
    return std::all_of(beta.begin(), beta.end(),
                       [margin](double b) { return b > margin && b < 1.0 - margin; });
}

double Beliefs::at(int i, int j) const {
    auto e = pattern->find(i, j);
    return e < 0 ? 0.0 : beta[static_cast<std::size_t>(e)];
}

std::vector<double> Beliefs::dense() const {
    const int n = this->n();
    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
    for (std::size_t e = 0; e < beta.size(); ++e)
        out[static_cast<std::size_t>(pattern->row(e)) * n + pattern->col(e)] = beta[e];
    return out;
}

namespace {

WeightMatrix transform_values(const SparsityPattern& pat, std::span<const double> beta, double gamma) {
    std::vector<Entry> out;
    out.reserve(beta.size());
    for (std::size_t e = 0; e < beta.size(); ++e) {
        const double b = beta[e];
        if (b < 0.0 || b > 1.0 + 1e-12)
            throw Error(ErrorCode::support_violation, "belief outside [0,1]");
        if (b >= 1.0 && gamma != 0.0)
            throw Error(ErrorCode::boundary_belief, "belief equal to 1 with gamma != 0");
        if (b == 0.0) continue;
        const double v = gamma == 0.0 ? b : b * std::pow(1.0 - b, -gamma);
        out.push_back({pat.row(e), pat.col(e), v});
    }
    return WeightMatrix(pat.n(), std::move(out));
}

}  // namespace

WeightMatrix hadamard_transform(const Beliefs& beliefs, double gamma) {
    return transform_values(*beliefs.pattern, beliefs.beta, gamma);
}

WeightMatrix hadamard_transform(const WeightMatrix& phi, double gamma) {
    return transform_values(phi.pattern(), phi.values(), gamma);
}

// ---------------------------------------------------------------------------

namespace {

double permanent_dfs(const WeightMatrix& p, int row, std::vector<char>& used, double prefix) {
    const auto& pat = p.pattern();
    if (row == p.n()) return prefix;
    double total = 0.0;
    for (std::size_t e = pat.row_begin(row); e < pat.row_end(row); ++e) {
        const int c = pat.col(e);
        if (used[c]) continue;
        used[c] = 1;
        total += permanent_dfs(p, row + 1, used, prefix * p.value(e));
        used[c] = 0;
    }
    return total;
}

}  // namespace

LogValue brute_force_permanent(const WeightMatrix& p) {
    if (p.n() > 12) throw Error(ErrorCode::too_large, "brute force permanent limited to n <= 12");
    // Row scaling keeps the plain-domain products in range; perm scales linearly per row.
    const auto& pat = p.pattern();
    std::vector<double> scaled(p.values().begin(), p.values().end());
    double log_scale = 0.0;
    for (int i = 0; i < p.n(); ++i) {
        double mx = 0.0;
        for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e) mx = std::max(mx, scaled[e]);
        if (mx == 0.0) return LogValue::zero();
        for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e) scaled[e] /= mx;
        log_scale += std::log(mx);
    }
    WeightMatrix q(p.pattern_ptr(), std::move(scaled));
    std::vector<char> used(p.n(), 0);
    const double s = permanent_dfs(q, 0, used, 1.0);
    return LogValue::from_double(s) * LogValue::from_log(log_scale);
}

// ---------------------------------------------------------------------------

SinkhornResult sinkhorn_balance(const WeightMatrix& p, double tol, int max_iter) {
    if (!p.no_empty_lines())
        throw Error(ErrorCode::unsatisfiable, "sinkhorn_balance: matrix has an empty row or column");
    const auto& pat = p.pattern();
    const int n = p.n();
    SinkhornResult res;
    res.beliefs.pattern = p.pattern_ptr();
    res.beliefs.beta.assign(p.values().begin(), p.values().end());
    res.beliefs.row_mult.assign(n, 1.0);
    res.beliefs.col_mult.assign(n, 1.0);
    auto& beta = res.beliefs.beta;
    auto& r = res.beliefs.row_mult;
    auto& c = res.beliefs.col_mult;

    for (int it = 0; it < max_iter; ++it) {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e) s += beta[e];
            for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e) beta[e] /= s;
            r[i] /= s;
        }
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t e : pat.col_edges(j)) s += beta[e];
            for (std::size_t e : pat.col_edges(j)) beta[e] /= s;
            c[j] /= s;
        }
        res.iterations = it + 1;
        res.max_deviation = res.beliefs.max_row_deviation();
        if (res.max_deviation < tol) {
            res.converged = true;
            break;
        }
    }
    res.max_deviation = res.beliefs.max_ds_deviation();
    return res;
}

}  // namespace fracperm
