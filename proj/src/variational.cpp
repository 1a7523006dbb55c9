#include "fracperm/variational.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "fracperm/errors.hpp"
#include "fracperm/exact.hpp"
#include "fracperm/matching.hpp"

namespace fracperm {

InitKind parse_init_kind(const std::string& name) {
    if (name == "mf" || name == "mf-output") return InitKind::mf_output;
    if (name == "uniform") return InitKind::uniform;
    if (name == "corner" || name == "max-matching-corner") return InitKind::max_matching_corner;
    throw Error(ErrorCode::invalid_argument, "unknown init '" + name + "'");
}

const char* to_string(InitKind kind) {
    switch (kind) {
        case InitKind::mf_output: return "mf-output";
        case InitKind::uniform: return "uniform";
        case InitKind::max_matching_corner: return "max-matching-corner";
    }
    return "unknown";
}

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::interior: return "interior";
        case SolveStatus::partially_resolved: return "partially-resolved";
        case SolveStatus::boundary: return "boundary";
        case SolveStatus::non_converged: return "non-converged";
    }
    return "unknown";
}

// ---------------------------------------------------------------- evaluation

double free_energy(const Beliefs& beliefs, const WeightMatrix& p, double gamma) {
    const auto& pat = *beliefs.pattern;
    double f = 0.0;
    for (std::size_t e = 0; e < beliefs.beta.size(); ++e) {
        const double b = beliefs.beta[e];
        if (b == 0.0) continue;
        const double pe = p.at(pat.row(e), pat.col(e));
        if (pe <= 0.0) throw Error(ErrorCode::support_violation, "belief on a structural zero of p");
        f += b * std::log(b / pe);
        if (b < 1.0) f += gamma * (1.0 - b) * std::log1p(-b);
    }
    return f;
}

double stationarity_residual(const Beliefs& beliefs, const WeightMatrix& p, double gamma, double margin) {
    const auto& pat = *beliefs.pattern;
    double worst = 0.0;
    for (std::size_t e = 0; e < beliefs.beta.size(); ++e) {
        const double b = beliefs.beta[e];
        if (!(b > margin && b < 1.0 - margin)) continue;
        const int i = pat.row(e), j = pat.col(e);
        const double pe = p.at(i, j);
        const double lhs = b * std::pow(1.0 - b, -gamma) * beliefs.row_mult[i] * beliefs.col_mult[j];
        worst = std::max(worst, std::fabs(lhs - pe) / pe);
    }
    return worst;
}

SolveStatus classify(const Beliefs& beliefs, double margin) {
    std::size_t ones = 0, zeros = 0;
    for (double b : beliefs.beta) {
        if (b >= 1.0 - margin) ++ones;
        else if (b <= margin) ++zeros;
    }
    if (ones == 0 && zeros == 0) return SolveStatus::interior;
    if (ones + zeros == beliefs.beta.size() && ones == static_cast<std::size_t>(beliefs.n()))
        return SolveStatus::boundary;
    return SolveStatus::partially_resolved;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------- reduction
//
// Entries on no perfect matching carry zero belief in every doubly stochastic
// matrix on the support, and entries that are alone among the allowed ones in
// their row carry belief one. The remaining "free" block is solved on its own.

struct SubProblem {
    WeightMatrix p;
    std::vector<int> rows, cols;     // sub index -> original index
    std::vector<std::size_t> edges;  // sub edge -> original edge
};

struct Reduction {
    bool feasible = true;
    std::vector<double> fixed;  // per original edge: 0, 1, or NaN (free)
    std::optional<SubProblem> sub;
};

Reduction reduce(const WeightMatrix& p, const std::vector<std::size_t>& ones) {
    const auto& pat = p.pattern();
    const int n = p.n();
    Reduction red;
    red.fixed.assign(p.nnz(), kNaN);
    std::vector<char> row_done(n, 0), col_done(n, 0);
    for (std::size_t e : ones) {
        if (row_done[pat.row(e)] || col_done[pat.col(e)]) {
            red.feasible = false;
            return red;
        }
        row_done[pat.row(e)] = col_done[pat.col(e)] = 1;
        red.fixed[e] = 1.0;
    }

    std::vector<int> row_idx(n, -1), col_idx(n, -1), rows, cols;
    for (int i = 0; i < n; ++i)
        if (!row_done[i]) {
            row_idx[i] = static_cast<int>(rows.size());
            rows.push_back(i);
        }
    for (int j = 0; j < n; ++j)
        if (!col_done[j]) {
            col_idx[j] = static_cast<int>(cols.size());
            cols.push_back(j);
        }
    const int nr = static_cast<int>(rows.size());
    if (nr == 0) {
        for (double& f : red.fixed)
            if (std::isnan(f)) f = 0.0;
        return red;
    }

    std::vector<Entry> rest;
    std::vector<std::size_t> rest_orig;
    for (std::size_t e = 0; e < p.nnz(); ++e) {
        if (row_done[pat.row(e)] || col_done[pat.col(e)]) continue;
        rest.push_back({row_idx[pat.row(e)], col_idx[pat.col(e)], p.value(e)});
        rest_orig.push_back(e);
    }
    const WeightMatrix t(nr, rest);  // entries already row-major, so ids line up with rest_orig
    const std::vector<char> allowed = allowed_edges(t.pattern());
    if (std::none_of(allowed.begin(), allowed.end(), [](char a) { return a; })) {
        red.feasible = false;
        return red;
    }
    std::vector<int> allowed_in_row(nr, 0);
    for (std::size_t e = 0; e < t.nnz(); ++e) allowed_in_row[t.pattern().row(e)] += allowed[e];

    std::vector<int> sub_row(nr, -1), sub_col(nr, -1);
    struct {
        std::vector<int> rows, cols;
        std::vector<std::size_t> edges;
    } sub;
    std::vector<Entry> free_entries;
    for (std::size_t e = 0; e < t.nnz(); ++e) {
        const int i = t.pattern().row(e);
        if (!allowed[e]) continue;
        if (allowed_in_row[i] == 1) {
            red.fixed[rest_orig[e]] = 1.0;
            continue;
        }
        const int j = t.pattern().col(e);
        if (sub_row[i] < 0) {
            sub_row[i] = static_cast<int>(sub.rows.size());
            sub.rows.push_back(rows[i]);
        }
        free_entries.push_back({sub_row[i], j, t.value(e)});
        sub.edges.push_back(rest_orig[e]);
    }
    for (double& f : red.fixed)
        if (std::isnan(f)) f = 0.0;
    if (sub.rows.empty()) return red;

    // re-index columns in order of appearance among free entries
    for (auto& x : free_entries) {
        if (sub_col[x.col] < 0) {
            sub_col[x.col] = static_cast<int>(sub.cols.size());
            sub.cols.push_back(cols[x.col]);
        }
    }
    // column indices must be sorted consistently with the original order so
    // that sub edge ids stay row-major: renumber by original column.
    std::vector<int> order(sub.cols.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return sub.cols[a] < sub.cols[b]; });
    std::vector<int> rank(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = static_cast<int>(k);
    std::vector<int> sorted_cols(sub.cols.size());
    for (std::size_t k = 0; k < order.size(); ++k) sorted_cols[k] = sub.cols[order[k]];
    sub.cols = sorted_cols;
    for (auto& x : free_entries) {
        x.col = rank[sub_col[x.col]];
        red.fixed[sub.edges[&x - free_entries.data()]] = kNaN;
    }
    red.sub = SubProblem{WeightMatrix(static_cast<int>(sub.rows.size()), free_entries), std::move(sub.rows),
                         std::move(sub.cols), std::move(sub.edges)};
    return red;
}

// ---------------------------------------------------------------- iterations

struct IterState {
    std::vector<double> beta, row, col;  // plain-domain multipliers
    int iterations = 0;
    bool converged = false;
    double change = 0.0;
};

void row_col_sums(const WeightMatrix& q, const std::vector<double>& beta, std::vector<double>& rs, std::vector<double>& cs) {
    const auto& pat = q.pattern();
    rs.assign(q.n(), 0.0);
    cs.assign(q.n(), 0.0);
    for (std::size_t e = 0; e < beta.size(); ++e) {
        rs[pat.row(e)] += beta[e];
        cs[pat.col(e)] += beta[e];
    }
}

// Multiplicative scheme for gamma > 0; gamma = 1 is plain mean field.
void iterate_positive(const WeightMatrix& q, double gamma, double tol, int max_iter, IterState& st) {
    const auto& pat = q.pattern();
    std::vector<double> rs, cs;
    const int start = st.iterations;
    for (int it = 0; it < max_iter - start; ++it) {
        double change = 0.0;
        for (std::size_t e = 0; e < q.nnz(); ++e) {
            const double pe = gamma == 1.0 ? q.value(e) : q.value(e) * std::pow(1.0 - st.beta[e], gamma - 1.0);
            const double nb = pe / (pe + st.row[pat.row(e)] * st.col[pat.col(e)]);
            change = std::max(change, std::fabs(nb - st.beta[e]));
            st.beta[e] = nb;
        }
        row_col_sums(q, st.beta, rs, cs);
        for (int i = 0; i < q.n(); ++i) st.row[i] *= rs[i];
        for (int j = 0; j < q.n(); ++j) st.col[j] *= cs[j];
        st.iterations = start + it + 1;
        st.change = change;
        if (change < tol) {
            st.converged = true;
            return;
        }
    }
}

void sinkhorn_step(const WeightMatrix& q, std::vector<double>& beta) {
    const auto& pat = q.pattern();
    for (int i = 0; i < q.n(); ++i) {
        double s = 0.0;
        for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e) s += beta[e];
        if (s > 0.0)
            for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e) beta[e] /= s;
    }
    for (int j = 0; j < q.n(); ++j) {
        double s = 0.0;
        for (std::size_t e : pat.col_edges(j)) s += beta[e];
        if (s > 0.0)
            for (std::size_t e : pat.col_edges(j)) beta[e] /= s;
    }
}

// Damped scheme for gamma <= 0 with a Sinkhorn step between the belief and
// multiplier updates.
void iterate_negative(const WeightMatrix& q, double gamma, double damping, NegativeGammaFactor factor, double tol,
                      int max_iter, IterState& st) {
    const auto& pat = q.pattern();
    const std::size_t m = q.nnz();
    const int n = q.n();
    std::vector<double> rs, cs, nb(m), fac(m), new_row(n), new_col(n), sq_row(n), sq_col(n);
    auto factor_of = [&](double b) {
        if (gamma == -1.0) return 1.0;
        return factor == NegativeGammaFactor::one_minus_beta ? std::pow(1.0 - b, 1.0 + gamma)
                                                             : std::pow(1.0 + b, 1.0 + gamma);
    };
    const int start = st.iterations;
    for (int it = 0; it < max_iter - start; ++it) {
        row_col_sums(q, st.beta, rs, cs);
        for (std::size_t e = 0; e < m; ++e) {
            const int i = pat.row(e), j = pat.col(e);
            const double pe = q.value(e) * factor_of(st.beta[e]);
            const double d = cs[j] / 2.0 + rs[i] / 2.0 - st.beta[e];
            nb[e] = damping * st.beta[e] + (1.0 - damping) * pe / (pe + d * d * st.row[i] * st.col[j]);
        }
        sinkhorn_step(q, nb);
        double change = 0.0;
        for (std::size_t e = 0; e < m; ++e) change = std::max(change, std::fabs(nb[e] - st.beta[e]));
        st.beta.swap(nb);

        std::fill(new_row.begin(), new_row.end(), 0.0);
        std::fill(new_col.begin(), new_col.end(), 0.0);
        std::fill(sq_row.begin(), sq_row.end(), 0.0);
        std::fill(sq_col.begin(), sq_col.end(), 0.0);
        for (std::size_t e = 0; e < m; ++e) {
            const int i = pat.row(e), j = pat.col(e);
            const double pf = q.value(e) * factor_of(st.beta[e]);
            new_row[i] += pf / st.col[j];
            new_col[j] += pf / st.row[i];
            sq_row[i] += st.beta[e] * st.beta[e];
            sq_col[j] += st.beta[e] * st.beta[e];
        }
        constexpr double tiny = 1e-300;
        for (int i = 0; i < n; ++i) st.row[i] = new_row[i] / std::max(1.0 - sq_row[i], tiny);
        for (int j = 0; j < n; ++j) st.col[j] = new_col[j] / std::max(1.0 - sq_col[j], tiny);

        st.iterations = start + it + 1;
        st.change = change;
        if (change < tol) {
            st.converged = true;
            return;
        }
    }
}

// ---------------------------------------------------------------- Newton
//
// Stationarity system in log variables s = log beta, a = log w_row,
// b = log w_col (b_0 = 0 fixes the gauge):
//   s_e - gamma log(1 - e^s_e) + a_i + b_j - log p_e = 0
//   sum_{e in row i} e^s_e = 1,  sum_{e in col j} e^s_e = 1 (j >= 1)

struct LogPoint {
    std::vector<double> s, a, b;
};

double log1m_exp(double s) { return std::log(-std::expm1(s)); }

void kkt_residual(const WeightMatrix& q, double gamma, const LogPoint& x, Eigen::VectorXd& f) {
    const auto& pat = q.pattern();
    const std::size_t m = q.nnz();
    const int n = q.n();
    f.setZero(static_cast<Eigen::Index>(m + 2 * n - 1));
    for (std::size_t e = 0; e < m; ++e) {
        const int i = pat.row(e), j = pat.col(e);
        f[e] = x.s[e] - gamma * log1m_exp(x.s[e]) + x.a[i] + x.b[j] - std::log(q.value(e));
        const double beta = std::exp(x.s[e]);
        f[m + i] += beta;
        if (j > 0) f[m + n + j - 1] += beta;
    }
    for (int i = 0; i < n; ++i) f[m + i] -= 1.0;
    for (int j = 1; j < n; ++j) f[m + n + j - 1] -= 1.0;
}

Eigen::SparseMatrix<double> kkt_jacobian(const WeightMatrix& q, double gamma, const LogPoint& x) {
    const auto& pat = q.pattern();
    const std::size_t m = q.nnz();
    const int n = q.n();
    const auto dim = static_cast<Eigen::Index>(m + 2 * n - 1);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(5 * m);
    for (std::size_t e = 0; e < m; ++e) {
        const auto r = static_cast<Eigen::Index>(e);
        const int i = pat.row(e), j = pat.col(e);
        const double beta = std::exp(x.s[e]);
        const double odds = beta / -std::expm1(x.s[e]);
        t.emplace_back(r, r, 1.0 + gamma * odds);
        t.emplace_back(r, static_cast<Eigen::Index>(m + i), 1.0);
        if (j > 0) t.emplace_back(r, static_cast<Eigen::Index>(m + n + j - 1), 1.0);
        t.emplace_back(static_cast<Eigen::Index>(m + i), r, beta);
        if (j > 0) t.emplace_back(static_cast<Eigen::Index>(m + n + j - 1), r, beta);
    }
    Eigen::SparseMatrix<double> jac(dim, dim);
    jac.setFromTriplets(t.begin(), t.end());
    return jac;
}

struct NewtonOutcome {
    bool converged = false;
    bool singular = false;
    int steps = 0;
};

constexpr double kNewtonTol = 1e-12;

NewtonOutcome newton(const WeightMatrix& q, double gamma, LogPoint& x, int max_steps = 100) {
    const std::size_t m = q.nnz();
    const int n = q.n();
    NewtonOutcome out;
    Eigen::VectorXd f, f_new;
    kkt_residual(q, gamma, x, f);
    double phi = 0.5 * f.squaredNorm();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    bool analyzed = false;
    for (int step = 0; step < max_steps; ++step) {
        if (f.lpNorm<Eigen::Infinity>() < kNewtonTol) {
            out.converged = true;
            return out;
        }
        const Eigen::SparseMatrix<double> jac = kkt_jacobian(q, gamma, x);
        if (!analyzed) {
            lu.analyzePattern(jac);
            analyzed = true;
        }
        lu.factorize(jac);
        if (lu.info() != Eigen::Success) {
            out.singular = true;
            return out;
        }
        const Eigen::VectorXd dx = lu.solve(-f);
        if (lu.info() != Eigen::Success || !dx.allFinite()) {
            out.singular = true;
            return out;
        }
        // backtracking on 0.5 |f|^2, keeping every belief below one
        double t = 1.0;
        bool accepted = false;
        LogPoint y = x;
        while (t > 1e-12) {
            bool inside = true;
            for (std::size_t e = 0; e < m && inside; ++e) {
                y.s[e] = x.s[e] + t * dx[static_cast<Eigen::Index>(e)];
                inside = y.s[e] < 0.0 && y.s[e] > -700.0;
            }
            if (inside) {
                for (int i = 0; i < n; ++i) y.a[i] = x.a[i] + t * dx[static_cast<Eigen::Index>(m + i)];
                for (int j = 1; j < n; ++j) y.b[j] = x.b[j] + t * dx[static_cast<Eigen::Index>(m + n + j - 1)];
                kkt_residual(q, gamma, y, f_new);
                const double phi_new = 0.5 * f_new.squaredNorm();
                if (std::isfinite(phi_new) && phi_new <= (1.0 - 1e-4 * t) * phi) {
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        ++out.steps;
        if (!accepted) return out;
        x = std::move(y);
        f.swap(f_new);
        phi = 0.5 * f.squaredNorm();
    }
    out.converged = f.lpNorm<Eigen::Infinity>() < kNewtonTol;
    return out;
}

// Least-squares multipliers for given beliefs: a_i + b_j ~ log p - s + gamma log(1 - beta).
void fit_multipliers(const WeightMatrix& q, double gamma, LogPoint& x) {
    const auto& pat = q.pattern();
    const int n = q.n();
    std::vector<double> target(q.nnz());
    for (std::size_t e = 0; e < q.nnz(); ++e)
        target[e] = std::log(q.value(e)) - x.s[e] + gamma * log1m_exp(x.s[e]);
    x.a.assign(n, 0.0);
    x.b.assign(n, 0.0);
    for (int sweep = 0; sweep < 500; ++sweep) {
        double change = 0.0;
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e) s += target[e] - x.b[pat.col(e)];
            const double v = s / static_cast<double>(pat.row_end(i) - pat.row_begin(i));
            change = std::max(change, std::fabs(v - x.a[i]));
            x.a[i] = v;
        }
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            const auto col = pat.col_edges(j);
            for (std::size_t e : col) s += target[e] - x.a[pat.row(e)];
            const double v = s / static_cast<double>(col.size());
            change = std::max(change, std::fabs(v - x.b[j]));
            x.b[j] = v;
        }
        if (change < 1e-15) break;
    }
    const double shift = x.b[0];
    for (double& v : x.a) v += shift;
    for (double& v : x.b) v -= shift;
}

LogPoint to_log_point(const WeightMatrix& q, double gamma, const std::vector<double>& beta) {
    LogPoint x;
    x.s.resize(beta.size());
    for (std::size_t e = 0; e < beta.size(); ++e) x.s[e] = std::log(std::clamp(beta[e], 1e-300, 1.0 - 1e-15));
    fit_multipliers(q, gamma, x);
    return x;
}

std::vector<double> beliefs_of(const LogPoint& x) {
    std::vector<double> beta(x.s.size());
    for (std::size_t e = 0; e < beta.size(); ++e) beta[e] = std::exp(x.s[e]);
    return beta;
}

bool strictly_inside(const std::vector<double>& beta) {
    return std::all_of(beta.begin(), beta.end(), [](double b) { return b > 0.0 && b < 1.0; });
}

// Rank test of the stationarity Jacobian; a deficient rank means a flat
// direction of minimizers.
bool jacobian_rank_deficient(const WeightMatrix& q, double gamma, const LogPoint& x) {
    const Eigen::SparseMatrix<double> jac = kkt_jacobian(q, gamma, x);
    if (jac.rows() > 600) return false;
    Eigen::FullPivLU<Eigen::MatrixXd> lu{Eigen::MatrixXd(jac)};
    lu.setThreshold(1e-9);
    return lu.rank() < jac.rows();
}

// ---------------------------------------------------------------- sub solve

struct SubSolution {
    std::vector<double> beta;
    LogPoint x;          // valid when have_log_point
    bool have_log_point = false;
    std::vector<double> row, col;  // plain multipliers otherwise
    bool converged = false;
    bool singular = false;
    int iterations = 0;
    std::string method;
};

std::vector<double> uniform_beliefs(const WeightMatrix& q) {
    std::vector<double> ones(q.nnz(), 1.0);
    const SinkhornResult s = sinkhorn_balance(WeightMatrix(q.pattern_ptr(), ones), 1e-14, 100000);
    return s.beliefs.beta;
}

std::vector<double> corner_beliefs(const WeightMatrix& q) {
    constexpr double eta = 0.1;
    std::vector<double> beta = uniform_beliefs(q);
    const Matching mm = max_weight_matching(q);
    for (double& b : beta) b *= eta;
    for (int i = 0; i < q.n(); ++i) beta[static_cast<std::size_t>(q.pattern().find(i, mm.perm[i]))] += 1.0 - eta;
    return beta;
}

IterState mf_state(const WeightMatrix& q, double tol, int max_iter, bool polish, int& newton_steps) {
    IterState st;
    st.beta.assign(q.nnz(), 0.0);
    st.row.assign(q.n(), 1.0);
    st.col.assign(q.n(), 1.0);
    iterate_positive(q, 1.0, polish ? std::max(tol, 1e-8) : tol, max_iter, st);
    if (polish) {
        LogPoint x = to_log_point(q, 1.0, st.beta);
        const NewtonOutcome o = newton(q, 1.0, x);
        newton_steps += o.steps;
        if (o.converged) {
            st.beta = beliefs_of(x);
            for (int i = 0; i < q.n(); ++i) st.row[i] = std::exp(x.a[i]);
            for (int j = 0; j < q.n(); ++j) st.col[j] = std::exp(x.b[j]);
            st.converged = true;
        } else if (!st.converged || tol < 1e-8) {
            st.converged = false;
            iterate_positive(q, 1.0, tol, max_iter, st);
        }
    }
    return st;
}

// Newton along gamma from the mean-field point down (or up) to the target.
bool continuation(const WeightMatrix& q, double gamma, const IterState& mf, LogPoint& out, int& steps) {
    LogPoint x = to_log_point(q, 1.0, mf.beta);
    NewtonOutcome o = newton(q, 1.0, x);
    steps += o.steps;
    if (!o.converged) return false;
    double g = 1.0, h = 0.25;
    while (g != gamma) {
        const double next = gamma < g ? std::max(gamma, g - h) : std::min(gamma, g + h);
        LogPoint y = x;
        o = newton(q, next, y);
        steps += o.steps;
        if (o.converged) {
            x = std::move(y);
            g = next;
            h = std::min(2.0 * h, 0.5);
        } else {
            h *= 0.5;
            if (h < 1e-4) return false;
        }
    }
    out = std::move(x);
    return true;
}

SubSolution solve_sub(const WeightMatrix& q, const SolverConfig& cfg, std::optional<InitKind> init_override = {}) {
    const double gamma = cfg.gamma;
    const InitKind init = init_override.value_or(cfg.init);
    SubSolution out;
    int newton_steps = 0;

    std::optional<IterState> mf;
    if (gamma == 1.0 || init == InitKind::mf_output || cfg.polish) mf = mf_state(q, cfg.tol, cfg.max_iter, cfg.polish, newton_steps);

    if (gamma == 1.0) {
        out.beta = mf->beta;
        out.row = mf->row;
        out.col = mf->col;
        out.converged = mf->converged;
        out.iterations = mf->iterations + newton_steps;
        out.method = cfg.polish ? "mf-iteration+newton" : "mf-iteration";
        return out;
    }

    IterState st;
    if (init == InitKind::mf_output) {
        st.beta = mf->beta;
        st.row = mf->row;
        st.col = mf->col;
    } else {
        st.beta = init == InitKind::uniform ? uniform_beliefs(q) : corner_beliefs(q);
        st.row.assign(q.n(), 1.0);
        st.col.assign(q.n(), 1.0);
    }
    auto run = [&](double tol) {
        st.converged = false;
        if (gamma > 0.0) iterate_positive(q, gamma, tol, cfg.max_iter, st);
        else iterate_negative(q, gamma, cfg.damping, cfg.factor, tol, cfg.max_iter, st);
    };
    const std::string scheme = gamma > 0.0 ? "positive-iteration" : "damped-iteration";

    auto accept_newton = [&](LogPoint& x, const std::string& method) {
        out.beta = beliefs_of(x);
        out.x = std::move(x);
        out.have_log_point = true;
        out.converged = true;
        out.method = method;
        if (gamma <= 0.0) out.singular = out.singular || jacobian_rank_deficient(q, gamma, out.x);
    };

    if (!cfg.polish) {
        run(cfg.tol);
        out.beta = st.beta;
        out.row = st.row;
        out.col = st.col;
        out.converged = st.converged;
        out.iterations = st.iterations;
        out.method = scheme;
        return out;
    }

    run(std::max(cfg.tol, 1e-7));
    for (int attempt = 0; attempt < 2; ++attempt) {
        LogPoint x = to_log_point(q, gamma, st.beta);
        const NewtonOutcome o = newton(q, gamma, x);
        newton_steps += o.steps;
        out.singular = out.singular || o.singular;
        if (o.converged && strictly_inside(beliefs_of(x))) {
            accept_newton(x, scheme + "+newton");
            out.iterations = st.iterations + newton_steps;
            return out;
        }
        if (attempt == 0) {
            if (st.converged && cfg.tol >= 1e-7) break;
            run(cfg.tol);
        }
    }
    // A converged iteration whose Jacobian is singular sits on a flat family
    // of minimizers; the iterate itself is a valid answer.
    if (st.converged && out.singular) {
        out.beta = st.beta;
        out.x = to_log_point(q, gamma, st.beta);
        out.have_log_point = true;
        out.converged = true;
        out.iterations = st.iterations + newton_steps;
        out.method = scheme + " (singular jacobian)";
        return out;
    }
    LogPoint x;
    if (continuation(q, gamma, *mf, x, newton_steps) && strictly_inside(beliefs_of(x))) {
        accept_newton(x, "gamma-continuation+newton");
        out.iterations = st.iterations + newton_steps;
        return out;
    }
    out.beta = st.beta;
    out.row = st.row;
    out.col = st.col;
    out.converged = false;
    out.iterations = st.iterations + newton_steps;
    out.method = scheme + " (not converged)";
    return out;
}

// ---------------------------------------------------------------- assembly

struct Candidate {
    Beliefs beliefs;
    bool converged = false;
    bool singular = false;
    int iterations = 0;
    std::string method;
    double f = std::numeric_limits<double>::infinity();
    bool sub_interior = true;
};

Candidate assemble(const WeightMatrix& p, const Reduction& red, const SubSolution* sol, double gamma) {
    Candidate c;
    c.beliefs.pattern = p.pattern_ptr();
    c.beliefs.beta = red.fixed;
    c.beliefs.row_mult.assign(p.n(), kNaN);
    c.beliefs.col_mult.assign(p.n(), kNaN);
    if (sol) {
        const SubProblem& sub = *red.sub;
        for (std::size_t e = 0; e < sub.edges.size(); ++e) c.beliefs.beta[sub.edges[e]] = sol->beta[e];
        for (std::size_t i = 0; i < sub.rows.size(); ++i)
            c.beliefs.row_mult[sub.rows[i]] = sol->have_log_point ? std::exp(sol->x.a[i]) : sol->row[i];
        for (std::size_t j = 0; j < sub.cols.size(); ++j)
            c.beliefs.col_mult[sub.cols[j]] = sol->have_log_point ? std::exp(sol->x.b[j]) : sol->col[j];
        c.converged = sol->converged;
        c.singular = sol->singular;
        c.iterations = sol->iterations;
        c.method = sol->method;
        c.sub_interior = strictly_inside(sol->beta);
    } else {
        c.converged = true;
        c.method = "resolved-by-support";
    }
    c.f = free_energy(c.beliefs, p, gamma);
    return c;
}

Candidate solve_with_fixed(const WeightMatrix& p, const SolverConfig& cfg, const std::vector<std::size_t>& ones, int depth);

// For gamma < 0 the minimum can sit on a face of the polytope where some
// beliefs equal one. Try the faces suggested by the iterate's near-one
// entries and keep whichever feasible point has the lowest free energy.
Candidate search_faces(const WeightMatrix& p, const SolverConfig& cfg, const std::vector<std::size_t>& ones, Candidate best,
                       int depth) {
    if (depth > p.n()) return best;
    std::vector<std::size_t> prev;
    for (double theta : {1.0 - 1e-8, 1.0 - 1e-6, 1.0 - 1e-4, 1.0 - 1e-3, 1.0 - 1e-2, 0.9, 0.75}) {
        std::vector<std::size_t> pick = ones;
        for (std::size_t e = 0; e < best.beliefs.beta.size(); ++e)
            if (best.beliefs.beta[e] > theta && std::find(ones.begin(), ones.end(), e) == ones.end()) pick.push_back(e);
        if (pick.size() == ones.size() || pick == prev) continue;
        prev = pick;
        Candidate c = solve_with_fixed(p, cfg, pick, depth + 1);
        if (c.converged && c.f <= best.f + 1e-12 * (1.0 + std::fabs(best.f))) {
            const int extra = best.iterations;
            best = std::move(c);
            best.iterations += extra;
            best.method = "face-search: " + best.method;
        }
    }
    return best;
}

Candidate solve_with_fixed(const WeightMatrix& p, const SolverConfig& cfg, const std::vector<std::size_t>& ones, int depth) {
    const Reduction red = reduce(p, ones);
    if (!red.feasible) return {};
    if (!red.sub) return assemble(p, red, nullptr, cfg.gamma);
    const SubSolution sol = solve_sub(red.sub->p, cfg);
    Candidate c = assemble(p, red, &sol, cfg.gamma);
    const bool near_corner = std::any_of(c.beliefs.beta.begin(), c.beliefs.beta.end(), [](double b) { return b > 1.0 - 1e-3; });
    if (cfg.polish && cfg.gamma < 0.0 && (near_corner || !(c.converged && c.sub_interior))) {
        // an unconverged iterate is still a feasible point after the Sinkhorn step
        if (!c.converged && c.beliefs.max_ds_deviation() > 1e-6) c.f = std::numeric_limits<double>::infinity();
        c = search_faces(p, cfg, ones, std::move(c), depth);
    }
    return c;
}

void validate(const SolverConfig& cfg) {
    if (!(cfg.gamma >= -1.0 && cfg.gamma <= 1.0)) throw Error(ErrorCode::invalid_argument, "gamma must lie in [-1, 1]");
    if (!(cfg.damping > 0.0 && cfg.damping < 1.0)) throw Error(ErrorCode::invalid_argument, "damping must lie in (0, 1)");
    if (!(cfg.tol > 0.0)) throw Error(ErrorCode::invalid_argument, "tol must be positive");
    if (cfg.max_iter < 1) throw Error(ErrorCode::invalid_argument, "max_iter must be >= 1");
}

SolveResult finish(const WeightMatrix& p, const SolverConfig& cfg, Candidate c) {
    SolveResult r;
    r.gamma = cfg.gamma;
    r.beliefs = std::move(c.beliefs);
    r.free_energy = c.f;
    r.z = LogValue::from_log(-c.f);
    r.iterations = c.iterations;
    r.method = c.method;
    r.status = c.converged ? classify(r.beliefs, cfg.margin) : SolveStatus::non_converged;
    r.residual = stationarity_residual(r.beliefs, p, cfg.gamma, cfg.margin);
    return r;
}

}  // namespace

SolveResult solve_fractional(const WeightMatrix& p, const SolverConfig& cfg) {
    validate(cfg);
    if (!has_perfect_matching(p.pattern())) throw Error(ErrorCode::unsatisfiable, "matrix has no perfect matching");
    Candidate c = solve_with_fixed(p, cfg, {}, 0);
    if (!std::isfinite(c.f)) {
        // nothing feasible came back; report the raw attempt
        const Reduction red = reduce(p, {});
        const SubSolution sol = solve_sub(red.sub->p, cfg);
        c = assemble(p, red, &sol, cfg.gamma);
        c.converged = false;
    }
    const bool check_degenerate = cfg.polish && c.converged && c.singular;
    SolveResult r = finish(p, cfg, std::move(c));
    if (check_degenerate) {
        // restarts from the other initializations expose a flat family
        for (InitKind k : {InitKind::uniform, InitKind::max_matching_corner}) {
            if (k == cfg.init) continue;
            SolverConfig alt = cfg;
            alt.init = k;
            const Reduction red = reduce(p, {});
            if (!red.sub) break;
            const SubSolution sol = solve_sub(red.sub->p, alt, k);
            if (!sol.converged) continue;
            const Candidate other = assemble(p, red, &sol, cfg.gamma);
            double gap = 0.0;
            for (std::size_t e = 0; e < other.beliefs.beta.size(); ++e)
                gap = std::max(gap, std::fabs(other.beliefs.beta[e] - r.beliefs.beta[e]));
            if (gap > 1e-6 && std::fabs(other.f - r.free_energy) < 1e-9 * (1.0 + std::fabs(r.free_energy)))
                r.degenerate = true;
        }
    }
    return r;
}

SolveResult solve_mf(const WeightMatrix& p, SolverConfig cfg) {
    cfg.gamma = 1.0;
    return solve_fractional(p, cfg);
}

SolveResult solve_bp(const WeightMatrix& p, SolverConfig cfg) {
    cfg.gamma = -1.0;
    return solve_fractional(p, cfg);
}

// ---------------------------------------------------------------- identity

IdentityReport check_exact_identity(const WeightMatrix& p, const SolveResult& result, double gamma) {
    IdentityReport rep;
    if (result.status != SolveStatus::interior) {
        rep.reason = std::string("result is ") + to_string(result.status) + ", identity needs an interior point";
        return rep;
    }
    if (!(*result.beliefs.pattern == p.pattern())) {
        rep.reason = "beliefs and matrix have different supports";
        return rep;
    }
    rep.applicable = true;
    rep.lhs = exact_permanent(p);
    const WeightMatrix t = hadamard_transform(result.beliefs, gamma);
    double log_prod = 0.0;
    for (double b : result.beliefs.beta) log_prod += gamma * std::log1p(-b);
    const LogValue z = LogValue::from_log(-free_energy(result.beliefs, p, gamma));
    rep.rhs = z * exact_permanent(t) * LogValue::from_log(log_prod);
    rep.relative_gap = relative_difference(rep.lhs, rep.rhs);
    return rep;
}

}  // namespace fracperm
