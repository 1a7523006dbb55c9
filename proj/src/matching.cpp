#include "fracperm/matching.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "fracperm/rng.hpp"

namespace fracperm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Assignment {
    bool feasible = false;
    std::vector<int> col_of_row;
    std::vector<double> u, v;  // duals: cost_ij - u_i - v_j >= 0
};

// Shortest augmenting path assignment (Hungarian method with potentials),
// iterating only over stored entries of each row.
Assignment solve_assignment(const SparsityPattern& pat, const std::vector<double>& cost) {
    const int n = pat.n();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> row_of(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    Assignment out;
    for (int i = 1; i <= n; ++i) {
        row_of[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = row_of[j0];
            for (std::size_t e = pat.row_begin(i0 - 1); e < pat.row_end(i0 - 1); ++e) {
                const int j = pat.col(e) + 1;
                if (used[j]) continue;
                const double cur = cost[e] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
            }
            double delta = kInf;
            int j1 = -1;
            for (int j = 1; j <= n; ++j)
                if (!used[j] && minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            if (j1 < 0) return out;
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of[j0] != 0);
        do {
            const int j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
        } while (j0);
    }
    out.feasible = true;
    out.col_of_row.assign(n, -1);
    for (int j = 1; j <= n; ++j) out.col_of_row[row_of[j] - 1] = j - 1;
    out.u.assign(u.begin() + 1, u.end());
    out.v.assign(v.begin() + 1, v.end());
    return out;
}

std::vector<double> log_costs(const WeightMatrix& p) {
    static const double floor = std::log(std::numeric_limits<double>::denorm_min());
    std::vector<double> c(p.nnz());
    for (std::size_t e = 0; e < c.size(); ++e) c[e] = -std::max(std::log(p.value(e)), floor);
    return c;
}

// Edges whose reduced cost is zero up to rounding: exactly the edges that
// appear in some optimal matching.
std::vector<std::vector<int>> tight_graph(const SparsityPattern& pat, const std::vector<double>& cost, const Assignment& a) {
    double scale = 1.0;
    for (double c : cost) scale = std::max(scale, std::fabs(c));
    const double eps = 1e-11 * scale * pat.n();
    std::vector<std::vector<int>> adj(pat.n());
    for (int i = 0; i < pat.n(); ++i)
        for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e)
            if (cost[e] - a.u[i] - a.v[pat.col(e)] <= eps || a.col_of_row[i] == pat.col(e)) adj[i].push_back(pat.col(e));
    return adj;
}

// Rewrites `match` into the lexicographically smallest perfect matching of
// the tight graph.
void lexicographic_min(const std::vector<std::vector<int>>& adj, std::vector<int>& match) {
    const int n = static_cast<int>(adj.size());
    std::vector<int> row_of(n);
    for (int i = 0; i < n; ++i) row_of[match[i]] = i;
    std::vector<char> col_fixed(n, 0), seen(n);

    for (int i = 0; i < n; ++i) {
        for (int j : adj[i]) {
            if (col_fixed[j]) continue;
            if (j == match[i]) break;
            // Give column j to row i; its old row r must reach i's old column.
            const int r = row_of[j], free_col = match[i];
            std::fill(seen.begin(), seen.end(), 0);
            std::vector<int> trial_match = match, trial_row = row_of;
            trial_match[i] = j;
            trial_row[j] = i;
            trial_match[r] = -1;
            trial_row[free_col] = -1;
            std::function<bool(int)> augment = [&](int row) {
                for (int c : adj[row]) {
                    if (col_fixed[c] || c == j || seen[c]) continue;
                    seen[c] = 1;
                    if (trial_row[c] < 0 || augment(trial_row[c])) {
                        trial_match[row] = c;
                        trial_row[c] = row;
                        return true;
                    }
                }
                return false;
            };
            if (augment(r)) {
                match = std::move(trial_match);
                row_of = std::move(trial_row);
                break;
            }
        }
        col_fixed[match[i]] = 1;
    }
}

// A second perfect matching exists iff the tight graph has an alternating
// cycle: row i -> row_of[j] for each non-matching tight edge (i, j).
bool has_alternating_cycle(const std::vector<std::vector<int>>& adj, const std::vector<int>& match) {
    const int n = static_cast<int>(adj.size());
    std::vector<int> row_of(n);
    for (int i = 0; i < n; ++i) row_of[match[i]] = i;
    std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
    std::function<bool(int)> dfs = [&](int i) {
        state[i] = 1;
        for (int j : adj[i]) {
            if (j == match[i]) continue;
            const int r = row_of[j];
            if (state[r] == 1 || (state[r] == 0 && dfs(r))) return true;
        }
        state[i] = 2;
        return false;
    };
    for (int i = 0; i < n; ++i)
        if (state[i] == 0 && dfs(i)) return true;
    return false;
}

LogValue matching_value(const WeightMatrix& p, const std::vector<int>& perm) {
    LogValue v = LogValue::one();
    for (int i = 0; i < p.n(); ++i) v *= LogValue::from_double(p.at(i, perm[i]));
    return v;
}

struct Solved {
    Matching matching;
    Assignment assignment;
    std::vector<std::vector<int>> tight;
};

Solved solve(const WeightMatrix& p) {
    Solved s;
    const std::vector<double> cost = log_costs(p);
    s.assignment = solve_assignment(p.pattern(), cost);
    if (!s.assignment.feasible) {
        s.matching.perm.assign(p.n(), -1);
        return s;
    }
    s.tight = tight_graph(p.pattern(), cost, s.assignment);
    std::vector<int> perm = s.assignment.col_of_row;
    lexicographic_min(s.tight, perm);
    s.matching.feasible = true;
    s.matching.value = matching_value(p, perm);
    s.matching.perm = std::move(perm);
    return s;
}

}  // namespace

Matching max_weight_matching(const WeightMatrix& p) { return solve(p).matching; }

Matching forced_matching(const WeightMatrix& p, int i, int j) {
    const int n = p.n();
    Matching out;
    out.perm.assign(n, -1);
    const auto e = p.pattern().find(i, j);
    if (e < 0) return out;
    if (n == 1) {
        out.feasible = true;
        out.perm[0] = 0;
        out.value = LogValue::from_double(p.value(static_cast<std::size_t>(e)));
        return out;
    }
    // minor without row i and column j, re-indexed
    std::vector<Entry> minor;
    for (const Entry& x : p.entries()) {
        if (x.row == i || x.col == j) continue;
        minor.push_back({x.row - (x.row > i), x.col - (x.col > j), x.value});
    }
    const Matching sub = max_weight_matching(WeightMatrix(n - 1, std::move(minor)));
    if (!sub.feasible) return out;
    for (int r = 0; r < n - 1; ++r) {
        const int c = sub.perm[r];
        out.perm[r + (r >= i)] = c + (c >= j);
    }
    out.perm[i] = j;
    out.feasible = true;
    out.value = sub.value * LogValue::from_double(p.value(static_cast<std::size_t>(e)));
    return out;
}

LpCheckReport z_ml_equals_z_lp_check(const WeightMatrix& p, std::uint64_t seed) {
    LpCheckReport r;
    const Solved s = solve(p);
    r.feasible = s.matching.feasible;
    r.perm = s.matching.perm;
    if (!r.feasible) return r;
    r.z_ml = s.matching.value;
    r.z_lp = r.z_ml;
    r.tie = has_alternating_cycle(s.tight, s.matching.perm);

    Rng rng(seed, 0x6A1773);
    std::vector<double> jittered(p.values().begin(), p.values().end());
    for (double& x : jittered) x *= 1.0 + 1e-9 * (2.0 * rng.uniform() - 1.0);
    const Matching mj = max_weight_matching(WeightMatrix(p.pattern_ptr(), std::move(jittered)));
    // value of the jittered optimum under the original weights
    r.jitter_gap = mj.feasible ? relative_difference(matching_value(p, mj.perm), r.z_ml) : 1.0;
    r.lp_equals_ml = mj.feasible && r.jitter_gap <= 1e-9 * (2.0 * p.n() + 1.0);
    return r;
}

namespace {

// Kuhn's augmenting paths; row_of[c] = row matched to column c.
bool find_perfect_matching(const SparsityPattern& pat, std::vector<int>& row_of) {
    const int n = pat.n();
    row_of.assign(n, -1);
    std::vector<char> seen(n);
    std::function<bool(int)> augment = [&](int i) {
        for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e) {
            const int c = pat.col(e);
            if (seen[c]) continue;
            seen[c] = 1;
            if (row_of[c] < 0 || augment(row_of[c])) {
                row_of[c] = i;
                return true;
            }
        }
        return false;
    };
    for (int i = 0; i < n; ++i) {
        std::fill(seen.begin(), seen.end(), 0);
        if (!augment(i)) return false;
    }
    return true;
}

}  // namespace

bool has_perfect_matching(const SparsityPattern& pat) {
    std::vector<int> row_of;
    return find_perfect_matching(pat, row_of);
}

std::vector<char> allowed_edges(const SparsityPattern& pat) {
    const int n = pat.n();
    std::vector<char> allowed(pat.size(), 0);
    std::vector<int> row_of;
    if (!find_perfect_matching(pat, row_of)) return allowed;
    std::vector<int> col_of(n);
    for (int c = 0; c < n; ++c) col_of[row_of[c]] = c;

    // (i, j) off the matching lies on an alternating cycle iff i and the row
    // matched to j share a strongly connected component of i -> row_of[j].
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1), stack;
    std::vector<char> on_stack(n, 0);
    int counter = 0, ncomp = 0;
    std::function<void(int)> strongconnect = [&](int v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = 1;
        for (std::size_t e = pat.row_begin(v); e < pat.row_end(v); ++e) {
            const int w = row_of[pat.col(e)];
            if (w == v) continue;
            if (index[w] < 0) {
                strongconnect(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            int w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = 0;
                comp[w] = ncomp;
            } while (w != v);
            ++ncomp;
        }
    };
    for (int v = 0; v < n; ++v)
        if (index[v] < 0) strongconnect(v);
    for (std::size_t e = 0; e < pat.size(); ++e) {
        const int i = pat.row(e), j = pat.col(e);
        allowed[e] = col_of[i] == j || comp[i] == comp[row_of[j]];
    }
    return allowed;
}

}  // namespace fracperm
