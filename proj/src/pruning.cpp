#include "fracperm/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fracperm/errors.hpp"

namespace fracperm {

EdgeScores score_edges(const WeightMatrix& p) {
    EdgeScores s;
    s.best = max_weight_matching(p);
    if (!s.best.feasible) throw Error(ErrorCode::unsatisfiable, "score_edges: no perfect matching");
    const auto& pat = p.pattern();
    const double log_best = s.best.value.log();
    s.score.assign(p.nnz(), 0.0);
    for (std::size_t e = 0; e < p.nnz(); ++e) {
        const int i = pat.row(e), j = pat.col(e);
        if (s.best.perm[i] == j) {
            s.score[e] = 1.0;
            continue;
        }
        const Matching f = forced_matching(p, i, j);
        if (f.feasible) s.score[e] = std::exp(std::min(0.0, f.value.log() - log_best));
    }
    return s;
}

namespace {

WeightMatrix keep_with_matching(const WeightMatrix& p, const EdgeScores& scores, std::vector<char>& keep) {
    const auto& pat = p.pattern();
    for (int i = 0; i < p.n(); ++i) keep[static_cast<std::size_t>(pat.find(i, scores.best.perm[i]))] = 1;
    std::vector<std::size_t> ids;
    for (std::size_t e = 0; e < keep.size(); ++e)
        if (keep[e]) ids.push_back(e);
    return p.restrict_to(ids);
}

}  // namespace

WeightMatrix prune_threshold(const WeightMatrix& p, const EdgeScores& scores, double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorCode::invalid_argument, "prune ratio must lie in (0, 1]");
    std::vector<char> keep(p.nnz(), 0);
    // scores come back through exp(log), so allow a few ulps below the ratio
    for (std::size_t e = 0; e < p.nnz(); ++e) keep[e] = scores.score[e] >= ratio * (1.0 - 1e-12);
    return keep_with_matching(p, scores, keep);
}

WeightMatrix prune_threshold(const WeightMatrix& p, double ratio) {
    return prune_threshold(p, score_edges(p), ratio);
}

WeightMatrix prune_fraction(const WeightMatrix& p, const EdgeScores& scores, double keep_fraction) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
        throw Error(ErrorCode::invalid_argument, "keep fraction must lie in (0, 1]");
    const std::size_t m = p.nnz();
    // guard against 0.4 * 400 landing a hair above 160
    const auto k = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(m) - 1e-9));
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // edge ids are row-major, so the id is the (i, j) tie-break
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores.score[a] > scores.score[b]; });
    std::vector<char> keep(m, 0);
    for (std::size_t r = 0; r < std::min(k, m); ++r) keep[order[r]] = 1;
    return keep_with_matching(p, scores, keep);
}

WeightMatrix prune_fraction(const WeightMatrix& p, double keep_fraction) {
    return prune_fraction(p, score_edges(p), keep_fraction);
}

}  // namespace fracperm
