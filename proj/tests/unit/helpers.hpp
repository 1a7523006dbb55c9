#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fracperm/matrix.hpp"

namespace testutil {

/// Permanent by explicit enumeration of all n! permutations of a dense matrix
/// (independent of the library's depth-first oracle).
inline double permanent_by_permutations(const std::vector<std::vector<double>>& a) {
    const int n = static_cast<int>(a.size());
    std::vector<int> s(n);
    std::iota(s.begin(), s.end(), 0);
    double total = 0.0;
    do {
        double prod = 1.0;
        for (int i = 0; i < n; ++i) prod *= a[i][s[i]];
        total += prod;
    } while (std::next_permutation(s.begin(), s.end()));
    return total;
}

inline std::vector<std::vector<double>> to_rows(const fracperm::WeightMatrix& p) {
    std::vector<std::vector<double>> rows(p.n(), std::vector<double>(p.n(), 0.0));
    for (const auto& e : p.entries()) rows[e.row][e.col] = e.value;
    return rows;
}

inline double rel(double a, double b) {
    const double s = std::max(std::fabs(a), std::fabs(b));
    return s == 0.0 ? 0.0 : std::fabs(a - b) / s;
}

}  // namespace testutil
