#include "fracperm/ryser.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

namespace fracperm {

namespace {

struct Scaled {
    std::vector<double> values;
    double log_scale = 0.0;
    bool zero_row = false;
};

Scaled scale_rows(const WeightMatrix& p) {
    const auto& pat = p.pattern();
    Scaled s{std::vector<double>(p.values().begin(), p.values().end())};
    for (int i = 0; i < p.n(); ++i) {
        double mx = 0.0;
        for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e) mx = std::max(mx, s.values[e]);
        if (mx == 0.0) {
            s.zero_row = true;
            return s;
        }
        for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e) s.values[e] /= mx;
        s.log_scale += std::log(mx);
    }
    return s;
}

void check_size(const WeightMatrix& p) {
    if (p.n() > kRyserMaxN)
        throw Error(ErrorCode::too_large, "ryser_permanent limited to n <= " + std::to_string(kRyserMaxN));
}

}  // namespace

LogValue ryser_permanent(const WeightMatrix& p, CostCounter* counter) {
    check_size(p);
    const int n = p.n();
    const auto& pat = p.pattern();
    const Scaled s = scale_rows(p);
    if (s.zero_row) return LogValue::zero();

    // Each row-sum cell carries the number of set columns touching it, so an
    // empty intersection is an exact zero instead of add/subtract residue.
    std::vector<long double> row_sum(n, 0.0L);
    std::vector<int> row_hits(n, 0);
    std::vector<char> in_set(n, 0);
    long double total = 0.0L;
    int set_size = 0;
    std::uint64_t reads = 0, writes = 0;

    const std::uint64_t steps = std::uint64_t{1} << n;
    for (std::uint64_t k = 1; k < steps; ++k) {
        const int j = std::countr_zero(k);
        const bool add = !in_set[j];
        in_set[j] = add;
        set_size += add ? 1 : -1;
        auto col = pat.col_edges(j);
        for (std::size_t e : col) {
            const int r = pat.row(e);
            if (add) {
                row_sum[r] += s.values[e];
                ++row_hits[r];
            } else if (--row_hits[r] == 0) {
                row_sum[r] = 0.0L;
            } else {
                row_sum[r] -= s.values[e];
            }
        }
        reads += col.size();
        writes += col.size();

        long double prod = 1.0L;
        int touched = 0;
        for (int i = 0; i < n; ++i) {
            ++touched;
            if (row_hits[i] == 0) {
                prod = 0.0L;
                break;
            }
            prod *= row_sum[i];
        }
        reads += static_cast<std::uint64_t>(touched);
        total += (set_size & 1) ? -prod : prod;
    }
    if (n & 1) total = -total;
    if (counter) {
        counter->read(reads);
        counter->write(writes);
    }
    return LogValue::from_double(static_cast<double>(total)) * LogValue::from_log(s.log_scale);
}

LogValue ryser_permanent_naive(const WeightMatrix& p) {
    check_size(p);
    const int n = p.n();
    const auto& pat = p.pattern();
    const Scaled s = scale_rows(p);
    if (s.zero_row) return LogValue::zero();

    long double total = 0.0L;
    const std::uint64_t steps = std::uint64_t{1} << n;
    for (std::uint64_t mask = 1; mask < steps; ++mask) {
        long double prod = 1.0L;
        for (int i = 0; i < n && prod != 0.0L; ++i) {
            long double rs = 0.0L;
            for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e)
                if (mask >> pat.col(e) & 1) rs += s.values[e];
            prod *= rs;
        }
        total += (std::popcount(mask) & 1) ? -prod : prod;
    }
    if (n & 1) total = -total;
    return LogValue::from_double(static_cast<double>(total)) * LogValue::from_log(s.log_scale);
}

}  // namespace fracperm
