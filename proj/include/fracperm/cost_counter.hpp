#pragma once

#include <cstdint>
#include <limits>

#include "fracperm/errors.hpp"

namespace fracperm {

/// Memory-access tally used to compare exact engines on equal footing.
/// An optional budget turns runaway computations into a budget_exceeded error.
struct CostCounter {
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t budget = std::numeric_limits<std::uint64_t>::max();

    std::uint64_t total() const { return reads + writes; }

    void read(std::uint64_t k = 1) { reads += k; }
    void write(std::uint64_t k = 1) { writes += k; }

    void check_budget() const {
        if (total() > budget) throw Error(ErrorCode::budget_exceeded, "cost budget exceeded");
    }
};

}  // namespace fracperm
