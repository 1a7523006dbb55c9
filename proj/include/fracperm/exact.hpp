#pragma once

#include <string>

#include "fracperm/cost_counter.hpp"
#include "fracperm/log_value.hpp"
#include "fracperm/matrix.hpp"

namespace fracperm {

enum class ExactMethod { automatic, brute, ryser, zdd };

ExactMethod parse_exact_method(const std::string& name);
const char* to_string(ExactMethod method);

/// Engine picked for a matrix: brute force up to n = 9, Ryser up to n = 26,
/// ZDD beyond.
ExactMethod auto_exact_method(const WeightMatrix& p);

LogValue exact_permanent(const WeightMatrix& p, ExactMethod method = ExactMethod::automatic,
                         CostCounter* counter = nullptr);

}  // namespace fracperm
