#pragma once

#include <stdexcept>
#include <string>

namespace fracperm {

enum class ErrorCode {
    parse,
    negative_entry,
    dimension_mismatch,
    too_large,
    boundary_belief,
    support_violation,
    unsatisfiable,
    capacity,
    missing_weight,
    not_interior,
    invalid_argument,
    budget_exceeded,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace fracperm
