#include "fracperm/exact.hpp"

#include "fracperm/errors.hpp"
#include "fracperm/ryser.hpp"
#include "fracperm/zdd.hpp"

namespace fracperm {

ExactMethod parse_exact_method(const std::string& name) {
    if (name == "auto") return ExactMethod::automatic;
    if (name == "brute") return ExactMethod::brute;
    if (name == "ryser") return ExactMethod::ryser;
    if (name == "zdd") return ExactMethod::zdd;
    throw Error(ErrorCode::invalid_argument, "unknown exact method '" + name + "'");
}

const char* to_string(ExactMethod method) {
    switch (method) {
        case ExactMethod::automatic: return "auto";
        case ExactMethod::brute: return "brute";
        case ExactMethod::ryser: return "ryser";
        case ExactMethod::zdd: return "zdd";
    }
    return "unknown";
}

ExactMethod auto_exact_method(const WeightMatrix& p) {
    if (p.n() <= 9) return ExactMethod::brute;
    if (p.n() <= 26) return ExactMethod::ryser;
    return ExactMethod::zdd;
}

LogValue exact_permanent(const WeightMatrix& p, ExactMethod method, CostCounter* counter) {
    if (method == ExactMethod::automatic) method = auto_exact_method(p);
    switch (method) {
        case ExactMethod::brute: return brute_force_permanent(p);
        case ExactMethod::ryser: return ryser_permanent(p, counter);
        case ExactMethod::zdd: return zdd_permanent(p, counter);
        case ExactMethod::automatic: break;
    }
    throw Error(ErrorCode::invalid_argument, "unknown exact method");
}

}  // namespace fracperm
