#pragma once

#include <cmath>
#include <limits>
#include <ostream>

namespace fracperm {

/// Signed scalar stored as (sign, log|x|). Permanents and partition functions of
/// n ~ 40 matrices leave the double range, so everything at that scale goes
/// through this type.
class LogValue {
public:
    constexpr LogValue() = default;

    static constexpr LogValue zero() { return LogValue{}; }
    static LogValue one() { return from_log(0.0); }

    static LogValue from_log(double log_abs, int sign = 1) {
        LogValue v;
        if (sign == 0 || (std::isinf(log_abs) && log_abs < 0)) return v;
        v.log_abs_ = log_abs;
        v.sign_ = sign > 0 ? 1 : -1;
        return v;
    }

    static LogValue from_double(double x) {
        if (x == 0.0) return zero();
        return from_log(std::log(std::fabs(x)), x > 0 ? 1 : -1);
    }

    double log_abs() const { return log_abs_; }
    int sign() const { return sign_; }
    bool is_zero() const { return sign_ == 0; }

    /// Natural log of a positive value; -inf for zero, NaN for negatives.
    double log() const {
        if (sign_ == 0) return -std::numeric_limits<double>::infinity();
        if (sign_ < 0) return std::numeric_limits<double>::quiet_NaN();
        return log_abs_;
    }

    double to_double() const { return sign_ == 0 ? 0.0 : sign_ * std::exp(log_abs_); }

    LogValue operator-() const {
        LogValue v = *this;
        v.sign_ = -v.sign_;
        return v;
    }

    friend LogValue operator*(const LogValue& a, const LogValue& b) {
        if (a.sign_ == 0 || b.sign_ == 0) return zero();
        return from_log(a.log_abs_ + b.log_abs_, a.sign_ * b.sign_);
    }

    friend LogValue operator/(const LogValue& a, const LogValue& b) {
        if (b.sign_ == 0) {
            return from_log(std::numeric_limits<double>::infinity(), a.sign_ == 0 ? 1 : a.sign_);
        }
        if (a.sign_ == 0) return zero();
        return from_log(a.log_abs_ - b.log_abs_, a.sign_ * b.sign_);
    }

    friend LogValue operator+(const LogValue& a, const LogValue& b) {
        if (a.sign_ == 0) return b;
        if (b.sign_ == 0) return a;
        const LogValue& hi = a.log_abs_ >= b.log_abs_ ? a : b;
        const LogValue& lo = a.log_abs_ >= b.log_abs_ ? b : a;
        const double d = lo.log_abs_ - hi.log_abs_;
        if (hi.sign_ == lo.sign_) return from_log(hi.log_abs_ + std::log1p(std::exp(d)), hi.sign_);
        if (d == 0.0) return zero();
        return from_log(hi.log_abs_ + std::log1p(-std::exp(d)), hi.sign_);
    }

    friend LogValue operator-(const LogValue& a, const LogValue& b) { return a + (-b); }

    LogValue& operator+=(const LogValue& o) { return *this = *this + o; }
    LogValue& operator*=(const LogValue& o) { return *this = *this * o; }

    LogValue pow(double e) const {
        if (sign_ == 0) return e == 0.0 ? one() : zero();
        return from_log(log_abs_ * e, sign_ > 0 ? 1 : (std::fmod(std::fabs(e), 2.0) == 1.0 ? -1 : 1));
    }

    friend std::ostream& operator<<(std::ostream& os, const LogValue& v) {
        if (v.sign_ == 0) return os << "0";
        return os << (v.sign_ < 0 ? "-" : "") << "exp(" << v.log_abs_ << ")";
    }

private:
    double log_abs_ = -std::numeric_limits<double>::infinity();
    int sign_ = 0;
};

/// |a - b| / max(|a|, |b|) computed without leaving log space. 0 if both zero.
double relative_difference(const LogValue& a, const LogValue& b);

}  // namespace fracperm
