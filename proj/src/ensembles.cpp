#include "fracperm/ensembles.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "fracperm/errors.hpp"
#include "fracperm/rng.hpp"

namespace fracperm {

namespace {

void check_n(int n, int min_n = 1) {
    if (n < min_n) throw Error(ErrorCode::invalid_argument, "matrix side too small");
}

void check_positive(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) throw Error(ErrorCode::invalid_argument, std::string(what) + " must be positive");
}

template <class Draw>
WeightMatrix iid(int n, Draw draw) {
    std::vector<double> d(static_cast<std::size_t>(n) * n);
    for (double& x : d) x = draw();
    return WeightMatrix::from_dense(n, d);
}

}  // namespace

std::array<double, 4> flow_propagator(const FlowParams& f) {
    const double a = f.a * f.dt, b = f.b * f.dt, c = f.c * f.dt;
    const std::array<double, 4> m{a, b + c, b - c, -a};
    // A traceless 2x2 matrix squares to delta * I.
    const double delta = a * a + b * b - c * c;
    double c0, c1;
    if (delta > 0) {
        const double r = std::sqrt(delta);
        c0 = std::cosh(r);
        c1 = std::sinh(r) / r;
    } else if (delta < 0) {
        const double r = std::sqrt(-delta);
        c0 = std::cos(r);
        c1 = std::sin(r) / r;
    } else {
        c0 = 1.0;
        c1 = 1.0;
    }
    return {c0 + c1 * m[0], c1 * m[1], c1 * m[2], c0 + c1 * m[3]};
}

WeightMatrix gen_flow(int n, const FlowParams& in, const FlowParams& out, std::uint64_t seed) {
    check_n(n, 2);
    check_positive(in.kappa, "kappa_in");
    check_positive(out.kappa, "kappa_out");
    check_positive(in.dt, "dt_in");
    check_positive(out.dt, "dt_out");
    Rng rng(seed);
    std::vector<double> x(2 * n), y(2 * n);
    for (double& v : x) v = rng.uniform();
    const auto ein = flow_propagator(in);
    const auto eout = flow_propagator(out);
    const std::vector<int> s = rng.permutation(n);
    const double sd = std::sqrt(2.0 * in.kappa * in.dt);
    for (int i = 0; i < n; ++i) {
        const double px = x[2 * s[i]], py = x[2 * s[i] + 1];
        y[2 * i] = ein[0] * px + ein[1] * py + sd * rng.normal();
        y[2 * i + 1] = ein[2] * px + ein[3] * py + sd * rng.normal();
    }
    std::vector<double> d(static_cast<std::size_t>(n) * n);
    const double denom = 4.0 * out.kappa * out.dt;
    for (int i = 0; i < n; ++i) {
        const double qx = eout[0] * x[2 * i] + eout[1] * x[2 * i + 1];
        const double qy = eout[2] * x[2 * i] + eout[3] * x[2 * i + 1];
        for (int j = 0; j < n; ++j) {
            const double dx = y[2 * j] - qx, dy = y[2 * j + 1] - qy;
            d[static_cast<std::size_t>(i) * n + j] = std::exp(-(dx * dx + dy * dy) / denom);
        }
    }
    return WeightMatrix::from_dense(n, d);
}

WeightMatrix gen_uniform(int n, double rho, std::uint64_t seed) {
    check_n(n);
    check_positive(rho, "rho");
    Rng rng(seed);
    return iid(n, [&] { return rho * rng.uniform_open0(); });
}

WeightMatrix gen_exponential(int n, double delta, std::uint64_t seed) {
    check_n(n);
    check_positive(delta, "delta");
    Rng rng(seed);
    // -log of a (0,1] draw is 0 only for u = 1; redraw to keep full support
    return iid(n, [&] {
        double v;
        do v = rng.exponential(delta);
        while (v == 0.0);
        return v;
    });
}

WeightMatrix gen_shifted(int n, double rho, std::uint64_t seed) {
    check_n(n, 2);
    if (n % 2) throw Error(ErrorCode::invalid_argument, "shifted ensemble needs even n");
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw Error(ErrorCode::invalid_argument, "rho must be >= 0");
    Rng rng(seed);
    std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double v = (i / 2 == j / 2) ? 0.5 : 0.0;
            if (rho > 0.0) v += rho * rng.uniform_open0();
            d[static_cast<std::size_t>(i) * n + j] = v;
        }
    return WeightMatrix::from_dense(n, d);
}

WeightMatrix gen_pdet(int n, double w, double T) {
    check_n(n);
    check_positive(w, "w");
    check_positive(T, "T");
    const double diag = std::pow(w, 1.0 / T);
    std::vector<double> d(static_cast<std::size_t>(n) * n, 1.0);
    for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i) * n + i] = diag;
    return WeightMatrix::from_dense(n, d);
}

double derangements(int k) {
    if (k < 0) return 0.0;
    double prev2 = 1.0, prev1 = 0.0;  // D_0, D_1
    if (k == 0) return prev2;
    for (int m = 2; m <= k; ++m) {
        const double cur = (m - 1) * (prev1 + prev2);
        prev2 = prev1;
        prev1 = cur;
    }
    return prev1;
}

LogValue pdet_exact(int n, double w, double T) {
    check_n(n);
    check_positive(w, "w");
    check_positive(T, "T");
    const double logw = std::log(w) / T;
    // log D_k through the same recursion in log space so large n stays finite
    std::vector<double> log_d(n + 1, -INFINITY);
    log_d[0] = 0.0;
    for (int k = 2; k <= n; ++k) {
        const LogValue s = LogValue::from_log(log_d[k - 1]) + LogValue::from_log(log_d[k - 2]);
        log_d[k] = std::log(static_cast<double>(k - 1)) + s.log();
    }
    LogValue total = LogValue::zero();
    for (int k = 0; k <= n; ++k) {
        if (k == 1) continue;
        const double log_binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        total += LogValue::from_log((n - k) * logw + log_binom + log_d[k]);
    }
    return total;
}

EnsembleKind parse_ensemble_kind(const std::string& name) {
    if (name == "flow") return EnsembleKind::flow;
    if (name == "uniform") return EnsembleKind::uniform;
    if (name == "exp" || name == "exponential") return EnsembleKind::exponential;
    if (name == "shifted") return EnsembleKind::shifted;
    if (name == "pdet") return EnsembleKind::pdet;
    throw Error(ErrorCode::invalid_argument, "unknown ensemble '" + name + "'");
}

const char* to_string(EnsembleKind kind) {
    switch (kind) {
        case EnsembleKind::flow: return "flow";
        case EnsembleKind::uniform: return "uniform";
        case EnsembleKind::exponential: return "exp";
        case EnsembleKind::shifted: return "shifted";
        case EnsembleKind::pdet: return "pdet";
    }
    return "unknown";
}

WeightMatrix generate(const EnsembleSpec& spec, int n, std::uint64_t seed) {
    switch (spec.kind) {
        case EnsembleKind::flow: return gen_flow(n, spec.flow_in, spec.flow_out, seed);
        case EnsembleKind::uniform: return gen_uniform(n, spec.rho, seed);
        case EnsembleKind::exponential: return gen_exponential(n, spec.delta, seed);
        case EnsembleKind::shifted: return gen_shifted(n, spec.rho, seed);
        case EnsembleKind::pdet: return gen_pdet(n, spec.w, spec.T);
    }
    throw Error(ErrorCode::invalid_argument, "unknown ensemble");
}

std::string describe(const EnsembleSpec& spec) {
    std::ostringstream os;
    os.precision(17);
    os << to_string(spec.kind);
    switch (spec.kind) {
        case EnsembleKind::uniform:
        case EnsembleKind::shifted: os << " rho=" << spec.rho; break;
        case EnsembleKind::exponential: os << " delta=" << spec.delta; break;
        case EnsembleKind::pdet: os << " w=" << spec.w << " T=" << spec.T; break;
        case EnsembleKind::flow:
            for (const auto* f : {&spec.flow_in, &spec.flow_out})
                os << (f == &spec.flow_in ? " in=(" : " out=(") << f->a << ',' << f->b << ',' << f->c << ',' << f->kappa
                   << ',' << f->dt << ')';
            break;
    }
    return os.str();
}

}  // namespace fracperm
