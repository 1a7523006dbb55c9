#include <doctest.h>

#include <cmath>

#include "fracperm/ensembles.hpp"
#include "fracperm/errors.hpp"
#include "fracperm/variational.hpp"
#include "helpers.hpp"

using namespace fracperm;

namespace {

SolverConfig at(double gamma) {
    SolverConfig c;
    c.gamma = gamma;
    return c;
}

// Free energy straight from the dense definition.
double dense_free_energy(const std::vector<std::vector<double>>& beta, const std::vector<std::vector<double>>& p,
                         double gamma) {
    double f = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double b = beta[i][j];
            if (b > 0.0) f += b * std::log(b / p[i][j]);
            if (b > 0.0 && b < 1.0) f += gamma * (1.0 - b) * std::log(1.0 - b);
        }
    return f;
}

std::vector<std::vector<double>> dense_beliefs(const Beliefs& b) {
    std::vector<std::vector<double>> out(b.n(), std::vector<double>(b.n(), 0.0));
    for (std::size_t e = 0; e < b.beta.size(); ++e) out[b.pattern->row(e)][b.pattern->col(e)] = b.beta[e];
    return out;
}

// Diagonal belief of the symmetric stationary point of the pdet matrix: with
// d = 1 - (n - 1) e on the diagonal and e elsewhere,
// d (1 - d)^(-gamma) / (e (1 - e)^(-gamma)) = w^(1/T).
double pdet_diagonal(int n, double w, double T, double gamma) {
    const double target = std::log(w) / T;
    auto g = [&](double e) {
        const double d = 1.0 - (n - 1) * e;
        return std::log(d) - gamma * std::log1p(-d) - std::log(e) + gamma * std::log1p(-e) - target;
    };
    double lo = 1e-300, hi = 1.0 / n;  // g(lo) > 0, g(hi) <= 0 for w > 1
    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    return 1.0 - (n - 1) * 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("all-ones matrices have closed-form optima") {
    // 2 x 2 at gamma = -1: beta = 1/2 and F = 0
    const SolveResult r2 = solve_bp(WeightMatrix::from_rows({{1, 1}, {1, 1}}));
    CHECK(r2.status == SolveStatus::interior);
    for (double b : r2.beliefs.beta) CHECK(b == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::fabs(r2.free_energy) < 1e-12);

    // 3 x 3 at gamma = -1: Z = 64 / 27
    const SolveResult r3 = solve_bp(WeightMatrix::from_rows({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}}));
    CHECK(r3.z.to_double() == doctest::Approx(64.0 / 27.0).epsilon(1e-12));

    // every gamma: symmetric point beta = 1/n, F = n log(1/n) + gamma n (n - 1) log(1 - 1/n)
    for (int n : {2, 3, 4, 5})
        for (double gamma : {-1.0, -0.6, 0.0, 0.4, 1.0}) {
            std::vector<double> ones(static_cast<std::size_t>(n) * n, 1.0);
            const SolveResult r = solve_fractional(WeightMatrix::from_dense(n, ones), at(gamma));
            CHECK(r.status == SolveStatus::interior);
            for (double b : r.beliefs.beta) CHECK(b == doctest::Approx(1.0 / n).epsilon(1e-10));
            const double f = n * std::log(1.0 / n) + gamma * n * (n - 1) * std::log1p(-1.0 / n);
            CHECK(r.free_energy == doctest::Approx(f).epsilon(1e-11));
        }
}

TEST_CASE("solutions are stationary, doubly stochastic and satisfy the product identity") {
    for (std::uint64_t seed = 0; seed < 6; ++seed)
        for (double gamma : {-1.0, -0.7, -0.3, 0.0, 0.5, 1.0}) {
            const int n = 4 + static_cast<int>(seed % 4);
            const WeightMatrix p = seed % 2 ? gen_exponential(n, 1.5, seed) : gen_uniform(n, 0.6, seed);
            const SolveResult r = solve_fractional(p, at(gamma));
            REQUIRE(r.status == SolveStatus::interior);
            CHECK(r.beliefs.max_ds_deviation() < 1e-9);
            CHECK(r.residual < 1e-9);
            CHECK(r.free_energy == doctest::Approx(dense_free_energy(dense_beliefs(r.beliefs), testutil::to_rows(p), gamma)).epsilon(1e-12));

            // identity with permanents from explicit enumeration
            const double lhs = testutil::permanent_by_permutations(testutil::to_rows(p));
            auto t = dense_beliefs(r.beliefs);
            double prod = 1.0;
            for (auto& row : t)
                for (double& b : row) {
                    if (b > 0.0) prod *= std::pow(1.0 - b, gamma);
                    if (b > 0.0) b = b * std::pow(1.0 - b, -gamma);
                }
            const double rhs = r.z.to_double() * testutil::permanent_by_permutations(t) * prod;
            CHECK(testutil::rel(lhs, rhs) < 1e-10);
            const IdentityReport id = check_exact_identity(p, r, gamma);
            CHECK(id.applicable);
            CHECK(id.relative_gap < 1e-10);
        }
}

TEST_CASE("the solution is a local minimum along doubly stochastic directions") {
    for (std::uint64_t seed = 0; seed < 5; ++seed)
        for (double gamma : {-1.0, -0.5, 0.5}) {
            const WeightMatrix p = gen_uniform(5, 1.0, seed + 100);
            const SolveResult r = solve_fractional(p, at(gamma));
            REQUIRE(r.status == SolveStatus::interior);
            const auto rows = testutil::to_rows(p);
            const auto beta = dense_beliefs(r.beliefs);
            const double f0 = dense_free_energy(beta, rows, gamma);
            for (int i = 0; i < 5; ++i)
                for (int l = i + 1; l < 5; ++l)
                    for (int j = 0; j < 5; ++j)
                        for (int k = j + 1; k < 5; ++k)
                            for (double eps : {1e-4, -1e-4}) {
                                auto b = beta;
                                b[i][j] += eps;
                                b[i][k] -= eps;
                                b[l][k] += eps;
                                b[l][j] -= eps;
                                CHECK(dense_free_energy(b, rows, gamma) >= f0 - 1e-13);
                            }
        }
}

TEST_CASE("Z is non-decreasing in gamma") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const WeightMatrix p = gen_exponential(6, 2.0, seed);
        double prev = -1e300;
        for (double gamma = -1.0; gamma <= 1.0 + 1e-12; gamma += 0.25) {
            const SolveResult r = solve_fractional(p, at(gamma));
            CHECK(r.z.log() >= prev - 1e-10);
            prev = r.z.log();
        }
    }
}

TEST_CASE("mean field matches the plain multiplicative iteration") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const WeightMatrix p = gen_uniform(6, 0.8, seed);
        const SolveResult polished = solve_mf(p);
        SolverConfig raw;
        raw.polish = false;
        raw.tol = 1e-14;
        const SolveResult plain = solve_mf(p, raw);
        CHECK(plain.status == SolveStatus::interior);
        for (std::size_t e = 0; e < p.nnz(); ++e)
            CHECK(plain.beliefs.beta[e] == doctest::Approx(polished.beliefs.beta[e]).epsilon(1e-9));
        CHECK(polished.gamma == 1.0);
    }
}

TEST_CASE("the damped scheme alone reaches the same point, the (1 + beta) factor does not") {
    const WeightMatrix p = gen_uniform(6, 0.7, 11);
    for (double gamma : {-1.0, -0.6, -0.2}) {
        const SolveResult ref = solve_fractional(p, at(gamma));
        SolverConfig c = at(gamma);
        c.polish = false;
        c.tol = 1e-13;
        const SolveResult it = solve_fractional(p, c);
        REQUIRE(it.status == SolveStatus::interior);
        for (std::size_t e = 0; e < p.nnz(); ++e) CHECK(it.beliefs.beta[e] == doctest::Approx(ref.beliefs.beta[e]).epsilon(1e-8));
        CHECK(it.residual < 1e-7);

        c.factor = NegativeGammaFactor::one_plus_beta;
        const SolveResult typo = solve_fractional(p, c);
        if (gamma == -1.0) {
            CHECK(typo.residual < 1e-7);
        } else if (typo.status != SolveStatus::non_converged) {
            CHECK(typo.residual > 1e-3);
        }
    }
}

TEST_CASE("pdet matrices: symmetric interior point, then the identity corner") {
    for (double gamma : {-1.0, -0.5, 0.0}) {
        const int n = 6;
        const double w = 2.0, T = 1.0;
        const SolveResult r = solve_fractional(gen_pdet(n, w, T), at(gamma));
        REQUIRE(r.status == SolveStatus::interior);
        const double d = pdet_diagonal(n, w, T, gamma);
        for (int i = 0; i < n; ++i) CHECK(r.beliefs.at(i, i) == doctest::Approx(d).epsilon(1e-9));
    }
    // cold: the diagonal wins outright
    for (double gamma : {-1.0, -0.3}) {
        const int n = 6;
        const WeightMatrix p = gen_pdet(n, 2.0, 0.05);
        const SolveResult r = solve_fractional(p, at(gamma));
        CHECK(r.status == SolveStatus::boundary);
        // gamma = -1 sits exactly on the corner; above it the minimizer can be
        // interior but within the margin, and never worse than the corner
        const double corner = -n * std::log(p.at(0, 0));
        if (gamma == -1.0) CHECK(r.free_energy == doctest::Approx(corner).epsilon(1e-14));
        CHECK(r.free_energy <= corner + 1e-12);
        CHECK(r.free_energy == doctest::Approx(corner).epsilon(1e-8));
    }
}

TEST_CASE("2x2 block matrices give a flat family at gamma = -1") {
    const int n = 6, k = n / 2;
    const WeightMatrix p = gen_shifted(n, 0.0, 1);
    const SolveResult bp = solve_bp(p);
    CHECK(bp.degenerate);
    CHECK(bp.z.log() == doctest::Approx(-2.0 * k * std::log(2.0)).epsilon(1e-12));
    // the same F anywhere on the family
    Beliefs shifted = bp.beliefs;
    for (std::size_t e = 0; e < shifted.beta.size(); ++e) {
        const int i = shifted.pattern->row(e), j = shifted.pattern->col(e);
        shifted.beta[e] = (i % 2 == j % 2) ? 0.8 : 0.2;
    }
    CHECK(free_energy(shifted, p, -1.0) == doctest::Approx(bp.free_energy).epsilon(1e-12));
    // Z^gamma hits perm = 2^-k at gamma = -1/2
    const SolveResult half = solve_fractional(p, at(-0.5));
    CHECK(half.z.log() == doctest::Approx(-k * std::log(2.0)).epsilon(1e-12));
    CHECK_FALSE(solve_fractional(gen_uniform(6, 1.0, 3), at(-1.0)).degenerate);
}

TEST_CASE("support reduction fixes forced entries") {
    // upper triangular: the identity is the only perfect matching
    const WeightMatrix tri = WeightMatrix::from_rows({{2, 5, 7}, {0, 3, 1}, {0, 0, 4}});
    for (double gamma : {-1.0, 0.0, 1.0}) {
        const SolveResult r = solve_fractional(tri, at(gamma));
        CHECK(r.status == SolveStatus::boundary);
        CHECK(r.z.to_double() == doctest::Approx(24.0).epsilon(1e-12));
    }
    // block triangular: one free 2x2 block plus a forced cell. On a 2x2 block
    // with a = p11 p22, b = p12 p21 the optimum is logistic in x = beta_11:
    // Z = (a^c + b^c)^(1/c) with c = 1 / (2 (1 + gamma)); at gamma = -1 the
    // entropy cancels and the larger product wins.
    const WeightMatrix blk = WeightMatrix::from_rows({{1, 2, 9}, {3, 1, 9}, {0, 0, 5}});
    const SolveResult r = solve_fractional(blk, at(0.0));
    CHECK(r.status == SolveStatus::partially_resolved);
    CHECK(r.beliefs.at(2, 2) == 1.0);
    CHECK(r.beliefs.at(0, 2) == 0.0);
    CHECK(std::isnan(r.beliefs.row_mult[2]));
    CHECK(r.z.to_double() == doctest::Approx(5.0 * std::pow(1.0 + std::sqrt(6.0), 2.0)).epsilon(1e-10));
    CHECK(r.beliefs.at(0, 0) == doctest::Approx(1.0 / (1.0 + std::sqrt(6.0))).epsilon(1e-10));
    CHECK(r.residual < 1e-10);
    const SolveResult b = solve_bp(blk);
    CHECK(b.status == SolveStatus::boundary);
    CHECK(b.z.to_double() == doctest::Approx(30.0).epsilon(1e-12));
}

TEST_CASE("initializations agree when the minimizer is unique") {
    const WeightMatrix p = gen_exponential(7, 1.0, 21);
    for (double gamma : {-1.0, -0.4, 0.3}) {
        const SolveResult ref = solve_fractional(p, at(gamma));
        for (InitKind k : {InitKind::uniform, InitKind::max_matching_corner}) {
            SolverConfig c = at(gamma);
            c.init = k;
            const SolveResult r = solve_fractional(p, c);
            CHECK(r.free_energy == doctest::Approx(ref.free_energy).epsilon(1e-11));
            for (std::size_t e = 0; e < p.nnz(); ++e) CHECK(r.beliefs.beta[e] == doctest::Approx(ref.beliefs.beta[e]).epsilon(1e-7));
        }
    }
}

TEST_CASE("classification and argument checks") {
    const WeightMatrix p = WeightMatrix::from_rows({{1, 1}, {1, 1}});
    Beliefs b{p.pattern_ptr(), {0.5, 0.5, 0.5, 0.5}, {1, 1}, {1, 1}};
    CHECK(classify(b) == SolveStatus::interior);
    b.beta = {1, 0, 0, 1};
    CHECK(classify(b) == SolveStatus::boundary);
    CHECK(free_energy(b, p, -1.0) == 0.0);
    b.beta = {1 - 1e-9, 1e-9, 1e-9, 1 - 1e-9};
    CHECK(classify(b) == SolveStatus::boundary);

    CHECK_THROWS_AS(solve_fractional(p, at(1.5)), Error);
    CHECK_THROWS_AS(solve_fractional(p, at(-1.01)), Error);
    SolverConfig bad;
    bad.damping = 1.0;
    CHECK_THROWS_AS(solve_fractional(p, bad), Error);
    try {
        solve_bp(WeightMatrix::from_rows({{1, 1}, {0, 0}}));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::unsatisfiable);
    }
    CHECK(parse_init_kind("uniform") == InitKind::uniform);
    CHECK_THROWS(parse_init_kind("nope"));

    SolveResult bnd = solve_fractional(WeightMatrix::from_rows({{1, 1}, {0, 1}}), at(-1.0));
    CHECK_FALSE(check_exact_identity(WeightMatrix::from_rows({{1, 1}, {0, 1}}), bnd, -1.0).applicable);
}
