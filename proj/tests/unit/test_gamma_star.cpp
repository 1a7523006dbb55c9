#include <doctest.h>

#include <cmath>

#include "fracperm/ensembles.hpp"
#include "fracperm/exact.hpp"
#include "fracperm/gamma_star.hpp"
#include "helpers.hpp"

using namespace fracperm;

TEST_CASE("2x2 blocks of 1/2 have gamma* = -1/2") {
    for (int n : {2, 4, 6, 8}) {
        const WeightMatrix p = gen_shifted(n, 0.0, 0);
        const GammaStarResult r = find_gamma_star(p, LogValue::from_log(-0.5 * n * std::log(2.0)));
        CHECK(r.status == GammaStarStatus::ok);
        CHECK(std::fabs(r.gamma_star + 0.5) <= 1e-4);
        CHECK(r.hi - r.lo < 1e-4);
    }
}

TEST_CASE("the bracket straddles the root, checked by independent solves") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const int n = 4 + static_cast<int>(seed % 3);
        const WeightMatrix p = gen_uniform(n, 1.0, seed);
        const double perm = testutil::permanent_by_permutations(testutil::to_rows(p));
        GammaStarConfig cfg;
        cfg.tol_gamma = 1e-3;
        const GammaStarResult r = find_gamma_star(p, LogValue::from_double(perm), cfg);
        REQUIRE(r.status == GammaStarStatus::ok);
        CHECK(r.g_lo <= 0.0);
        CHECK(r.g_hi >= 0.0);
        CHECK(r.lo < r.gamma_star);
        CHECK(r.gamma_star < r.hi);
        SolverConfig s;
        s.gamma = r.lo;
        CHECK(solve_fractional(p, s).z.to_double() <= perm * (1 + 1e-12));
        s.gamma = r.hi;
        CHECK(solve_fractional(p, s).z.to_double() >= perm * (1 - 1e-12));
        CHECK(std::fabs(r.g_mid) <= std::fabs(r.slope) * (r.hi - r.lo) + 1e-12);
    }
}

TEST_CASE("pdet: gamma* below -1/2 and decreasing in T and n") {
    GammaStarConfig cfg;
    cfg.tol_gamma = 1e-4;
    const double w = 2.0;
    double prev = 1.0;
    for (double T : {0.5, 1.0, 2.0}) {
        const GammaStarResult r = find_gamma_star(gen_pdet(8, w, T), pdet_exact(8, w, T), cfg);
        REQUIRE(r.status == GammaStarStatus::ok);
        CHECK(r.gamma_star <= -0.5);
        CHECK(r.gamma_star < prev);
        prev = r.gamma_star;
    }
    prev = 1.0;
    for (int n : {4, 6, 8, 10}) {
        const GammaStarResult r = find_gamma_star(gen_pdet(n, w, 1.0), pdet_exact(n, w, 1.0), cfg);
        REQUIRE(r.status == GammaStarStatus::ok);
        CHECK(r.gamma_star < prev);
        prev = r.gamma_star;
    }
}

TEST_CASE("out-of-range references are flagged, not extrapolated") {
    const WeightMatrix p = gen_uniform(5, 1.0, 9);
    const LogValue exact = exact_permanent(p);
    const GammaStarResult high = find_gamma_star(p, exact * LogValue::from_double(1e6));
    CHECK(high.status == GammaStarStatus::above_range);
    CHECK(high.gamma_star == 0.0);
    const GammaStarResult low = find_gamma_star(p, exact * LogValue::from_double(1e-6));
    CHECK(low.status == GammaStarStatus::below_range);
    CHECK(low.gamma_star == -1.0);
}

TEST_CASE("determinism and boundary flag") {
    const WeightMatrix p = gen_exponential(6, 1.0, 5);
    const LogValue exact = exact_permanent(p);
    const GammaStarResult a = find_gamma_star(p, exact);
    const GammaStarResult b = find_gamma_star(p, exact);
    CHECK(a.gamma_star == b.gamma_star);
    CHECK(a.solves == b.solves);
    CHECK_FALSE(a.boundary_at_minus_one);

    const GammaStarResult cold = find_gamma_star(gen_pdet(5, 2.0, 0.05), pdet_exact(5, 2.0, 0.05));
    CHECK(cold.boundary_at_minus_one);
    CHECK(cold.status != GammaStarStatus::failed);
}
