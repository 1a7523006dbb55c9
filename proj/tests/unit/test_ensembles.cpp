#include <doctest.h>

#include <cmath>

#include "fracperm/ensembles.hpp"
#include "fracperm/errors.hpp"
#include "fracperm/rng.hpp"
#include "helpers.hpp"

using namespace fracperm;

TEST_CASE("derangement numbers") {
    const double want[] = {1, 0, 1, 2, 9, 44, 265, 1854};
    for (int k = 0; k < 8; ++k) CHECK(derangements(k) == want[k]);
}

TEST_CASE("pdet closed form") {
    CHECK(pdet_exact(3, 2.0, 1.0).to_double() == doctest::Approx(16.0).epsilon(1e-14));
    CHECK(pdet_exact(4, 3.0, 1.0).to_double() == doctest::Approx(168.0).epsilon(1e-14));
    // w -> 1 reduces to n!
    CHECK(pdet_exact(7, 1.0, 0.7).to_double() == doctest::Approx(5040.0).epsilon(1e-13));
    for (int n = 1; n <= 9; ++n)
        for (double w : {2.0, 3.0})
            for (double T : {0.5, 1.0, 2.0})
                CHECK(relative_difference(pdet_exact(n, w, T), brute_force_permanent(gen_pdet(n, w, T))) < 1e-10);
    // large n stays finite in the log domain
    CHECK(std::isfinite(pdet_exact(200, 2.0, 1.0).log()));
}

TEST_CASE("generators are reproducible and seed-sensitive") {
    CHECK(gen_uniform(6, 1.0, 5).dense() == gen_uniform(6, 1.0, 5).dense());
    CHECK(gen_uniform(6, 1.0, 5).dense() != gen_uniform(6, 1.0, 6).dense());
    CHECK(gen_flow(6, {}, {}, 11).dense() == gen_flow(6, {}, {}, 11).dense());
    CHECK(gen_exponential(6, 1.0, 3).dense() == gen_exponential(6, 1.0, 3).dense());
    CHECK(gen_shifted(6, 0.1, 3).dense() == gen_shifted(6, 0.1, 3).dense());
}

TEST_CASE("uniform and exponential ranges and moments") {
    const WeightMatrix u = gen_uniform(60, 0.5, 1);
    CHECK(u.nnz() == 3600);
    double sum = 0.0;
    for (double v : u.values()) {
        CHECK(v > 0.0);
        CHECK(v <= 0.5);
        sum += v;
    }
    CHECK(sum / 3600 == doctest::Approx(0.25).epsilon(0.02));
    const WeightMatrix x = gen_exponential(60, 2.0, 1);
    sum = 0.0;
    for (double v : x.values()) sum += v;
    CHECK(sum / 3600 == doctest::Approx(2.0).epsilon(0.06));
}

TEST_CASE("normal variates have unit variance") {
    Rng rng(99);
    double s = 0.0, s2 = 0.0;
    const int k = 200000;
    for (int i = 0; i < k; ++i) {
        const double z = rng.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(std::fabs(s / k) < 0.01);
    CHECK(s2 / k == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("shifted ensemble") {
    const WeightMatrix b = gen_shifted(6, 0.0, 1);
    CHECK(b.nnz() == 12);
    CHECK(brute_force_permanent(b).to_double() == doctest::Approx(std::pow(2.0, -3.0)));
    CHECK(gen_shifted(6, 0.05, 1).nnz() == 36);
    CHECK_THROWS_AS(gen_shifted(5, 0.0, 1), Error);
}

TEST_CASE("flow propagator is the matrix exponential") {
    // compare against a truncated Taylor series
    for (const FlowParams f : {FlowParams{0.5, 0.5, 0.5, 1, 1}, FlowParams{0.3, 0.1, 0.9, 1, 1}, FlowParams{0.2, 0.0, 0.2, 1, 1},
                               FlowParams{0.4, -0.3, 0.1, 1, 2}}) {
        const double a = f.a * f.dt, b = f.b * f.dt, c = f.c * f.dt;
        const double m[4] = {a, b + c, b - c, -a};
        double term[4] = {1, 0, 0, 1}, sum[4] = {1, 0, 0, 1};
        for (int k = 1; k < 30; ++k) {
            const double t[4] = {(term[0] * m[0] + term[1] * m[2]) / k, (term[0] * m[1] + term[1] * m[3]) / k,
                                 (term[2] * m[0] + term[3] * m[2]) / k, (term[2] * m[1] + term[3] * m[3]) / k};
            for (int q = 0; q < 4; ++q) sum[q] += term[q] = t[q];
        }
        const auto e = flow_propagator(f);
        for (int q = 0; q < 4; ++q) CHECK(e[q] == doctest::Approx(sum[q]).epsilon(1e-12));
    }
}

TEST_CASE("flow ensemble limits") {
    // strong output diffusion flattens the matrix
    const FlowParams in{0.5, 0.5, 0.5, 0.01, 1.0};
    const FlowParams hot{0.5, 0.5, 0.5, 50.0, 1.0};
    const WeightMatrix flat = gen_flow(8, in, hot, 4);
    for (double v : flat.values()) CHECK(v > 0.9);

    // weak diffusion and no flow: one permutation carries the permanent
    const FlowParams cold{0.0, 0.0, 0.0, 1e-4, 1.0};
    const WeightMatrix sharp = gen_flow(8, cold, cold, 4);
    const auto rows = testutil::to_rows(sharp);
    std::vector<int> s(8);
    std::iota(s.begin(), s.end(), 0);
    double best = 0.0;
    do {
        double prod = 1.0;
        for (int i = 0; i < 8; ++i) prod *= rows[i][s[i]];
        best = std::max(best, prod);
    } while (std::next_permutation(s.begin(), s.end()));
    CHECK(best > 0.0);
    CHECK(best / testutil::permanent_by_permutations(rows) > 0.999);
}

TEST_CASE("ensemble spec dispatch") {
    EnsembleSpec s;
    s.kind = parse_ensemble_kind("exp");
    s.delta = 2.0;
    CHECK(generate(s, 4, 7).dense() == gen_exponential(4, 2.0, 7).dense());
    CHECK(std::string(to_string(s.kind)) == "exp");
    CHECK_THROWS_AS(parse_ensemble_kind("bogus"), Error);
    CHECK(describe(s) == "exp delta=2");
}
