#include <doctest.h>

#include "fracperm/ensembles.hpp"
#include "fracperm/errors.hpp"
#include "fracperm/ryser.hpp"
#include "helpers.hpp"

using namespace fracperm;

TEST_CASE("ryser closed forms") {
    CHECK(ryser_permanent(WeightMatrix::from_rows({{1, 2}, {3, 4}})).to_double() == doctest::Approx(10.0).epsilon(1e-15));
    const WeightMatrix ones5 = WeightMatrix::from_rows(std::vector<std::vector<double>>(5, std::vector<double>(5, 1.0)));
    CHECK(ryser_permanent(ones5).to_double() == doctest::Approx(120.0).epsilon(1e-14));
    CHECK(ryser_permanent(WeightMatrix::from_rows({{5}})).to_double() == doctest::Approx(5.0));
}

TEST_CASE("ryser matches brute force on random matrices up to n=10") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const int n = 3 + static_cast<int>(seed % 8);
        const WeightMatrix p = seed % 2 ? gen_uniform(n, 1.0, seed) : gen_exponential(n, 2.0, seed);
        CHECK(relative_difference(ryser_permanent(p), brute_force_permanent(p)) < 1e-10);
    }
}

TEST_CASE("ryser on a random 8x8 uniform matrix") {
    const WeightMatrix p = gen_uniform(8, 1.0, 2024);
    const double want = testutil::permanent_by_permutations(testutil::to_rows(p));
    CHECK(testutil::rel(ryser_permanent(p).to_double(), want) < 1e-10);
}

TEST_CASE("gray-code and naive subset sums agree, including sparse supports") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const int n = 2 + static_cast<int>(seed % 7);
        WeightMatrix p = gen_uniform(n, 1.0, seed);
        if (seed % 3 == 0) {
            // drop roughly a third of the cells
            std::vector<std::size_t> keep;
            for (std::size_t e = 0; e < p.nnz(); ++e)
                if (p.value(e) > 0.33) keep.push_back(e);
            p = p.restrict_to(keep);
        }
        CHECK(relative_difference(ryser_permanent(p), ryser_permanent_naive(p)) < 1e-10);
        CHECK(relative_difference(ryser_permanent(p), brute_force_permanent(p)) < 1e-10);
    }
}

TEST_CASE("ryser returns exact zero when no perfect matching exists") {
    const WeightMatrix p = WeightMatrix::from_rows({{1, 0, 0}, {1, 0, 0}, {1, 1, 1}});
    CHECK(ryser_permanent(p).is_zero());
    CHECK(ryser_permanent(WeightMatrix::from_rows({{1, 1}, {0, 0}})).is_zero());
}

TEST_CASE("ryser cost counter depends only on the support") {
    const WeightMatrix a = gen_uniform(9, 1.0, 1);
    const WeightMatrix b = gen_exponential(9, 3.0, 2);
    CostCounter ca, cb;
    ryser_permanent(a, &ca);
    ryser_permanent(b, &cb);
    CHECK(ca.total() == cb.total());
    CHECK(ca.reads > 0);
    CostCounter again;
    ryser_permanent(a, &again);
    CHECK(again.total() == ca.total());
    // sparser support touches fewer cells
    std::vector<std::size_t> keep;
    for (std::size_t e = 0; e < a.nnz(); ++e)
        if (a.pattern().row(e) == a.pattern().col(e) || e % 2 == 0) keep.push_back(e);
    CostCounter cs;
    ryser_permanent(a.restrict_to(keep), &cs);
    CHECK(cs.total() < ca.total());
}

TEST_CASE("ryser size guard") {
    CHECK_THROWS_AS(ryser_permanent(gen_uniform(31, 1.0, 0)), Error);
}
