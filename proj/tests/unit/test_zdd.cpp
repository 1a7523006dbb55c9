#include <doctest.h>

#include <set>
#include <sstream>

#include "fracperm/ensembles.hpp"
#include "fracperm/errors.hpp"
#include "fracperm/zdd.hpp"
#include "helpers.hpp"

using namespace fracperm;

namespace {

using Family = std::vector<std::vector<Var>>;

std::vector<Var> vars(std::initializer_list<Var> v) { return v; }

// Perfect matchings of a support as sets of row-major entry variables.
Family matchings_by_enumeration(const WeightMatrix& p) {
    const int n = p.n();
    std::vector<int> s(n);
    std::iota(s.begin(), s.end(), 0);
    Family out;
    do {
        std::vector<Var> set;
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            const auto e = p.pattern().find(i, s[i]);
            ok = e >= 0;
            if (ok) set.push_back(static_cast<Var>(e + 1));
        }
        if (ok) out.push_back(set);
    } while (std::next_permutation(s.begin(), s.end()));
    std::sort(out.begin(), out.end());
    return out;
}

WeightMatrix drop_cells(const WeightMatrix& p, std::initializer_list<std::pair<int, int>> cells) {
    std::vector<std::size_t> keep;
    for (std::size_t e = 0; e < p.nnz(); ++e) {
        bool drop = false;
        for (auto [i, j] : cells) drop |= p.pattern().row(e) == i && p.pattern().col(e) == j;
        if (!drop) keep.push_back(e);
    }
    return p.restrict_to(keep);
}

WeightMatrix ones(int n) { return WeightMatrix::from_rows(std::vector<std::vector<double>>(n, std::vector<double>(n, 1.0))); }

}  // namespace

TEST_CASE("exactly-one families") {
    const auto v123 = vars({1, 2, 3});
    const Zdd a = exactly_one_zdd(v123, 3);
    CHECK(a.enumerate() == Family{{1}, {2}, {3}});
    CHECK(a.count() == 3);

    const auto v2 = vars({2});
    const Zdd b = exactly_one_zdd(v2);
    CHECK(b.enumerate() == Family{{2}});

    const auto v13 = vars({1, 3});
    const Zdd c = exactly_one_zdd(v13, 3);
    CHECK(c.count() == 2);
    const auto both = vars({1, 3});
    CHECK_FALSE(c.contains(both));
    CHECK(c.contains(vars({3})));
    CHECK(c.check_invariants());

    const std::vector<Var> none;
    CHECK_THROWS_AS(exactly_one_zdd(none, 3), Error);
    try {
        exactly_one_zdd(none, 3);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::unsatisfiable);
    }
    const auto unsorted = vars({3, 1});
    CHECK_THROWS_AS(exactly_one_zdd(unsorted, 3), Error);
}

TEST_CASE("exactly-one constraint leaves other variables free") {
    const auto v13 = vars({1, 3});
    const Zdd c = exactly_one_constraint(v13, 4);
    // choose 1 or 3, and 2, 4 freely
    CHECK(c.count() == 8);
    CHECK(c.contains(vars({1, 2, 4})));
    CHECK_FALSE(c.contains(vars({1, 3})));
    CHECK_FALSE(c.contains(vars({2})));
    CHECK(c.check_invariants());
}

TEST_CASE("meld intersection") {
    const auto v12 = vars({1, 2}), v23 = vars({2, 3}), v1 = vars({1}), v2 = vars({2});
    const Zdd a = exactly_one_zdd(v12, 3);
    const Zdd self = meld_intersection(a, a);
    CHECK(self.enumerate() == a.enumerate());
    CHECK(self.size() == a.size());

    const Zdd ab = meld_intersection(a, exactly_one_zdd(v23, 3));
    CHECK(ab.enumerate() == Family{{2}});
    CHECK(ab.check_invariants());

    const Zdd disjoint = meld_intersection(exactly_one_zdd(v1, 3), exactly_one_zdd(v2, 3));
    CHECK(disjoint.empty_family());
    CHECK(disjoint.count() == 0);
}

TEST_CASE("meld matches set intersection on constraint families") {
    const Var m = 6;
    const std::vector<std::vector<Var>> lists{{1, 2}, {2, 4, 6}, {1, 3, 5}, {3, 4}, {5, 6}};
    for (const auto& x : lists)
        for (const auto& y : lists) {
            const Zdd a = exactly_one_constraint(x, m), b = exactly_one_constraint(y, m);
            const Family fa = a.enumerate(), fb = b.enumerate();
            Family want;
            std::set_intersection(fa.begin(), fa.end(), fb.begin(), fb.end(), std::back_inserter(want));
            const Zdd c = meld_intersection(a, b);
            CHECK(c.enumerate() == want);
            CHECK(c.check_invariants());
        }
}

TEST_CASE("matching zdd counts") {
    CHECK(build_matching_zdd(ones(3)).count() == 6);
    std::vector<std::vector<double>> id(3, std::vector<double>(3, 0.0));
    for (int i = 0; i < 3; ++i) id[i][i] = 1.0;
    CHECK(build_matching_zdd(WeightMatrix::from_rows(id)).count() == 1);
    // 4x4 with one cell removed: 24 - 3! = 18 permutations avoid it
    const WeightMatrix p = drop_cells(ones(4), {{1, 2}});
    CHECK(build_matching_zdd(p).count() == static_cast<double>(matchings_by_enumeration(p).size()));
    CHECK(build_matching_zdd(p).count() == 18);
}

TEST_CASE("matching zdd solutions are exactly the perfect matchings") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const int n = 2 + static_cast<int>(seed % 5);
        WeightMatrix p = gen_uniform(n, 1.0, seed);
        std::vector<std::size_t> keep;
        for (std::size_t e = 0; e < p.nnz(); ++e)
            if (p.value(e) > 0.4) keep.push_back(e);
        p = p.restrict_to(keep);
        const Family want = matchings_by_enumeration(p);
        const Zdd z = build_matching_zdd(p);
        CHECK(z.check_invariants());
        CHECK(z.enumerate() == want);
        const Zdd zp = build_matching_zdd_pairwise(p);
        CHECK(zp.check_invariants());
        CHECK(zp.enumerate() == want);
    }
}

TEST_CASE("unsatisfiable supports give the empty family") {
    const WeightMatrix p = WeightMatrix::from_rows({{1, 0, 0}, {1, 0, 0}, {1, 1, 1}});
    const Zdd z = build_matching_zdd(p);
    CHECK(z.empty_family());
    CHECK(weighted_count(z, p).is_zero());
    CHECK(build_matching_zdd_pairwise(p).empty_family());
    CHECK(build_matching_zdd(WeightMatrix::from_rows({{1, 1}, {0, 0}})).empty_family());
}

TEST_CASE("weighted count") {
    const WeightMatrix o3 = ones(3);
    CHECK(weighted_count(build_matching_zdd(o3), o3).to_double() == doctest::Approx(6.0));
    const WeightMatrix pd = gen_pdet(3, 2.0, 1.0);
    CHECK(weighted_count(build_matching_zdd(pd), pd).to_double() == doctest::Approx(16.0).epsilon(1e-14));
    CHECK(weighted_count(Zdd{}, std::vector<double>{}).is_zero());

    const Zdd z = build_matching_zdd(o3);
    const std::vector<double> short_weights(3, 1.0);
    CHECK_THROWS_AS(weighted_count(z, short_weights), Error);
}

TEST_CASE("zdd permanent agrees with brute force up to n=10") {
    for (std::uint64_t seed = 0; seed < 24; ++seed) {
        const int n = 3 + static_cast<int>(seed % 8);
        const WeightMatrix p = seed % 2 ? gen_uniform(n, 1.0, seed) : gen_flow(n, {}, {}, seed);
        CHECK(relative_difference(zdd_permanent(p), brute_force_permanent(p)) < 1e-10);
    }
}

TEST_CASE("zdd cost counter, budget and node cap") {
    const WeightMatrix p = gen_uniform(8, 1.0, 3);
    CostCounter c1, c2;
    zdd_permanent(p, &c1);
    zdd_permanent(gen_exponential(8, 1.0, 9), &c2);
    CHECK(c1.total() == c2.total());
    CHECK(c1.total() > 0);

    CostCounter tight;
    tight.budget = 100;
    CHECK_THROWS_AS(zdd_permanent(p, &tight), Error);

    try {
        build_matching_zdd(p, nullptr, 10);
        FAIL("expected capacity error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::capacity);
    }
}

TEST_CASE("zdd dump lists every node") {
    const Zdd z = build_matching_zdd(ones(2));
    std::ostringstream os;
    z.dump(os);
    std::size_t lines = 0;
    for (char ch : os.str()) lines += ch == '\n';
    CHECK(lines == z.size() + 1);
}
