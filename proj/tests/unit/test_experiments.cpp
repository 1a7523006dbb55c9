#include <doctest.h>

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fracperm/experiments.hpp"
#include "fracperm/pruning.hpp"
#include "helpers.hpp"

using namespace fracperm;

namespace {

template <class Fn>
std::string capture(Fn&& fn) {
    std::ostringstream os;
    fn(os);
    return os.str();
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string line; std::getline(is, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("FNV-1a and run header hashing") {
    // published test vectors
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);

    RunHeader a{"sweep", {}};
    a.add("n", 5LL);
    a.add("tol", 0.25);
    RunHeader b = a;
    CHECK(a.hash() == b.hash());
    CHECK(a.hash_hex().size() == 16);
    b.add("extra", "x");
    CHECK(a.hash() != b.hash());
    RunHeader c{"sweep", {{"tol", "0.25"}, {"n", "5"}}};
    CHECK(c.hash() != a.hash());  // order matters

    const auto lines = lines_of(capture([&](std::ostream& os) { write_header(os, a); }));
    REQUIRE(lines.size() == 7);
    CHECK(lines.front() == "# ---");
    CHECK(lines.back() == "# ---");
    CHECK(lines[2] == "# command: sweep");
    CHECK(lines[3] == "# n: 5");
    CHECK(lines[4] == "# tol: 0.25");
    CHECK(lines[5] == "# config_hash: " + a.hash_hex());
}

TEST_CASE("format_double round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 1e-4})
        CHECK(std::stod(format_double(v)) == v);
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("summary statistics") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK(std::isnan(median({})));
    CHECK(mean({1.0, 2.0, 6.0}) == doctest::Approx(3.0));
    // 2, 4, 4, 4, 5, 5, 7, 9: population variance 4, sample variance 32/7
    CHECK(sample_variance({2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(32.0 / 7.0));
    CHECK(sample_variance({1.0}) == 0.0);
}

TEST_CASE("parallel_for visits every index once and propagates errors") {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                        if (i == 7) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
    parallel_for(0, 4, [](std::size_t) { FAIL("no work expected"); });
}

TEST_CASE("instance seeds are distinct and stable") {
    CHECK(instance_seed(1, 5, 0) == instance_seed(1, 5, 0));
    CHECK(instance_seed(1, 5, 0) != instance_seed(1, 5, 1));
    CHECK(instance_seed(1, 5, 0) != instance_seed(1, 6, 0));
    CHECK(instance_seed(1, 5, 0) != instance_seed(2, 5, 0));
}

TEST_CASE("pruning spec") {
    const WeightMatrix p = gen_uniform(6, 1.0, 3);
    CHECK(apply_pruning(p, {}).nnz() == 36);
    CHECK(apply_pruning(p, {0.5, 0.0}).nnz() == prune_fraction(p, 0.5).nnz());
    CHECK(apply_pruning(p, {1.0, 0.2}).nnz() == prune_threshold(p, 0.2).nnz());
    const WeightMatrix both = apply_pruning(p, {0.25, 0.01});
    CHECK(both.nnz() <= 9 + 6);
    CHECK(exact_permanent(both).sign() > 0);
}

TEST_CASE("gamma* sweep is reproducible and thread independent") {
    GammaSweepConfig cfg;
    cfg.batch.n_min = 3;
    cfg.batch.n_max = 5;
    cfg.batch.instances = 3;
    cfg.batch.seed = 11;
    const auto rows1 = run_gamma_star_sweep(cfg);
    const std::string csv1 = capture([&](std::ostream& os) { write_gamma_star_csv(os, cfg, rows1); });
    const std::string csv2 = capture([&](std::ostream& os) { write_gamma_star_csv(os, cfg, run_gamma_star_sweep(cfg)); });
    cfg.batch.threads = 3;
    const std::string csv3 = capture([&](std::ostream& os) { write_gamma_star_csv(os, cfg, run_gamma_star_sweep(cfg)); });
    CHECK(csv1 == csv2);
    CHECK(csv1 == csv3);  // thread count is not part of the header

    REQUIRE(rows1.size() == 9);
    for (const auto& r : rows1) {
        CHECK(r.status == "ok");
        CHECK(r.gamma_star >= -1.0);
        CHECK(r.gamma_star <= 0.0);
        CHECK(std::abs(r.g_mid) < 1e-2);
        CHECK(r.log_perm == doctest::Approx(exact_permanent(gen_uniform(r.n, 1.0, r.seed), ExactMethod::brute).log()));
    }
    const auto lines = lines_of(csv1);
    std::size_t k = 0;
    while (k < lines.size() && lines[k].rfind('#', 0) == 0) ++k;
    CHECK(lines[k].rfind("ensemble,n,instance,seed,config_hash,gamma_star", 0) == 0);
    CHECK(lines.size() == k + 1 + rows1.size());

    cfg.batch.seed = 12;
    const std::string other = capture([&](std::ostream& os) { write_gamma_star_csv(os, cfg, run_gamma_star_sweep(cfg)); });
    CHECK(other != csv1);
}

TEST_CASE("bounds sweep finds no violations") {
    BoundsSweepConfig cfg;
    cfg.batch.n_min = 4;
    cfg.batch.n_max = 7;
    cfg.batch.instances = 4;
    cfg.batch.ensemble.kind = EnsembleKind::exponential;
    const BoundsSweepResult res = run_bounds_sweep(cfg);
    CHECK(res.violations == 0);
    CHECK(res.rows.size() >= 16 * 10);
    int valid = 0;
    for (const auto& r : res.rows) {
        if (!r.entry.valid || r.entry.kind == BoundKind::conjecture) continue;
        ++valid;
        if (r.entry.kind == BoundKind::lower) CHECK(r.log_ratio <= 1e-8);
        else CHECK(r.log_ratio >= -1e-8);
    }
    CHECK(valid > 100);
    const std::string csv = capture([&](std::ostream& os) { write_bounds_csv(os, cfg, res); });
    CHECK(csv.find(",bp_lower,white,lower,") != std::string::npos);
}

TEST_CASE("Gurvits experiment") {
    GurvitsConfig cfg;
    cfg.n_min = 3;
    cfg.n_max = 6;
    cfg.instances = 10;
    const auto rows = run_gurvits_experiment(cfg);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
        CHECK(r.instances == 10);
        CHECK(r.violations == 0);
        CHECK(r.mean_perm_over_product >= 1.0);
        CHECK(r.mean_perm_over_bp >= 1.0);
        // perm / Z_oBP <= sqrt(2)^n
        CHECK(r.mean_perm_over_bp <= std::pow(std::sqrt(2.0), r.n));
    }
}

TEST_CASE("cost comparison favours ZDD on sparse matrices") {
    CostConfig cfg;
    cfg.n = 12;
    cfg.sparsity = {0.0, 0.8};
    cfg.instances = 3;
    const auto rows = run_cost_comparison(cfg);
    REQUIRE(rows.size() == 6);
    std::vector<double> ry_dense, zdd_dense, ry_sparse, zdd_sparse;
    for (const auto& r : rows) {
        CHECK_FALSE(r.zdd_censored);
        CHECK(r.relative_gap < 1e-10);
        (r.sparsity == 0.0 ? ry_dense : ry_sparse).push_back(static_cast<double>(r.ryser_cost));
        (r.sparsity == 0.0 ? zdd_dense : zdd_sparse).push_back(static_cast<double>(r.zdd_cost));
    }
    CHECK(median(zdd_sparse) < median(ry_sparse));
    CHECK(median(zdd_dense) > median(ry_dense));
    for (const auto& r : rows)
        if (r.sparsity == 0.0) CHECK(r.nnz == 144);

    cfg.budget_factor = 1e-6;
    cfg.sparsity = {0.0};
    cfg.instances = 1;
    const auto censored = run_cost_comparison(cfg);
    CHECK(censored[0].zdd_censored);
    CHECK(std::isnan(censored[0].relative_gap));
}

TEST_CASE("identity verification") {
    VerifyConfig cfg;
    cfg.batch.n_min = 4;
    cfg.batch.n_max = 6;
    cfg.batch.instances = 3;
    const VerifyResult res = verify_identities(cfg);
    CHECK(res.ok);
    CHECK(res.rows.size() == 9 * 5);
    CHECK(res.checked > 20);
    CHECK(res.max_gap <= 1e-6);
    CHECK(res.non_converged == 0);
}
