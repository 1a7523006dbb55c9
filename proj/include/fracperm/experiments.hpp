#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <iosfwd>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fracperm/bounds.hpp"
#include "fracperm/ensembles.hpp"
#include "fracperm/exact.hpp"
#include "fracperm/gamma_star.hpp"
#include "fracperm/variational.hpp"

namespace fracperm {

// ---------------------------------------------------------------- run metadata

/// Ordered key/value description of a run. Its FNV-1a hash tags every CSV row,
/// so equal hashes mean equal configurations.
struct RunHeader {
    std::string command;
    std::vector<std::pair<std::string, std::string>> params;

    void add(const std::string& key, const std::string& value) { params.emplace_back(key, value); }
    void add(const std::string& key, double value);
    void add(const std::string& key, long long value);
    std::uint64_t hash() const;
    std::string hash_hex() const;
};

std::uint64_t fnv1a64(const std::string& s);

/// "# ---" / "# key: value" lines / "# ---".
void write_header(std::ostream& out, const RunHeader& header);

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// Calls fn(i) for i in [0, count) on up to `threads` threads. Work is handed
/// out by index, so results stored by index do not depend on scheduling. The
/// first exception thrown by any call is rethrown after all threads finish.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
    if (t <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (std::size_t k = 0; k < t; ++k)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!error) error = std::current_exception();
                    next = count;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

/// Seed of instance `instance` at size n under master seed `seed`.
std::uint64_t instance_seed(std::uint64_t seed, int n, int instance);

/// Optional pruning applied to generated instances. keep < 1 keeps that
/// fraction of entries; ratio > 0 keeps entries scoring at least ratio.
struct PruneSpec {
    double keep = 1.0;
    double ratio = 0.0;
    bool active() const { return keep < 1.0 || ratio > 0.0; }
};

WeightMatrix apply_pruning(const WeightMatrix& p, const PruneSpec& prune);

struct BatchSpec {
    EnsembleSpec ensemble;
    int n_min = 4;
    int n_max = 10;
    int n_step = 1;
    int instances = 10;
    std::uint64_t seed = 1;
    int threads = 1;
    ExactMethod exact = ExactMethod::automatic;
    PruneSpec prune;

    std::vector<int> sizes() const;
    void describe(RunHeader& header) const;
};

// ---------------------------------------------------------------- gamma* sweep

struct GammaStarRow {
    int n = 0;
    int instance = 0;
    std::uint64_t seed = 0;
    double gamma_star = 0.0;
    std::string status;
    double log_perm = 0.0;
    double keep_fraction = 1.0;
    bool boundary_at_minus_one = false;
    double slope = 0.0;
    double g_mid = 0.0;
};

struct GammaSweepConfig {
    BatchSpec batch;
    GammaStarConfig gamma;
};

std::vector<GammaStarRow> run_gamma_star_sweep(const GammaSweepConfig& cfg);
RunHeader gamma_sweep_header(const GammaSweepConfig& cfg);
void write_gamma_star_csv(std::ostream& out, const GammaSweepConfig& cfg, const std::vector<GammaStarRow>& rows);

// ---------------------------------------------------------------- bounds sweep

struct BoundsRow {
    int n = 0;
    int instance = 0;
    std::uint64_t seed = 0;
    BoundEntry entry;
    double log_perm = 0.0;
    double log_ratio = 0.0;  // log(bound / perm); NaN when invalid
};

struct BoundsSweepConfig {
    BatchSpec batch;
    BoundsConfig bounds;
};

struct BoundsSweepResult {
    std::vector<BoundsRow> rows;
    int violations = 0;  // valid lower above perm or valid upper below perm (tolerance 1e-8)
};

BoundsSweepResult run_bounds_sweep(const BoundsSweepConfig& cfg);
RunHeader bounds_sweep_header(const BoundsSweepConfig& cfg);
void write_bounds_csv(std::ostream& out, const BoundsSweepConfig& cfg, const BoundsSweepResult& result);

// ---------------------------------------------------------------- Gurvits chain

struct GurvitsRow {
    int n = 0;
    int instances = 0;
    double mean_perm_over_product = 0.0;
    double std_perm_over_product = 0.0;
    double mean_perm_over_bp = 0.0;
    double std_perm_over_bp = 0.0;
    int violations = 0;
};

struct GurvitsConfig {
    int n_min = 4;
    int n_max = 10;
    int instances = 100;
    std::uint64_t seed = 1;
    int threads = 1;
    ExactMethod exact = ExactMethod::automatic;
};

/// Uniform [0, 1] matrix, Sinkhorn balanced, then both ratios of the chain.
std::vector<GurvitsRow> run_gurvits_experiment(const GurvitsConfig& cfg);
RunHeader gurvits_header(const GurvitsConfig& cfg);
void write_gurvits_csv(std::ostream& out, const GurvitsConfig& cfg, const std::vector<GurvitsRow>& rows);

// ---------------------------------------------------------------- engine cost

struct CostRow {
    int n = 0;
    double sparsity = 0.0;  // fraction of entries pruned away
    int instance = 0;
    std::uint64_t seed = 0;
    std::size_t nnz = 0;
    std::uint64_t ryser_cost = 0;
    std::uint64_t zdd_cost = 0;   // equals the budget when censored
    std::size_t zdd_nodes = 0;
    bool zdd_censored = false;    // ZDD stopped at the budget or node cap
    double relative_gap = 0.0;    // between the two permanents when both finished
};

struct CostConfig {
    int n = 20;
    std::vector<double> sparsity{0.0, 0.4, 0.6, 0.8};
    int instances = 20;
    std::uint64_t seed = 1;
    int threads = 1;
    EnsembleSpec ensemble;
    double budget_factor = 4.0;        // ZDD budget as a multiple of the Ryser cost
    std::size_t zdd_node_cap = 20'000'000;
};

std::vector<CostRow> run_cost_comparison(const CostConfig& cfg);
RunHeader cost_header(const CostConfig& cfg);
void write_cost_csv(std::ostream& out, const CostConfig& cfg, const std::vector<CostRow>& rows);

// ---------------------------------------------------------------- identity check

struct VerifyRow {
    int n = 0;
    int instance = 0;
    std::uint64_t seed = 0;
    double gamma = 0.0;
    std::string status;
    bool applicable = false;
    double relative_gap = 0.0;
    double residual = 0.0;
    double ds_deviation = 0.0;
};

struct VerifyConfig {
    BatchSpec batch;
    std::vector<double> gammas{-1.0, -0.5, 0.0, 0.5, 1.0};
    double threshold = 1e-6;
    SolverConfig solver;
};

struct VerifyResult {
    std::vector<VerifyRow> rows;
    double max_gap = 0.0;
    int checked = 0;
    int non_converged = 0;
    bool ok = true;  // max_gap within the threshold
};

VerifyResult verify_identities(const VerifyConfig& cfg);
RunHeader verify_header(const VerifyConfig& cfg);
void write_verify_csv(std::ostream& out, const VerifyConfig& cfg, const VerifyResult& result);

// ---------------------------------------------------------------- summaries

double median(std::vector<double> v);
double mean(const std::vector<double>& v);
double sample_variance(const std::vector<double>& v);

}  // namespace fracperm
