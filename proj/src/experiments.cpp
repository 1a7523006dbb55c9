#include "fracperm/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

#include "fracperm/errors.hpp"
#include "fracperm/pruning.hpp"
#include "fracperm/rng.hpp"
#include "fracperm/ryser.hpp"
#include "fracperm/zdd.hpp"

namespace fracperm {

// ---------------------------------------------------------------- metadata

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void RunHeader::add(const std::string& key, double value) { add(key, format_double(value)); }
void RunHeader::add(const std::string& key, long long value) { add(key, std::to_string(value)); }

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t RunHeader::hash() const {
    std::string canon = command + '\n';
    for (const auto& [k, v] : params) canon += k + '=' + v + '\n';
    return fnv1a64(canon);
}

std::string RunHeader::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

void write_header(std::ostream& out, const RunHeader& header) {
    out << "# ---\n# tool: perm\n# command: " << header.command << '\n';
    for (const auto& [k, v] : header.params) out << "# " << k << ": " << v << '\n';
    out << "# config_hash: " << header.hash_hex() << "\n# ---\n";
}

std::uint64_t instance_seed(std::uint64_t seed, int n, int instance) {
    return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(n)), static_cast<std::uint64_t>(instance));
}

WeightMatrix apply_pruning(const WeightMatrix& p, const PruneSpec& prune) {
    if (!prune.active()) return p;
    const EdgeScores scores = score_edges(p);
    if (prune.ratio <= 0.0) return prune_fraction(p, scores, prune.keep);
    const WeightMatrix q = prune_threshold(p, scores, prune.ratio);
    if (prune.keep >= 1.0) return q;
    // keep is relative to the unpruned entry count
    const double keep = prune.keep * static_cast<double>(p.nnz()) / static_cast<double>(q.nnz());
    return keep >= 1.0 ? q : prune_fraction(q, keep);
}

std::vector<int> BatchSpec::sizes() const {
    if (n_min < 1 || n_max < n_min || n_step < 1) throw Error(ErrorCode::invalid_argument, "bad size range");
    std::vector<int> out;
    for (int n = n_min; n <= n_max; n += n_step) out.push_back(n);
    return out;
}

void BatchSpec::describe(RunHeader& h) const {
    h.add("ensemble", fracperm::describe(ensemble));
    h.add("n_min", static_cast<long long>(n_min));
    h.add("n_max", static_cast<long long>(n_max));
    h.add("n_step", static_cast<long long>(n_step));
    h.add("instances", static_cast<long long>(instances));
    h.add("seed", static_cast<long long>(seed));
    h.add("exact_method", to_string(exact));
    h.add("prune_keep", prune.keep);
    h.add("prune_ratio", prune.ratio);
}

namespace {

struct Job {
    int n;
    int instance;
    std::uint64_t seed;
};

std::vector<Job> jobs_of(const BatchSpec& b) {
    if (b.instances < 0) throw Error(ErrorCode::invalid_argument, "instances must be >= 0");
    std::vector<Job> jobs;
    for (int n : b.sizes())
        for (int k = 0; k < b.instances; ++k) jobs.push_back({n, k, instance_seed(b.seed, n, k)});
    return jobs;
}

void describe_solver(RunHeader& h, const SolverConfig& s) {
    h.add("damping", s.damping);
    h.add("tol", s.tol);
    h.add("max_iter", static_cast<long long>(s.max_iter));
    h.add("init", to_string(s.init));
    h.add("polish", s.polish ? "true" : "false");
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_double(v[i]);
    return s;
}

}  // namespace

// ---------------------------------------------------------------- gamma* sweep

RunHeader gamma_sweep_header(const GammaSweepConfig& cfg) {
    RunHeader h{"gamma-star-sweep", {}};
    cfg.batch.describe(h);
    h.add("tol_gamma", cfg.gamma.tol_gamma);
    describe_solver(h, cfg.gamma.solver);
    return h;
}

std::vector<GammaStarRow> run_gamma_star_sweep(const GammaSweepConfig& cfg) {
    const auto jobs = jobs_of(cfg.batch);
    std::vector<GammaStarRow> rows(jobs.size());
    parallel_for(jobs.size(), cfg.batch.threads, [&](std::size_t i) {
        const Job& j = jobs[i];
        GammaStarRow& r = rows[i];
        r.n = j.n;
        r.instance = j.instance;
        r.seed = j.seed;
        try {
            const WeightMatrix p = apply_pruning(generate(cfg.batch.ensemble, j.n, j.seed), cfg.batch.prune);
            r.keep_fraction = static_cast<double>(p.nnz()) / (static_cast<double>(j.n) * j.n);
            const LogValue exact = exact_permanent(p, cfg.batch.exact);
            r.log_perm = exact.log();
            const GammaStarResult g = find_gamma_star(p, exact, cfg.gamma);
            r.gamma_star = g.gamma_star;
            r.status = to_string(g.status);
            r.boundary_at_minus_one = g.boundary_at_minus_one;
            r.slope = g.slope;
            r.g_mid = g.g_mid;
        } catch (const Error& e) {
            r.status = std::string("error:") + to_string(e.code());
            r.gamma_star = std::numeric_limits<double>::quiet_NaN();
        }
    });
    return rows;
}

void write_gamma_star_csv(std::ostream& out, const GammaSweepConfig& cfg, const std::vector<GammaStarRow>& rows) {
    const RunHeader h = gamma_sweep_header(cfg);
    write_header(out, h);
    const std::string ens = to_string(cfg.batch.ensemble.kind);
    out << "ensemble,n,instance,seed,config_hash,gamma_star,status,log_perm,keep_fraction,boundary_at_minus_one,slope,g_mid\n";
    for (const auto& r : rows)
        out << ens << ',' << r.n << ',' << r.instance << ',' << r.seed << ',' << h.hash_hex() << ','
            << format_double(r.gamma_star) << ',' << r.status << ',' << format_double(r.log_perm) << ','
            << format_double(r.keep_fraction) << ',' << (r.boundary_at_minus_one ? 1 : 0) << ',' << format_double(r.slope)
            << ',' << format_double(r.g_mid) << '\n';
}

// ---------------------------------------------------------------- bounds sweep

RunHeader bounds_sweep_header(const BoundsSweepConfig& cfg) {
    RunHeader h{"bounds-sweep", {}};
    cfg.batch.describe(h);
    h.add("gammas", join(cfg.bounds.gammas));
    h.add("diagnostic_constant", cfg.bounds.diagnostic_constant);
    describe_solver(h, cfg.bounds.solver);
    return h;
}

BoundsSweepResult run_bounds_sweep(const BoundsSweepConfig& cfg) {
    const auto jobs = jobs_of(cfg.batch);
    std::vector<std::vector<BoundsRow>> per(jobs.size());
    parallel_for(jobs.size(), cfg.batch.threads, [&](std::size_t i) {
        const Job& j = jobs[i];
        const WeightMatrix p = apply_pruning(generate(cfg.batch.ensemble, j.n, j.seed), cfg.batch.prune);
        const LogValue exact = exact_permanent(p, cfg.batch.exact);
        BoundReport rep = evaluate_bounds(p, cfg.bounds);
        compare_with_exact(rep, exact);
        for (auto& e : rep.entries) {
            BoundsRow r;
            r.n = j.n;
            r.instance = j.instance;
            r.seed = j.seed;
            r.log_perm = exact.log();
            r.log_ratio = e.valid ? e.value.log() - exact.log() : std::numeric_limits<double>::quiet_NaN();
            r.entry = std::move(e);
            per[i].push_back(std::move(r));
        }
    });
    BoundsSweepResult res;
    for (auto& v : per)
        for (auto& r : v) {
            if (r.entry.kind != BoundKind::conjecture && r.entry.holds.has_value() && !*r.entry.holds) ++res.violations;
            res.rows.push_back(std::move(r));
        }
    return res;
}

void write_bounds_csv(std::ostream& out, const BoundsSweepConfig& cfg, const BoundsSweepResult& result) {
    const RunHeader h = bounds_sweep_header(cfg);
    write_header(out, h);
    const std::string ens = to_string(cfg.batch.ensemble.kind);
    out << "ensemble,n,instance,seed,config_hash,bound,color,kind,gamma,valid,log_value,log_perm,log_ratio,holds,reason\n";
    for (const auto& r : result.rows) {
        const auto& e = r.entry;
        out << ens << ',' << r.n << ',' << r.instance << ',' << r.seed << ',' << h.hash_hex() << ',' << e.name << ','
            << e.color << ',' << to_string(e.kind) << ',' << format_double(e.gamma) << ',' << (e.valid ? 1 : 0) << ','
            << (e.valid ? format_double(e.value.log()) : "") << ',' << format_double(r.log_perm) << ','
            << (e.valid ? format_double(r.log_ratio) : "") << ',' << (e.holds ? (*e.holds ? "yes" : "no") : "") << ','
            << e.reason << '\n';
    }
}

// ---------------------------------------------------------------- Gurvits chain

RunHeader gurvits_header(const GurvitsConfig& cfg) {
    RunHeader h{"gurvits", {}};
    h.add("n_min", static_cast<long long>(cfg.n_min));
    h.add("n_max", static_cast<long long>(cfg.n_max));
    h.add("instances", static_cast<long long>(cfg.instances));
    h.add("seed", static_cast<long long>(cfg.seed));
    h.add("exact_method", to_string(cfg.exact));
    return h;
}

std::vector<GurvitsRow> run_gurvits_experiment(const GurvitsConfig& cfg) {
    BatchSpec b;
    b.n_min = cfg.n_min;
    b.n_max = cfg.n_max;
    b.instances = cfg.instances;
    b.seed = cfg.seed;
    const auto jobs = jobs_of(b);
    struct One {
        double over_product, over_bp;
        bool holds;
    };
    std::vector<One> out(jobs.size());
    parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
        const Job& j = jobs[i];
        const SinkhornResult s = sinkhorn_balance(gen_uniform(j.n, 1.0, j.seed), 1e-14, 1000000);
        const WeightMatrix phi(s.beliefs.pattern, s.beliefs.beta);
        const GurvitsChain c = gurvits_chain(phi, exact_permanent(phi, cfg.exact));
        out[i] = {std::exp(c.perm.log() - c.product.log()), std::exp(c.perm.log() - c.z_obp.log()), c.holds()};
    });
    std::vector<GurvitsRow> rows;
    for (int n : b.sizes()) {
        GurvitsRow r;
        r.n = n;
        std::vector<double> a, c;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].n != n) continue;
            a.push_back(out[i].over_product);
            c.push_back(out[i].over_bp);
            r.violations += out[i].holds ? 0 : 1;
        }
        r.instances = static_cast<int>(a.size());
        r.mean_perm_over_product = mean(a);
        r.std_perm_over_product = std::sqrt(sample_variance(a));
        r.mean_perm_over_bp = mean(c);
        r.std_perm_over_bp = std::sqrt(sample_variance(c));
        rows.push_back(r);
    }
    return rows;
}

void write_gurvits_csv(std::ostream& out, const GurvitsConfig& cfg, const std::vector<GurvitsRow>& rows) {
    const RunHeader h = gurvits_header(cfg);
    write_header(out, h);
    out << "n,instances,seed,config_hash,mean_perm_over_product,std_perm_over_product,mean_perm_over_bp,std_perm_over_bp,violations\n";
    for (const auto& r : rows)
        out << r.n << ',' << r.instances << ',' << cfg.seed << ',' << h.hash_hex() << ','
            << format_double(r.mean_perm_over_product) << ',' << format_double(r.std_perm_over_product) << ','
            << format_double(r.mean_perm_over_bp) << ',' << format_double(r.std_perm_over_bp) << ',' << r.violations
            << '\n';
}

// ---------------------------------------------------------------- engine cost

RunHeader cost_header(const CostConfig& cfg) {
    RunHeader h{"cost", {}};
    h.add("n", static_cast<long long>(cfg.n));
    h.add("sparsity", join(cfg.sparsity));
    h.add("instances", static_cast<long long>(cfg.instances));
    h.add("seed", static_cast<long long>(cfg.seed));
    h.add("ensemble", describe(cfg.ensemble));
    h.add("budget_factor", cfg.budget_factor);
    h.add("zdd_node_cap", static_cast<long long>(cfg.zdd_node_cap));
    return h;
}

std::vector<CostRow> run_cost_comparison(const CostConfig& cfg) {
    if (cfg.n > kRyserMaxN) throw Error(ErrorCode::too_large, "cost comparison needs n <= " + std::to_string(kRyserMaxN));
    std::vector<std::pair<double, int>> jobs;
    for (double s : cfg.sparsity) {
        if (!(s >= 0.0 && s < 1.0)) throw Error(ErrorCode::invalid_argument, "sparsity must lie in [0, 1)");
        for (int k = 0; k < cfg.instances; ++k) jobs.emplace_back(s, k);
    }
    std::vector<CostRow> rows(jobs.size());
    parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
        const auto [s, k] = jobs[i];
        CostRow& r = rows[i];
        r.n = cfg.n;
        r.sparsity = s;
        r.instance = k;
        r.seed = instance_seed(cfg.seed, cfg.n, k);
        WeightMatrix p = generate(cfg.ensemble, cfg.n, r.seed);
        if (s > 0.0) p = prune_fraction(p, 1.0 - s);
        r.nnz = p.nnz();

        CostCounter rc;
        const LogValue ry = ryser_permanent(p, &rc);
        r.ryser_cost = rc.total();

        CostCounter zc;
        zc.budget = static_cast<std::uint64_t>(cfg.budget_factor * static_cast<double>(r.ryser_cost));
        try {
            const Zdd z = build_matching_zdd(p, &zc, cfg.zdd_node_cap);
            r.zdd_nodes = z.size();
            const LogValue zv = weighted_count(z, p, &zc);
            if (zc.total() > zc.budget) throw Error(ErrorCode::budget_exceeded, "cost budget exceeded");
            r.zdd_cost = zc.total();
            r.relative_gap = relative_difference(ry, zv);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::budget_exceeded && e.code() != ErrorCode::capacity) throw;
            r.zdd_censored = true;
            r.zdd_cost = std::max(zc.budget, zc.total());
            r.relative_gap = std::numeric_limits<double>::quiet_NaN();
        }
    });
    return rows;
}

void write_cost_csv(std::ostream& out, const CostConfig& cfg, const std::vector<CostRow>& rows) {
    const RunHeader h = cost_header(cfg);
    write_header(out, h);
    out << "n,sparsity,instance,seed,config_hash,nnz,ryser_cost,zdd_cost,zdd_nodes,zdd_censored,relative_gap\n";
    for (const auto& r : rows)
        out << r.n << ',' << format_double(r.sparsity) << ',' << r.instance << ',' << r.seed << ',' << h.hash_hex() << ','
            << r.nnz << ',' << r.ryser_cost << ',' << r.zdd_cost << ',' << r.zdd_nodes << ',' << (r.zdd_censored ? 1 : 0)
            << ',' << format_double(r.relative_gap) << '\n';
}

// ---------------------------------------------------------------- identity check

RunHeader verify_header(const VerifyConfig& cfg) {
    RunHeader h{"verify", {}};
    cfg.batch.describe(h);
    h.add("gammas", join(cfg.gammas));
    h.add("threshold", cfg.threshold);
    describe_solver(h, cfg.solver);
    return h;
}

VerifyResult verify_identities(const VerifyConfig& cfg) {
    const auto jobs = jobs_of(cfg.batch);
    const std::size_t ng = cfg.gammas.size();
    std::vector<VerifyRow> rows(jobs.size() * ng);
    parallel_for(jobs.size(), cfg.batch.threads, [&](std::size_t i) {
        const Job& j = jobs[i];
        const WeightMatrix p = apply_pruning(generate(cfg.batch.ensemble, j.n, j.seed), cfg.batch.prune);
        for (std::size_t k = 0; k < ng; ++k) {
            VerifyRow& r = rows[i * ng + k];
            r.n = j.n;
            r.instance = j.instance;
            r.seed = j.seed;
            r.gamma = cfg.gammas[k];
            SolverConfig s = cfg.solver;
            s.gamma = r.gamma;
            const SolveResult res = solve_fractional(p, s);
            r.status = to_string(res.status);
            r.residual = res.residual;
            r.ds_deviation = res.beliefs.max_ds_deviation();
            const IdentityReport id = check_exact_identity(p, res, r.gamma);
            r.applicable = id.applicable;
            r.relative_gap = id.applicable ? id.relative_gap : std::numeric_limits<double>::quiet_NaN();
        }
    });
    VerifyResult out;
    for (const auto& r : rows) {
        if (r.status == std::string(to_string(SolveStatus::non_converged))) ++out.non_converged;
        if (!r.applicable) continue;
        ++out.checked;
        out.max_gap = std::max(out.max_gap, r.relative_gap);
    }
    out.ok = out.max_gap <= cfg.threshold;
    out.rows = std::move(rows);
    return out;
}

void write_verify_csv(std::ostream& out, const VerifyConfig& cfg, const VerifyResult& result) {
    const RunHeader h = verify_header(cfg);
    write_header(out, h);
    const std::string ens = to_string(cfg.batch.ensemble.kind);
    out << "ensemble,n,instance,seed,config_hash,gamma,status,applicable,relative_gap,residual,ds_deviation\n";
    for (const auto& r : result.rows)
        out << ens << ',' << r.n << ',' << r.instance << ',' << r.seed << ',' << h.hash_hex() << ','
            << format_double(r.gamma) << ',' << r.status << ',' << (r.applicable ? 1 : 0) << ','
            << format_double(r.relative_gap) << ',' << format_double(r.residual) << ',' << format_double(r.ds_deviation)
            << '\n';
}

// ---------------------------------------------------------------- summaries

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace fracperm
