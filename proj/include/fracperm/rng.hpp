#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fracperm {

/// splitmix64 finalizer; used to derive independent seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed of stream `stream` under master seed `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// mt19937_64 with hand-written variate transforms. The standard library's
/// distributions are implementation-defined, so they are avoided to keep the
/// same seed producing the same matrices on every toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(derive_seed(seed, stream)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on (0, 1], 53 random bits.
    double uniform_open0() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);

    double exponential(double mean);

    /// Standard normal (Box-Muller, one value cached).
    double normal();

    /// Uniformly random permutation of 0..n-1 (Fisher-Yates).
    std::vector<int> permutation(int n);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fracperm
