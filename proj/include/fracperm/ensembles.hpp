#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "fracperm/log_value.hpp"
#include "fracperm/matrix.hpp"

namespace fracperm {

/// Linear flow with velocity gradient M = [[a, b + c], [b - c, -a]]
/// (stretching a, shear b, rotation c) and diffusion coefficient kappa.
struct FlowParams {
    double a = 0.5;
    double b = 0.5;
    double c = 0.5;
    double kappa = 0.5;
    double dt = 1.0;
};

/// exp(M dt) for the traceless velocity gradient, row-major 2x2.
std::array<double, 4> flow_propagator(const FlowParams& f);

/// Particles x_i uniform in the unit square, advected by the input flow,
/// randomly relabelled and diffused: y_i = exp(M_in dt) x_s(i) + sqrt(2 kappa_in dt) N.
/// p_ij = exp(-|y_j - exp(M_out dt) x_i|^2 / (4 kappa_out dt)). Underflowed
/// entries become structural zeros.
WeightMatrix gen_flow(int n, const FlowParams& in, const FlowParams& out, std::uint64_t seed);

/// i.i.d. Uniform(0, rho].
WeightMatrix gen_uniform(int n, double rho, std::uint64_t seed);

/// i.i.d. exponential with mean delta.
WeightMatrix gen_exponential(int n, double delta, std::uint64_t seed);

/// Block diagonal of 2x2 blocks filled with 1/2, plus i.i.d. Uniform(0, rho]
/// on every cell when rho > 0. n must be even.
WeightMatrix gen_shifted(int n, double rho, std::uint64_t seed);

/// w^(1/T) on the diagonal, 1 elsewhere.
WeightMatrix gen_pdet(int n, double w, double T);

/// Closed form for perm(gen_pdet(n, w, T)): sum_k w^((n-k)/T) C(n,k) D_k with
/// derangement numbers D_k.
LogValue pdet_exact(int n, double w, double T);

/// Derangement count D_k as a double (exact up to k = 18).
double derangements(int k);

enum class EnsembleKind { flow, uniform, exponential, shifted, pdet };

EnsembleKind parse_ensemble_kind(const std::string& name);
const char* to_string(EnsembleKind kind);

struct EnsembleSpec {
    EnsembleKind kind = EnsembleKind::uniform;
    double rho = 1.0;    // uniform, shifted
    double delta = 1.0;  // exponential
    FlowParams flow_in{};
    FlowParams flow_out{};
    double w = 2.0;  // pdet
    double T = 1.0;  // pdet
};

WeightMatrix generate(const EnsembleSpec& spec, int n, std::uint64_t seed);

/// Stable one-line description of the spec, used in run headers and hashes.
std::string describe(const EnsembleSpec& spec);

}  // namespace fracperm
