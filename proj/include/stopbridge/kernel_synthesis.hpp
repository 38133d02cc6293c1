#pragma once

#include <span>
#include <vector>

#include "stopbridge/sinkhorn.hpp"

namespace stopbridge {

struct SolverProvenance {
    double tol = 0.0;
    int max_iter = 0;
    int iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
};

/// Posterior Markov policy: one (B*, A*) pair per stage.
///
/// Rows whose left scaling vanishes (no posterior mass can sit there) are
/// all-zero and listed in `unreachable_rows[tau-1]`; every other row of
/// [B*_tau A*_tau] sums to one.
struct Policy {
    StateSpace space;
    int horizon = 0;
    std::vector<StageKernel> stages;
    std::vector<Vector> d_vectors;  // d_1 .. d_t; d_t is all ones
    Vector kernel_D0;
    Matrix lambda;  // m x t
    std::vector<std::vector<int>> unreachable_rows;
    SolverProvenance provenance;
};

/// Builds the per-stage kernels from converged scalings:
///   B*_tau = D_{tau-1} B_tau Lambda_tau,  A*_tau = D_{tau-1} A_tau diag(d_tau)
/// with D_0 the kernel-scale row scaling and D_tau = diag(d_tau)^+ (zero-safe
/// reciprocal). The d_tau are accumulated right to left:
///   d_t = 1,  d_tau = B_{tau+1} Lambda_{tau+1} + A_{tau+1} d_{tau+1}.
///
/// Throws ScalingMismatch on inconsistent dimensions and NonStochasticOutput
/// when a reachable row strays from one by more than 1e-8.
Policy synthesize(const StateSpace& space, std::span<const StageKernel> stages,
                  const Vector& mu_hat, const ScalingPair& scalings);
Policy synthesize(const PriorLaw& prior, const Vector& mu_hat, const ScalingPair& scalings);

/// First-arrival masses and horizon residual of the walk driven by `policy`.
ArrivalDistribution induced_marginals(const Policy& policy, const Vector& mu_hat0);

struct Solution {
    Policy policy;
    ScalingPair scalings;
    SinkhornDiagnostics diagnostics;
    PartitionedMatrix expansion;
};

/// Expansion, Sinkhorn and synthesis in one call over arbitrary nonnegative
/// stage factors. Does not throw on non-convergence; inspect diagnostics.
Solution solve_stages(const StateSpace& space, std::span<const StageKernel> stages,
                      const MarginalSpec& spec, const SinkhornOptions& options = {});
Solution solve(const PriorLaw& prior, const MarginalSpec& spec,
               const SinkhornOptions& options = {});

}  // namespace stopbridge
