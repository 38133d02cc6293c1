#pragma once

#include <vector>

#include "stopbridge/path_oracle.hpp"

namespace stopbridge {

/// Edge costs per stage, shaped like the stage kernels: U[tau-1].B(x, j) is the
/// cost of arriving at absorbing j from transient x at step tau, U[tau-1].A(x, z)
/// the cost of the transient move. Absorbing self-loops cost nothing.
struct EdgeCostSchedule {
    std::vector<StageKernel> U;
    double beta_inv = 1.0;

    static EdgeCostSchedule from_beta(std::vector<StageKernel> costs, double beta);
    double beta() const { return 1.0 / beta_inv; }
};

/// Largest admissible beta * |U| before exp(-beta U) leaves double range.
inline constexpr double kMaxExponent = 700.0;

/// Prior factors reweighted by exp(-beta U). Rows need not sum to one.
struct TiltedPrior {
    StateSpace space;
    int horizon = 0;
    std::vector<StageKernel> factors;
    Vector mu0;
};

/// Throws Overflow when beta * max|U| > 700 and DimensionMismatch on shape errors.
TiltedPrior tilt_prior(const PriorLaw& prior, const EdgeCostSchedule& costs);

/// Cumulative cost of one padded path.
double path_cost(std::span<const int> path, int num_absorbing, const EdgeCostSchedule& costs);

/// Expected cumulative path cost.
double transport_cost(const PathLaw& P, const EdgeCostSchedule& costs);

/// J(P) + beta^{-1} KL(P || Q); +infinity when P is not absolutely continuous.
double free_energy(const PathLaw& P, const PathLaw& Q, const EdgeCostSchedule& costs);

/// Free energy evaluated as a divergence from the normalized tilted measure:
///   F = beta^{-1} (KL(P || Q e^{-beta U} / Z) - log Z).
struct TiltedFreeEnergy {
    double value = 0.0;
    double log_partition = 0.0;  // log Z
};
TiltedFreeEnergy free_energy_via_tilt(const PathLaw& P, const PathLaw& Q,
                                      const EdgeCostSchedule& costs);

/// Minimizer of the free energy under the marginal constraints: the usual
/// solve applied to the tilted factors.
Solution solve_regularized(const PriorLaw& prior, const EdgeCostSchedule& costs,
                           const MarginalSpec& spec, const SinkhornOptions& options = {});

}  // namespace stopbridge
