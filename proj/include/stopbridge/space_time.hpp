#pragma once

#include <span>

#include "stopbridge/chain_model.hpp"

namespace stopbridge {

/// Telescopic expansion of the whole horizon into one partitioned kernel
/// [Bcal Acal]. Column block tau of Bcal (1-based) holds (A_1...A_{tau-1}) B_tau,
/// i.e. the probability of first arriving at each absorbing state at time tau.
/// Acal = A_1...A_t carries the walkers still transient at the horizon.
struct PartitionedMatrix {
    Matrix Bcal;  // n x (m*t)
    Matrix Acal;  // n x n
    int num_absorbing = 0;
    int horizon = 0;

    /// Column of Bcal for absorbing state j (0-based) first reached at tau (1-based).
    int column(int j, int tau) const { return (tau - 1) * num_absorbing + j; }
    auto block(int tau) const { return Bcal.middleCols((tau - 1) * num_absorbing, num_absorbing); }
};

PartitionedMatrix telescopic_expand(std::span<const StageKernel> stages);
PartitionedMatrix telescopic_expand(const PriorLaw& prior);

/// First-arrival masses (m x t) and the unabsorbed mass on each transient
/// state at the horizon.
struct ArrivalDistribution {
    Matrix arrivals;
    Vector residual;

    double total() const { return arrivals.sum() + residual.sum(); }
};

/// Stage-by-stage forward propagation of `mu` through the stage factors.
ArrivalDistribution arrival_distribution(std::span<const StageKernel> stages, const Vector& mu);
ArrivalDistribution prior_arrival_distribution(const PriorLaw& prior, const Vector& mu);

/// Flattens an m x t arrival matrix into the (tau-major) column order of Bcal.
Vector flatten_arrivals(const Matrix& arrivals);
Matrix unflatten_arrivals(const Vector& flat, int num_absorbing, int horizon);

}  // namespace stopbridge
