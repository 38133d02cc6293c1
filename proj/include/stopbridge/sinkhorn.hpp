#pragma once

#include <vector>

#include "stopbridge/space_time.hpp"

namespace stopbridge {

struct SinkhornOptions {
    double tol = 1e-10;
    int max_iter = 10000;
};

struct SinkhornDiagnostics {
    int iterations = 0;  // number of column-scaling updates performed
    double final_residual = 0.0;
    bool converged = false;
    std::vector<double> residual_history;
};

/// Diagonal scalings of the partitioned kernel. D is on the joint-law scale:
/// diag(D) (Bcal Lambda + Acal 1) = mu_hat. Lambda is indexed like Bcal's columns.
struct ScalingPair {
    Vector D;
    Vector Lambda;
    int num_absorbing = 0;
    int horizon = 0;

    double lambda(int j, int tau) const { return Lambda((tau - 1) * num_absorbing + j); }
    /// Lambda reshaped to m x t.
    Matrix lambda_table() const;
    /// Row scaling that makes the posterior kernel row-stochastic: D / mu_hat
    /// entrywise, 0/0 = 0. This is the D_0 reported by the CLI.
    Vector kernel_scaling(const Vector& mu_hat) const;
};

struct SinkhornResult {
    ScalingPair scalings;
    SinkhornDiagnostics diagnostics;
};

/// Alternating row/column scaling for the single-stage problem with a fully
/// specified row marginal and a partially specified column marginal on the
/// Bcal block. Starts from Lambda = 1. Stops once the larger of the row and
/// column L-infinity residuals is <= tol, or after max_iter updates (then
/// diagnostics.converged is false and the last iterate is returned).
///
/// Throws DivisionBlowup when a positive target meets a zero denominator.
SinkhornResult sinkhorn_partial(const Matrix& Bcal, const Matrix& Acal, const Vector& mu_hat,
                                const Vector& nu_hat, const SinkhornOptions& options = {});

inline SinkhornResult sinkhorn_partial(const PartitionedMatrix& pm, const Vector& mu_hat,
                                       const Vector& nu_hat, const SinkhornOptions& options = {}) {
    auto result = sinkhorn_partial(pm.Bcal, pm.Acal, mu_hat, nu_hat, options);
    result.scalings.num_absorbing = pm.num_absorbing;
    result.scalings.horizon = pm.horizon;
    return result;
}

struct ClassicalScalings {
    Vector row;
    Vector col;
    SinkhornDiagnostics diagnostics;

    /// diag(row) G diag(col)
    Matrix coupling(const Matrix& G) const { return row.asDiagonal() * G * col.asDiagonal(); }
};

/// Two-endpoint bridge: diag(row) G diag(col) has row sums mu_start and column
/// sums mu_end.
ClassicalScalings classical_sb(const Matrix& G, const Vector& mu_start, const Vector& mu_end,
                               const SinkhornOptions& options = {});

}  // namespace stopbridge
