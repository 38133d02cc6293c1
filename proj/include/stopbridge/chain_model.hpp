#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "stopbridge/errors.hpp"

namespace stopbridge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Tolerance on row sums and total masses of validated inputs.
inline constexpr double kStochasticTol = 1e-12;

/// Labeled partition of the vertex set. Absorbing states come first in the
/// global index (0..m-1), transient states follow (m..m+n-1).
class StateSpace {
public:
    StateSpace() = default;
    StateSpace(std::vector<std::string> absorbing, std::vector<std::string> transient);

    int num_absorbing() const { return static_cast<int>(absorbing_.size()); }
    int num_transient() const { return static_cast<int>(transient_.size()); }
    int num_states() const { return num_absorbing() + num_transient(); }

    const std::vector<std::string>& absorbing_labels() const { return absorbing_; }
    const std::vector<std::string>& transient_labels() const { return transient_; }

    /// Global index of a label, or nullopt.
    std::optional<int> index_of(const std::string& label) const;
    const std::string& label(int global_index) const;
    bool is_absorbing(int global_index) const { return global_index < num_absorbing(); }

    bool operator==(const StateSpace&) const = default;

private:
    std::vector<std::string> absorbing_;
    std::vector<std::string> transient_;
};

/// One stage of the walk restricted to transient rows: B is n x m
/// (transient -> absorbing), A is n x n (transient -> transient). The identity
/// block on absorbing rows is implicit.
///
/// Validated prior kernels are row-stochastic; tilted factors and synthesized
/// kernels reuse the same type without that guarantee.
struct StageKernel {
    Matrix B;
    Matrix A;

    Vector row_sums() const { return B.rowwise().sum() + A.rowwise().sum(); }
    bool operator==(const StageKernel& o) const { return B == o.B && A == o.A; }
};

struct PriorLaw {
    StateSpace space;
    int horizon = 0;
    std::vector<StageKernel> stages;
    Vector mu0;  // over transient states

    bool operator==(const PriorLaw& o) const {
        return space == o.space && horizon == o.horizon && stages == o.stages && mu0 == o.mu0;
    }
};

struct MarginalSpec {
    Vector mu_hat0;  // over transient states
    Matrix nu_hat;   // m x t, entry (j, tau-1) is the first-arrival target at j at time tau

    double total_arrival_mass() const { return nu_hat.sum(); }
    bool operator==(const MarginalSpec& o) const {
        return mu_hat0 == o.mu_hat0 && nu_hat == o.nu_hat;
    }
};

struct ValidationOptions {
    /// Rescale rows of [B A] (and mu0) to sum to one instead of rejecting them.
    bool renormalize = false;
};

/// Validates and assembles a prior. A single stage is replicated over the
/// horizon. `mu0` may have length n (transient only) or m+n (absorbing first,
/// absorbing entries must be zero).
PriorLaw validate_prior(const StateSpace& space, int horizon, std::vector<StageKernel> stages,
                        const Vector& mu0, const ValidationOptions& options = {});

/// Re-checks an assembled prior; returns an equal copy.
PriorLaw validate_prior(const PriorLaw& prior, const ValidationOptions& options = {});

MarginalSpec validate_marginals(const StateSpace& space, int horizon, const Vector& mu_hat0,
                                const Matrix& nu_hat);

struct ZeroSupportCell {
    int absorbing = 0;  // index into absorbing labels
    int tau = 0;        // 1-based time
    double target = 0.0;
};

/// Targets demanding mass where the prior cannot deliver any. An empty list
/// is necessary (not sufficient) for feasibility.
struct FeasibilityReport {
    std::vector<ZeroSupportCell> cells;
    bool passed() const { return cells.empty(); }
};

FeasibilityReport support_feasibility_report(const PriorLaw& prior, const MarginalSpec& spec);

}  // namespace stopbridge
