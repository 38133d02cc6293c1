#pragma once

// Explicit path-space machinery. Everything here works on fully enumerated
// laws and is meant as ground truth for the scaling solver, so none of it
// goes through the telescopic expansion or the Sinkhorn code.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "stopbridge/kernel_synthesis.hpp"

namespace stopbridge {

inline constexpr std::size_t kDefaultEnumerationCap = 2'000'000;

/// Lexicographically ordered set of paths x_0..x_t over global state indices
/// (absorbing 0..m-1, transient m..m+n-1). Absorbed paths are padded with
/// self-loops up to the horizon.
class PathSet {
public:
    PathSet(int num_absorbing, int num_transient, int horizon, std::vector<int> flat_states);

    std::size_t size() const { return states_.size() / static_cast<std::size_t>(horizon_ + 1); }
    int horizon() const { return horizon_; }
    int num_absorbing() const { return num_absorbing_; }
    int num_transient() const { return num_transient_; }
    int num_states() const { return num_absorbing_ + num_transient_; }

    std::span<const int> path(std::size_t i) const {
        const auto len = static_cast<std::size_t>(horizon_ + 1);
        return {states_.data() + i * len, len};
    }

    /// (absorbing index, 1-based time) of the first arrival, if any.
    std::optional<std::pair<int, int>> first_arrival(std::size_t i) const;

    bool operator==(const PathSet&) const = default;

private:
    int num_absorbing_;
    int num_transient_;
    int horizon_;
    std::vector<int> states_;
};

/// Masses on a shared PathSet. Prior and posterior laws are normalized;
/// cost-tilted reference measures generally are not.
struct PathLaw {
    std::shared_ptr<const PathSet> paths;
    Vector probs;

    std::size_t size() const { return paths->size(); }
    double total() const { return probs.sum(); }
};

/// (m+n)^(t+1), saturating at SIZE_MAX.
std::size_t path_space_size(int num_states, int horizon);

/// Builds a law from an explicit table; rows are sorted into lexicographic
/// order. Throws DimensionMismatch on malformed or non-absorbing paths.
PathLaw make_path_law(int num_absorbing, int num_transient, int horizon,
                      std::vector<std::vector<int>> paths, std::vector<double> probs);

/// All paths with positive mass under mu(x_0) * prod stages. Throws
/// StateSpaceTooLarge when (m+n)^(t+1) exceeds `cap`.
PathLaw enumerate_paths(int num_absorbing, std::span<const StageKernel> stages, const Vector& mu,
                        std::size_t cap = kDefaultEnumerationCap);
PathLaw enumerate_paths(const PriorLaw& prior, const Vector& mu,
                        std::size_t cap = kDefaultEnumerationCap);
PathLaw enumerate_paths(const Policy& policy, const Vector& mu,
                        std::size_t cap = kDefaultEnumerationCap);

/// Mass of the given stages on an existing path set (zero allowed).
PathLaw evaluate_on(const std::shared_ptr<const PathSet>& paths,
                    std::span<const StageKernel> stages, const Vector& mu);

/// Sum P log(P/Q) with 0 log 0 = 0; +infinity without absolute continuity.
double kl_divergence(const PathLaw& P, const PathLaw& Q);
double total_variation(const PathLaw& P, const PathLaw& Q);

/// Arrival masses and horizon residual read off an explicit law.
ArrivalDistribution path_arrivals(const PathLaw& P);

struct IpfOptions {
    int max_sweeps = 100000;
    double tol = 1e-13;
};

/// I-projection of Q onto {initial marginal = mu_hat0, first-arrival masses
/// = nu_hat} by cyclic proportional fitting on paths. The arrival family is
/// the partition of paths by first-arrival class (j, tau) plus the
/// never-absorbed class, whose target is 1 - sum(nu_hat). Throws NotConverged.
PathLaw ipf_project(const PathLaw& Q, const Vector& mu_hat0, const Matrix& nu_hat,
                    const IpfOptions& options = {});

/// I-projection onto fixed distributions of x_0 and x_t, both over all m+n
/// states (global index order).
PathLaw ipf_project_endpoints(const PathLaw& Q, const Vector& mu_start, const Vector& mu_end,
                              const IpfOptions& options = {});

/// I-projection onto an arbitrary list of partition constraints. `cells[i]`
/// assigns path i to a cell, `targets` holds the cell masses.
struct PartitionConstraint {
    std::vector<int> cell_of_path;
    Vector targets;
};
PathLaw ipf_project_partitions(const PathLaw& Q, std::span<const PartitionConstraint> families,
                               const IpfOptions& options = {});

struct MarkovianityReport {
    double worst_violation = 0.0;
    int tau = -1;    // time of the worst violation
    int state = -1;  // shared state x_tau
    bool passed = true;
};

/// For every tau and every pair of positive-mass histories ending in the same
/// state, compares the conditional next-step distributions.
MarkovianityReport markovianity_check(const PathLaw& P, double tol);

struct SharedBridgesReport {
    double worst_violation = 0.0;
    bool passed = true;
};

/// Compares P(x | x_0, terminal class) with Q(x | x_0, terminal class), where
/// the terminal class is the first arrival (j, tau) or the transient state at
/// the horizon for walkers never absorbed.
SharedBridgesReport shared_bridges_check(const PathLaw& Q, const PathLaw& P, double tol);

/// Mass sitting at absorbing state j at time tau, i.e. arrived at or before tau.
double cumulative_constraint_eval(const PathLaw& P, int j, int tau);

}  // namespace stopbridge
