#include "stopbridge/cost_transport.hpp"

#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace stopbridge {

EdgeCostSchedule EdgeCostSchedule::from_beta(std::vector<StageKernel> costs, double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw Error(ErrorKind::Parse, "beta", fmt::format("beta must be positive and finite, got {}", beta));
    return EdgeCostSchedule{std::move(costs), 1.0 / beta};
}

TiltedPrior tilt_prior(const PriorLaw& prior, const EdgeCostSchedule& costs) {
    const int m = prior.space.num_absorbing();
    const int n = prior.space.num_transient();
    if (costs.U.size() != prior.stages.size())
        throw Error(ErrorKind::DimensionMismatch, "costs",
                    fmt::format("{} cost stages for horizon {}", costs.U.size(), prior.horizon));
    if (!(costs.beta_inv > 0.0))
        throw Error(ErrorKind::Parse, "beta", "temperature must be positive");
    const double beta = costs.beta();

    TiltedPrior out{prior.space, prior.horizon, {}, prior.mu0};
    out.factors.reserve(prior.stages.size());
    for (std::size_t s = 0; s < prior.stages.size(); ++s) {
        const StageKernel& U = costs.U[s];
        if (U.B.rows() != n || U.B.cols() != m || U.A.rows() != n || U.A.cols() != n)
            throw Error(ErrorKind::DimensionMismatch, fmt::format("costs[{}]", s), "cost stage shape mismatch");
        if (!U.B.allFinite() || !U.A.allFinite())
            throw Error(ErrorKind::Parse, fmt::format("costs[{}]", s), "costs must be finite");
        const double worst = std::max(U.B.cwiseAbs().maxCoeff(), U.A.cwiseAbs().maxCoeff());
        if (beta * worst > kMaxExponent)
            throw Error(ErrorKind::Overflow, fmt::format("costs[{}]", s),
                        fmt::format("beta * max|U| = {} leaves the exp range", beta * worst));
        const StageKernel& P = prior.stages[s];
        out.factors.push_back(StageKernel{P.B.cwiseProduct((-beta * U.B).array().exp().matrix()),
                                          P.A.cwiseProduct((-beta * U.A).array().exp().matrix())});
    }
    return out;
}

double path_cost(std::span<const int> path, int num_absorbing, const EdgeCostSchedule& costs) {
    double total = 0.0;
    for (std::size_t tau = 1; tau < path.size(); ++tau) {
        const int from = path[tau - 1];
        const int to = path[tau];
        if (from < num_absorbing) break;
        const StageKernel& U = costs.U[tau - 1];
        total += to < num_absorbing ? U.B(from - num_absorbing, to) : U.A(from - num_absorbing, to - num_absorbing);
    }
    return total;
}

double transport_cost(const PathLaw& P, const EdgeCostSchedule& costs) {
    const auto& set = *P.paths;
    double total = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const double w = P.probs(static_cast<Eigen::Index>(i));
        if (w != 0.0) total += w * path_cost(set.path(i), set.num_absorbing(), costs);
    }
    return total;
}

double free_energy(const PathLaw& P, const PathLaw& Q, const EdgeCostSchedule& costs) {
    const double kl = kl_divergence(P, Q);
    if (std::isinf(kl)) return std::numeric_limits<double>::infinity();
    return transport_cost(P, costs) + costs.beta_inv * kl;
}

TiltedFreeEnergy free_energy_via_tilt(const PathLaw& P, const PathLaw& Q, const EdgeCostSchedule& costs) {
    const auto& set = *Q.paths;
    const double beta = costs.beta();
    PathLaw tilted{Q.paths, Q.probs};
    for (std::size_t i = 0; i < set.size(); ++i)
        tilted.probs(static_cast<Eigen::Index>(i)) *= std::exp(-beta * path_cost(set.path(i), set.num_absorbing(), costs));
    const double Z = tilted.total();
    tilted.probs /= Z;

    TiltedFreeEnergy out;
    out.log_partition = std::log(Z);
    const double kl = kl_divergence(P, tilted);
    out.value = std::isinf(kl) ? kl : costs.beta_inv * (kl - out.log_partition);
    return out;
}

Solution solve_regularized(const PriorLaw& prior, const EdgeCostSchedule& costs, const MarginalSpec& spec,
                           const SinkhornOptions& options) {
    const TiltedPrior tilted = tilt_prior(prior, costs);
    return solve_stages(prior.space, std::span<const StageKernel>(tilted.factors), spec, options);
}

}  // namespace stopbridge
