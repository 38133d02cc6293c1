#include "stopbridge/verify.hpp"

#include <cmath>

namespace stopbridge {

VerificationReport verify_solution(const PriorLaw& prior, const MarginalSpec& spec, const Policy& policy,
                                   const std::optional<EdgeCostSchedule>& costs,
                                   const VerifyOptions& options) {
    const int m = prior.space.num_absorbing();

    // reference measure: prior started from mu_hat0, tilted by the costs if any
    std::vector<StageKernel> reference = prior.stages;
    if (costs) reference = tilt_prior(prior, *costs).factors;
    const PathLaw Q = enumerate_paths(m, std::span<const StageKernel>(reference), spec.mu_hat0, options.cap);
    const PathLaw P = evaluate_on(Q.paths, std::span<const StageKernel>(policy.stages), spec.mu_hat0);
    const PathLaw ipf = ipf_project(Q, spec.mu_hat0, spec.nu_hat, options.ipf);

    VerificationReport r;
    r.num_paths = Q.size();
    r.kl_policy = kl_divergence(P, Q);
    r.kl_ipf = kl_divergence(ipf, Q);
    r.tv_policy_ipf = total_variation(P, ipf);

    // initial marginal straight off the paths
    Vector start = Vector::Zero(spec.mu_hat0.size());
    for (std::size_t i = 0; i < P.size(); ++i) start(P.paths->path(i)[0] - m) += P.probs(static_cast<Eigen::Index>(i));
    r.initial_residual = (start - spec.mu_hat0).cwiseAbs().maxCoeff();
    r.arrival_residual = (path_arrivals(P).arrivals - spec.nu_hat).cwiseAbs().maxCoeff();

    r.markov_ipf = markovianity_check(ipf, options.markov_tol);
    r.markov_policy = markovianity_check(P, options.markov_tol);
    r.shared_bridges = shared_bridges_check(Q, P, options.bridge_tol);
    if (costs) {
        const PathLaw prior_law = enumerate_paths(prior, spec.mu_hat0, options.cap);
        const PathLaw P_on_prior = evaluate_on(prior_law.paths, std::span<const StageKernel>(policy.stages),
                                               spec.mu_hat0);
        r.free_energy = free_energy(P_on_prior, prior_law, *costs);
    }

    r.tv_passed = r.tv_policy_ipf <= options.tv_tol;
    r.constraints_passed = r.initial_residual <= options.constraint_tol && r.arrival_residual <= options.constraint_tol;
    r.kl_passed = std::isfinite(r.kl_policy) && r.kl_policy <= r.kl_ipf + options.kl_margin;
    return r;
}

}  // namespace stopbridge
