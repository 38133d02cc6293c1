#pragma once

#include <optional>

#include "stopbridge/cost_transport.hpp"

namespace stopbridge {

struct VerifyOptions {
    std::size_t cap = kDefaultEnumerationCap;
    double tv_tol = 1e-6;
    double markov_tol = 1e-6;
    double bridge_tol = 1e-6;
    double constraint_tol = 1e-8;
    double kl_margin = 1e-9;
    IpfOptions ipf;
};

/// Outcome of auditing a solved problem against the path-space oracle.
struct VerificationReport {
    std::size_t num_paths = 0;
    double kl_policy = 0.0;  // divergence of the policy law from the reference measure
    double kl_ipf = 0.0;     // same for the IPF projection
    double tv_policy_ipf = 0.0;
    double initial_residual = 0.0;
    double arrival_residual = 0.0;
    MarkovianityReport markov_ipf;
    MarkovianityReport markov_policy;
    SharedBridgesReport shared_bridges;
    std::optional<double> free_energy;  // only with costs

    bool tv_passed = false;
    bool constraints_passed = false;
    bool kl_passed = false;
    bool passed() const {
        return tv_passed && constraints_passed && kl_passed && markov_ipf.passed &&
               markov_policy.passed && shared_bridges.passed;
    }
};

/// Enumerates the reference path measure (the prior, or its cost tilt),
/// projects it with IPF and compares against the synthesized policy.
/// Throws StateSpaceTooLarge past the cap.
VerificationReport verify_solution(const PriorLaw& prior, const MarginalSpec& spec,
                                   const Policy& policy,
                                   const std::optional<EdgeCostSchedule>& costs = std::nullopt,
                                   const VerifyOptions& options = {});

}  // namespace stopbridge
