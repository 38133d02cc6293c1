#include "stopbridge/kernel_synthesis.hpp"

#include <cmath>
#include <fmt/format.h>

namespace stopbridge {

namespace {

constexpr double kRowSumGuard = 1e-8;

Vector generalized_reciprocal(const Vector& v) {
    Vector out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = v(i) == 0.0 ? 0.0 : 1.0 / v(i);
    return out;
}

}  // namespace

Policy synthesize(const StateSpace& space, std::span<const StageKernel> stages, const Vector& mu_hat,
                  const ScalingPair& scalings) {
    const int t = static_cast<int>(stages.size());
    const int m = space.num_absorbing();
    const int n = space.num_transient();
    if (scalings.D.size() != n || mu_hat.size() != n || scalings.Lambda.size() != m * t)
        throw Error(ErrorKind::ScalingMismatch, "scalings",
                    fmt::format("D has {} entries, Lambda {}; expected {} and {}", scalings.D.size(),
                                scalings.Lambda.size(), n, m * t));

    auto lambda = [&](int tau) { return scalings.Lambda.segment((tau - 1) * m, m); };

    // d[tau] for tau = 0..t; d[0] is never used (stage 1 takes the kernel D_0).
    std::vector<Vector> d(static_cast<std::size_t>(t + 1));
    d[t] = Vector::Ones(n);
    for (int tau = t - 1; tau >= 1; --tau) {
        const StageKernel& next = stages[static_cast<std::size_t>(tau)];
        d[tau] = next.B * lambda(tau + 1) + next.A * d[tau + 1];
    }

    Policy policy;
    policy.space = space;
    policy.horizon = t;
    policy.kernel_D0 = scalings.kernel_scaling(mu_hat);
    policy.lambda = Eigen::Map<const Matrix>(scalings.Lambda.data(), m, t);
    policy.stages.reserve(static_cast<std::size_t>(t));
    policy.unreachable_rows.resize(static_cast<std::size_t>(t));

    for (int tau = 1; tau <= t; ++tau) {
        const StageKernel& stage = stages[static_cast<std::size_t>(tau - 1)];
        const Vector left = tau == 1 ? policy.kernel_D0 : generalized_reciprocal(d[tau - 1]);
        StageKernel out;
        out.B = left.asDiagonal() * stage.B * lambda(tau).asDiagonal();
        out.A = left.asDiagonal() * stage.A * d[tau].asDiagonal();

        const Vector sums = out.row_sums();
        for (int x = 0; x < n; ++x) {
            if (left(x) == 0.0) {
                policy.unreachable_rows[static_cast<std::size_t>(tau - 1)].push_back(x);
                continue;
            }
            if (std::abs(sums(x) - 1.0) > kRowSumGuard)
                throw Error(ErrorKind::NonStochasticOutput, fmt::format("stages[{}]", tau - 1),
                            fmt::format("posterior row '{}' at stage {} sums to {:.17g}",
                                        space.transient_labels()[x], tau, sums(x)));
        }
        policy.stages.push_back(std::move(out));
    }

    policy.d_vectors.assign(d.begin() + 1, d.end());
    return policy;
}

Policy synthesize(const PriorLaw& prior, const Vector& mu_hat, const ScalingPair& scalings) {
    return synthesize(prior.space, std::span<const StageKernel>(prior.stages), mu_hat, scalings);
}

ArrivalDistribution induced_marginals(const Policy& policy, const Vector& mu_hat0) {
    return arrival_distribution(std::span<const StageKernel>(policy.stages), mu_hat0);
}

Solution solve_stages(const StateSpace& space, std::span<const StageKernel> stages,
                      const MarginalSpec& spec, const SinkhornOptions& options) {
    Solution sol;
    sol.expansion = telescopic_expand(stages);
    if (spec.nu_hat.rows() != space.num_absorbing() || spec.nu_hat.cols() != sol.expansion.horizon)
        throw Error(ErrorKind::DimensionMismatch, "nu_hat",
                    fmt::format("nu_hat is {}x{}, expected {}x{}", spec.nu_hat.rows(),
                                spec.nu_hat.cols(), space.num_absorbing(), sol.expansion.horizon));

    auto sk = sinkhorn_partial(sol.expansion, spec.mu_hat0, flatten_arrivals(spec.nu_hat), options);
    sol.scalings = std::move(sk.scalings);
    sol.diagnostics = std::move(sk.diagnostics);
    sol.policy = synthesize(space, stages, spec.mu_hat0, sol.scalings);
    sol.policy.provenance = SolverProvenance{options.tol, options.max_iter, sol.diagnostics.iterations,
                                             sol.diagnostics.final_residual,
                                             sol.diagnostics.converged};
    return sol;
}

Solution solve(const PriorLaw& prior, const MarginalSpec& spec, const SinkhornOptions& options) {
    return solve_stages(prior.space, std::span<const StageKernel>(prior.stages), spec, options);
}

}  // namespace stopbridge
