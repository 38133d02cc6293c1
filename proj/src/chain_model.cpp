#include "stopbridge/chain_model.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <set>

#include "stopbridge/space_time.hpp"

namespace stopbridge {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::RowSumViolation: return "RowSumViolation";
        case ErrorKind::NegativeEntry: return "NegativeEntry";
        case ErrorKind::InitialMassOnAbsorbing: return "InitialMassOnAbsorbing";
        case ErrorKind::MassExceedsOne: return "MassExceedsOne";
        case ErrorKind::NotConverged: return "NotConverged";
        case ErrorKind::DivisionBlowup: return "DivisionBlowup";
        case ErrorKind::ScalingMismatch: return "ScalingMismatch";
        case ErrorKind::NonStochasticOutput: return "NonStochasticOutput";
        case ErrorKind::Overflow: return "Overflow";
        case ErrorKind::StateSpaceTooLarge: return "StateSpaceTooLarge";
        case ErrorKind::Parse: return "Parse";
    }
    return "Unknown";
}

StateSpace::StateSpace(std::vector<std::string> absorbing, std::vector<std::string> transient)
    : absorbing_(std::move(absorbing)), transient_(std::move(transient)) {
    if (absorbing_.empty())
        throw Error(ErrorKind::DimensionMismatch, "states.absorbing",
                    "at least one absorbing state is required");
    if (transient_.empty())
        throw Error(ErrorKind::DimensionMismatch, "states.transient",
                    "at least one transient state is required");
    std::set<std::string> seen;
    for (const auto* list : {&absorbing_, &transient_}) {
        for (const auto& label : *list) {
            if (!seen.insert(label).second)
                throw Error(ErrorKind::DimensionMismatch, "states",
                            fmt::format("state label '{}' appears more than once", label));
        }
    }
}

std::optional<int> StateSpace::index_of(const std::string& label) const {
    auto a = std::find(absorbing_.begin(), absorbing_.end(), label);
    if (a != absorbing_.end()) return static_cast<int>(a - absorbing_.begin());
    auto t = std::find(transient_.begin(), transient_.end(), label);
    if (t != transient_.end()) return num_absorbing() + static_cast<int>(t - transient_.begin());
    return std::nullopt;
}

const std::string& StateSpace::label(int global_index) const {
    return is_absorbing(global_index) ? absorbing_.at(global_index)
                                      : transient_.at(global_index - num_absorbing());
}

namespace {

void check_shape(const Matrix& M, Eigen::Index rows, Eigen::Index cols, const std::string& field) {
    if (M.rows() != rows || M.cols() != cols)
        throw Error(ErrorKind::DimensionMismatch, field,
                    fmt::format("{} is {}x{}, expected {}x{}", field, M.rows(), M.cols(), rows, cols));
}

void check_entries(const Matrix& M, const std::string& field, bool probability) {
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
            const double v = M(r, c);
            if (!std::isfinite(v))
                throw Error(ErrorKind::Parse, field,
                            fmt::format("{}[{}][{}] is not finite", field, r, c));
            if (v < 0.0)
                throw Error(ErrorKind::NegativeEntry, field,
                            fmt::format("{}[{}][{}] = {} is negative", field, r, c, v));
            if (probability && v > 1.0 + kStochasticTol)
                throw Error(ErrorKind::RowSumViolation, field,
                            fmt::format("{}[{}][{}] = {} exceeds 1", field, r, c, v));
        }
    }
}

Vector transient_part(const StateSpace& space, const Vector& mu0, const std::string& field) {
    const int m = space.num_absorbing();
    const int n = space.num_transient();
    if (mu0.size() == n) return mu0;
    if (mu0.size() == m + n) {
        for (int j = 0; j < m; ++j) {
            if (mu0(j) != 0.0)
                throw Error(ErrorKind::InitialMassOnAbsorbing, field,
                            fmt::format("{} puts mass {} on absorbing state '{}'", field, mu0(j),
                                        space.absorbing_labels()[j]));
        }
        return mu0.tail(n);
    }
    throw Error(ErrorKind::DimensionMismatch, field,
                fmt::format("{} has length {}, expected {} (transient) or {} (all states)", field,
                            mu0.size(), n, m + n));
}

void check_probability_vector(Vector& v, const std::string& field, bool renormalize) {
    check_entries(v, field, true);
    const double total = v.sum();
    if (renormalize && total > 0.0) {
        v /= total;
        return;
    }
    if (std::abs(total - 1.0) > kStochasticTol)
        throw Error(ErrorKind::RowSumViolation, field,
                    fmt::format("{} sums to {:.17g}, deficit {:.3g}", field, total, 1.0 - total));
}

}  // namespace

PriorLaw validate_prior(const StateSpace& space, int horizon, std::vector<StageKernel> stages,
                        const Vector& mu0, const ValidationOptions& options) {
    const int m = space.num_absorbing();
    const int n = space.num_transient();
    if (horizon < 1)
        throw Error(ErrorKind::DimensionMismatch, "horizon", "horizon must be a positive integer");
    if (stages.size() == 1 && horizon > 1) stages.assign(static_cast<std::size_t>(horizon), stages.front());
    if (stages.size() != static_cast<std::size_t>(horizon))
        throw Error(ErrorKind::DimensionMismatch, "stages",
                    fmt::format("{} stages given for horizon {}", stages.size(), horizon));

    for (std::size_t s = 0; s < stages.size(); ++s) {
        auto& stage = stages[s];
        const std::string prefix = fmt::format("stages[{}]", s);
        check_shape(stage.B, n, m, prefix + ".B");
        check_shape(stage.A, n, n, prefix + ".A");
        check_entries(stage.B, prefix + ".B", true);
        check_entries(stage.A, prefix + ".A", true);
        const Vector sums = stage.row_sums();
        for (int x = 0; x < n; ++x) {
            if (options.renormalize && sums(x) > 0.0) {
                stage.B.row(x) /= sums(x);
                stage.A.row(x) /= sums(x);
                continue;
            }
            if (std::abs(sums(x) - 1.0) > kStochasticTol)
                throw Error(ErrorKind::RowSumViolation, prefix,
                            fmt::format("row '{}' of stage {} sums to {:.17g} (deficit {:.3g})",
                                        space.transient_labels()[x], s + 1, sums(x), 1.0 - sums(x)));
        }
    }

    Vector mu = transient_part(space, mu0, "mu0");
    check_probability_vector(mu, "mu0", options.renormalize);

    return PriorLaw{space, horizon, std::move(stages), std::move(mu)};
}

PriorLaw validate_prior(const PriorLaw& prior, const ValidationOptions& options) {
    return validate_prior(prior.space, prior.horizon, prior.stages, prior.mu0, options);
}

MarginalSpec validate_marginals(const StateSpace& space, int horizon, const Vector& mu_hat0,
                                const Matrix& nu_hat) {
    Vector mu = transient_part(space, mu_hat0, "mu_hat0");
    check_probability_vector(mu, "mu_hat0", false);
    check_shape(nu_hat, space.num_absorbing(), horizon, "nu_hat");
    check_entries(nu_hat, "nu_hat", false);
    const double total = nu_hat.sum();
    if (total > 1.0 + kStochasticTol)
        throw Error(ErrorKind::MassExceedsOne, "nu_hat",
                    fmt::format("nu_hat carries total arrival mass {:.17g} > 1", total));
    return MarginalSpec{std::move(mu), nu_hat};
}

FeasibilityReport support_feasibility_report(const PriorLaw& prior, const MarginalSpec& spec) {
    const ArrivalDistribution reach = prior_arrival_distribution(prior, spec.mu_hat0);
    FeasibilityReport report;
    for (int tau = 1; tau <= prior.horizon; ++tau) {
        for (int j = 0; j < prior.space.num_absorbing(); ++j) {
            const double target = spec.nu_hat(j, tau - 1);
            if (target > 0.0 && reach.arrivals(j, tau - 1) == 0.0)
                report.cells.push_back({j, tau, target});
        }
    }
    return report;
}

}  // namespace stopbridge
