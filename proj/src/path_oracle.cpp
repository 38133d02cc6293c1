#include "stopbridge/path_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numeric>

namespace stopbridge {

PathSet::PathSet(int num_absorbing, int num_transient, int horizon, std::vector<int> flat_states)
    : num_absorbing_(num_absorbing),
      num_transient_(num_transient),
      horizon_(horizon),
      states_(std::move(flat_states)) {
    const auto len = static_cast<std::size_t>(horizon_ + 1);
    if (horizon_ < 0 || states_.size() % len != 0)
        throw Error(ErrorKind::DimensionMismatch, "paths", "flat path storage is not a whole number of paths");
    const int S = num_states();
    for (std::size_t i = 0; i < size(); ++i) {
        auto p = path(i);
        for (std::size_t k = 0; k < len; ++k) {
            if (p[k] < 0 || p[k] >= S)
                throw Error(ErrorKind::DimensionMismatch, "paths",
                            fmt::format("path {} visits unknown state {}", i, p[k]));
            if (k > 0 && p[k - 1] < num_absorbing_ && p[k] != p[k - 1])
                throw Error(ErrorKind::DimensionMismatch, "paths",
                            fmt::format("path {} leaves absorbing state {} at step {}", i, p[k - 1], k));
        }
        if (i > 0) {
            auto q = path(i - 1);
            if (!std::lexicographical_compare(q.begin(), q.end(), p.begin(), p.end()))
                throw Error(ErrorKind::DimensionMismatch, "paths",
                            "paths must be distinct and in lexicographic order");
        }
    }
}

std::optional<std::pair<int, int>> PathSet::first_arrival(std::size_t i) const {
    auto p = path(i);
    for (int tau = 1; tau <= horizon_; ++tau) {
        if (p[static_cast<std::size_t>(tau)] < num_absorbing_)
            return std::make_pair(p[static_cast<std::size_t>(tau)], tau);
    }
    return std::nullopt;
}

std::size_t path_space_size(int num_states, int horizon) {
    std::size_t total = 1;
    const auto base = static_cast<std::size_t>(num_states);
    for (int k = 0; k <= horizon; ++k) {
        if (base != 0 && total > std::numeric_limits<std::size_t>::max() / base)
            return std::numeric_limits<std::size_t>::max();
        total *= base;
    }
    return total;
}

PathLaw make_path_law(int num_absorbing, int num_transient, int horizon,
                      std::vector<std::vector<int>> paths, std::vector<double> probs) {
    if (paths.size() != probs.size())
        throw Error(ErrorKind::DimensionMismatch, "paths", "paths and probabilities differ in length");
    std::vector<std::size_t> order(paths.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return paths[a] < paths[b]; });

    std::vector<int> flat;
    Vector p(static_cast<Eigen::Index>(paths.size()));
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& path = paths[order[k]];
        if (path.size() != static_cast<std::size_t>(horizon + 1))
            throw Error(ErrorKind::DimensionMismatch, "paths",
                        fmt::format("path of length {} for horizon {}", path.size(), horizon));
        flat.insert(flat.end(), path.begin(), path.end());
        p(static_cast<Eigen::Index>(k)) = probs[order[k]];
    }
    return PathLaw{std::make_shared<const PathSet>(num_absorbing, num_transient, horizon, std::move(flat)),
                   std::move(p)};
}

namespace {

// Probability of stepping from global state s to global state r at stage `stage`.
double step_probability(const StageKernel& stage, int m, int s, int r) {
    if (s < m) return s == r ? 1.0 : 0.0;
    return r < m ? stage.B(s - m, r) : stage.A(s - m, r - m);
}

}  // namespace

PathLaw enumerate_paths(int num_absorbing, std::span<const StageKernel> stages, const Vector& mu,
                        std::size_t cap) {
    const int m = num_absorbing;
    const int n = static_cast<int>(mu.size());
    const int t = static_cast<int>(stages.size());
    const int S = m + n;
    const std::size_t full = path_space_size(S, t);
    if (full > cap)
        throw Error(ErrorKind::StateSpaceTooLarge, "paths",
                    fmt::format("{} states over horizon {} give {}^{} paths, above the cap of {}", S,
                                t, S, t + 1, cap));

    std::vector<int> flat;
    std::vector<double> masses;
    std::vector<int> current(static_cast<std::size_t>(t + 1));
    std::vector<double> prefix_mass(static_cast<std::size_t>(t + 1));

    // depth-first in increasing global index order keeps the output sorted
    auto extend = [&](auto&& self, int depth) -> void {
        if (depth == t) {
            flat.insert(flat.end(), current.begin(), current.end());
            masses.push_back(prefix_mass[static_cast<std::size_t>(t)]);
            return;
        }
        const int s = current[static_cast<std::size_t>(depth)];
        const StageKernel& stage = stages[static_cast<std::size_t>(depth)];
        for (int r = 0; r < S; ++r) {
            const double w = step_probability(stage, m, s, r);
            const double mass = prefix_mass[static_cast<std::size_t>(depth)] * w;
            if (mass <= 0.0) continue;
            current[static_cast<std::size_t>(depth + 1)] = r;
            prefix_mass[static_cast<std::size_t>(depth + 1)] = mass;
            self(self, depth + 1);
        }
    };
    for (int x = 0; x < n; ++x) {
        if (mu(x) <= 0.0) continue;
        current[0] = m + x;
        prefix_mass[0] = mu(x);
        extend(extend, 0);
    }

    return PathLaw{std::make_shared<const PathSet>(m, n, t, std::move(flat)),
                   Eigen::Map<const Vector>(masses.data(), static_cast<Eigen::Index>(masses.size()))};
}

PathLaw enumerate_paths(const PriorLaw& prior, const Vector& mu, std::size_t cap) {
    return enumerate_paths(prior.space.num_absorbing(), std::span<const StageKernel>(prior.stages), mu, cap);
}

PathLaw enumerate_paths(const Policy& policy, const Vector& mu, std::size_t cap) {
    return enumerate_paths(policy.space.num_absorbing(), std::span<const StageKernel>(policy.stages), mu,
                           cap);
}

PathLaw evaluate_on(const std::shared_ptr<const PathSet>& paths, std::span<const StageKernel> stages,
                    const Vector& mu) {
    const int m = paths->num_absorbing();
    if (stages.size() != static_cast<std::size_t>(paths->horizon()) || mu.size() != paths->num_transient())
        throw Error(ErrorKind::DimensionMismatch, "paths", "law does not match the path set dimensions");
    Vector probs(static_cast<Eigen::Index>(paths->size()));
    for (std::size_t i = 0; i < paths->size(); ++i) {
        auto p = paths->path(i);
        double mass = p[0] < m ? 0.0 : mu(p[0] - m);
        for (std::size_t k = 0; k < stages.size() && mass > 0.0; ++k)
            mass *= step_probability(stages[k], m, p[k], p[k + 1]);
        probs(static_cast<Eigen::Index>(i)) = mass;
    }
    return PathLaw{paths, std::move(probs)};
}

namespace {

void require_aligned(const PathLaw& P, const PathLaw& Q) {
    if (P.paths != Q.paths && !(*P.paths == *Q.paths))
        throw Error(ErrorKind::DimensionMismatch, "paths", "path laws are not defined on the same paths");
}

}  // namespace

double kl_divergence(const PathLaw& P, const PathLaw& Q) {
    require_aligned(P, Q);
    double kl = 0.0;
    for (Eigen::Index i = 0; i < P.probs.size(); ++i) {
        const double p = P.probs(i);
        if (p == 0.0) continue;
        const double q = Q.probs(i);
        if (q == 0.0) return std::numeric_limits<double>::infinity();
        kl += p * std::log(p / q);
    }
    return kl;
}

double total_variation(const PathLaw& P, const PathLaw& Q) {
    require_aligned(P, Q);
    return 0.5 * (P.probs - Q.probs).cwiseAbs().sum();
}

ArrivalDistribution path_arrivals(const PathLaw& P) {
    const auto& set = *P.paths;
    ArrivalDistribution out;
    out.arrivals = Matrix::Zero(set.num_absorbing(), set.horizon());
    out.residual = Vector::Zero(set.num_transient());
    for (std::size_t i = 0; i < set.size(); ++i) {
        const double w = P.probs(static_cast<Eigen::Index>(i));
        if (auto hit = set.first_arrival(i))
            out.arrivals(hit->first, hit->second - 1) += w;
        else
            out.residual(set.path(i).back() - set.num_absorbing()) += w;
    }
    return out;
}

PathLaw ipf_project_partitions(const PathLaw& Q, std::span<const PartitionConstraint> families,
                               const IpfOptions& options) {
    PathLaw P = Q;
    const auto N = static_cast<Eigen::Index>(Q.size());
    for (const auto& fam : families) {
        if (static_cast<Eigen::Index>(fam.cell_of_path.size()) != N)
            throw Error(ErrorKind::DimensionMismatch, "ipf", "partition does not cover the path set");
    }

    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
        double worst = 0.0;
        for (const auto& fam : families) {
            Vector mass = Vector::Zero(fam.targets.size());
            for (Eigen::Index i = 0; i < N; ++i) mass(fam.cell_of_path[static_cast<std::size_t>(i)]) += P.probs(i);
            Vector factor(fam.targets.size());
            for (Eigen::Index c = 0; c < factor.size(); ++c) {
                worst = std::max(worst, std::abs(mass(c) - fam.targets(c)));
                if (fam.targets(c) == 0.0) {
                    factor(c) = 0.0;
                } else if (mass(c) == 0.0) {
                    throw Error(ErrorKind::DivisionBlowup, "ipf",
                                fmt::format("constraint cell {} has target {} but no paths", c,
                                            fam.targets(c)));
                } else {
                    factor(c) = fam.targets(c) / mass(c);
                }
            }
            for (Eigen::Index i = 0; i < N; ++i) P.probs(i) *= factor(fam.cell_of_path[static_cast<std::size_t>(i)]);
        }
        if (worst <= options.tol) return P;
    }
    throw Error(ErrorKind::NotConverged, "ipf",
                fmt::format("proportional fitting did not reach {} in {} sweeps", options.tol,
                            options.max_sweeps));
}

PathLaw ipf_project(const PathLaw& Q, const Vector& mu_hat0, const Matrix& nu_hat,
                    const IpfOptions& options) {
    const auto& set = *Q.paths;
    const int m = set.num_absorbing();
    const int t = set.horizon();
    if (mu_hat0.size() != set.num_transient() || nu_hat.rows() != m || nu_hat.cols() != t)
        throw Error(ErrorKind::DimensionMismatch, "ipf", "marginal targets do not match the path set");

    PartitionConstraint initial{std::vector<int>(set.size()), mu_hat0};
    PartitionConstraint arrival{std::vector<int>(set.size()), Vector(m * t + 1)};
    for (std::size_t i = 0; i < set.size(); ++i) {
        const int x0 = set.path(i)[0];
        if (x0 < m)
            throw Error(ErrorKind::InitialMassOnAbsorbing, "paths", "path starts at an absorbing state");
        initial.cell_of_path[i] = x0 - m;
        auto hit = set.first_arrival(i);
        arrival.cell_of_path[i] = hit ? (hit->second - 1) * m + hit->first : m * t;
    }
    for (int tau = 1; tau <= t; ++tau)
        for (int j = 0; j < m; ++j) arrival.targets((tau - 1) * m + j) = nu_hat(j, tau - 1);
    arrival.targets(m * t) = std::max(0.0, 1.0 - nu_hat.sum());

    const PartitionConstraint families[] = {std::move(initial), std::move(arrival)};
    return ipf_project_partitions(Q, families, options);
}

PathLaw ipf_project_endpoints(const PathLaw& Q, const Vector& mu_start, const Vector& mu_end,
                              const IpfOptions& options) {
    const auto& set = *Q.paths;
    if (mu_start.size() != set.num_states() || mu_end.size() != set.num_states())
        throw Error(ErrorKind::DimensionMismatch, "ipf", "endpoint targets must cover all states");
    PartitionConstraint start{std::vector<int>(set.size()), mu_start};
    PartitionConstraint end{std::vector<int>(set.size()), mu_end};
    for (std::size_t i = 0; i < set.size(); ++i) {
        start.cell_of_path[i] = set.path(i).front();
        end.cell_of_path[i] = set.path(i).back();
    }
    const PartitionConstraint families[] = {std::move(start), std::move(end)};
    return ipf_project_partitions(Q, families, options);
}

MarkovianityReport markovianity_check(const PathLaw& P, double tol) {
    const auto& set = *P.paths;
    const int S = set.num_states();
    const int t = set.horizon();
    const std::size_t N = set.size();
    MarkovianityReport report;

    auto same_prefix = [&](std::size_t a, std::size_t b, int len) {
        auto pa = set.path(a);
        auto pb = set.path(b);
        return std::equal(pa.begin(), pa.begin() + len, pb.begin());
    };

    Vector cond(S);
    for (int tau = 0; tau < t; ++tau) {
        // per current state: entrywise min / max of conditional next-step laws
        Matrix lo = Matrix::Constant(S, S, std::numeric_limits<double>::infinity());
        Matrix hi = Matrix::Constant(S, S, -std::numeric_limits<double>::infinity());
        std::vector<int> histories(static_cast<std::size_t>(S), 0);

        std::size_t begin = 0;
        while (begin < N) {
            std::size_t end = begin + 1;
            while (end < N && same_prefix(begin, end, tau + 1)) ++end;
            double group = 0.0;
            cond.setZero();
            for (std::size_t i = begin; i < end; ++i) {
                const double w = P.probs(static_cast<Eigen::Index>(i));
                group += w;
                cond(set.path(i)[static_cast<std::size_t>(tau + 1)]) += w;
            }
            if (group > 0.0) {
                cond /= group;
                const int s = set.path(begin)[static_cast<std::size_t>(tau)];
                lo.row(s) = lo.row(s).cwiseMin(cond.transpose());
                hi.row(s) = hi.row(s).cwiseMax(cond.transpose());
                ++histories[static_cast<std::size_t>(s)];
            }
            begin = end;
        }
        for (int s = 0; s < S; ++s) {
            if (histories[static_cast<std::size_t>(s)] < 2) continue;
            const double spread = (hi.row(s) - lo.row(s)).maxCoeff();
            if (spread > report.worst_violation) {
                report.worst_violation = spread;
                report.tau = tau;
                report.state = s;
            }
        }
    }
    report.passed = report.worst_violation <= tol;
    return report;
}

SharedBridgesReport shared_bridges_check(const PathLaw& Q, const PathLaw& P, double tol) {
    require_aligned(P, Q);
    const auto& set = *P.paths;
    const int m = set.num_absorbing();
    const int n = set.num_transient();
    const int t = set.horizon();
    const int terminals = m * t + n;
    const int S = set.num_states();

    std::vector<int> cls(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        auto hit = set.first_arrival(i);
        const int terminal = hit ? (hit->second - 1) * m + hit->first : m * t + (set.path(i).back() - m);
        cls[i] = set.path(i).front() * terminals + terminal;
    }
    const std::size_t num_classes = static_cast<std::size_t>(S) * static_cast<std::size_t>(terminals);
    std::vector<double> qmass(num_classes, 0.0), pmass(num_classes, 0.0);
    for (std::size_t i = 0; i < set.size(); ++i) {
        qmass[static_cast<std::size_t>(cls[i])] += Q.probs(static_cast<Eigen::Index>(i));
        pmass[static_cast<std::size_t>(cls[i])] += P.probs(static_cast<Eigen::Index>(i));
    }

    SharedBridgesReport report;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto c = static_cast<std::size_t>(cls[i]);
        if (qmass[c] <= 0.0 || pmass[c] <= 0.0) continue;
        const double diff = std::abs(P.probs(static_cast<Eigen::Index>(i)) / pmass[c] -
                                     Q.probs(static_cast<Eigen::Index>(i)) / qmass[c]);
        report.worst_violation = std::max(report.worst_violation, diff);
    }
    report.passed = report.worst_violation <= tol;
    return report;
}

double cumulative_constraint_eval(const PathLaw& P, int j, int tau) {
    const auto& set = *P.paths;
    double total = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (set.path(i)[static_cast<std::size_t>(tau)] == j) total += P.probs(static_cast<Eigen::Index>(i));
    }
    return total;
}

}  // namespace stopbridge
