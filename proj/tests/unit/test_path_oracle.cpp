#include <doctest.h>

#include <cmath>
#include <limits>

#include "stopbridge/kernel_synthesis.hpp"
#include "stopbridge/path_oracle.hpp"
#include "test_support.hpp"

using namespace stopbridge;
using namespace stopbridge::testing;

namespace {

PathLaw two_path_law(double a, double b) {
    return make_path_law(1, 1, 1, {{1, 0}, {1, 1}}, {a, b});
}

struct FairGame {
    PriorLaw prior = de_moivre_prior();
    MarginalSpec spec = validate_marginals(prior.space, 3, prior.mu0, de_moivre_targets());
    Solution sol = solve(prior, spec);
    PathLaw Q = enumerate_paths(prior, prior.mu0);
    PathLaw P = evaluate_on(Q.paths, std::span<const StageKernel>(sol.policy.stages), prior.mu0);
};

}  // namespace

TEST_CASE("enumerate a one-step chain") {
    const double p = 0.3;
    const PriorLaw prior = validate_prior(make_space(1, 1), 1, {StageKernel{Matrix::Constant(1, 1, p), Matrix::Constant(1, 1, 1 - p)}},
                                          Vector::Ones(1));
    const PathLaw law = enumerate_paths(prior, prior.mu0);
    REQUIRE(law.size() == 2);
    CHECK(law.paths->path(0)[0] == 1);
    CHECK(law.paths->path(0)[1] == 0);
    CHECK(law.probs(0) == doctest::Approx(p));
    CHECK(law.probs(1) == doctest::Approx(1 - p));
    CHECK(law.paths->first_arrival(0) == std::optional<std::pair<int, int>>({0, 1}));
    CHECK_FALSE(law.paths->first_arrival(1).has_value());
}

TEST_CASE("enumeration agrees with arrival propagation") {
    const PriorLaw prior = de_moivre_prior();
    const PathLaw Q = enumerate_paths(prior, prior.mu0);
    CHECK(Q.total() == doctest::Approx(1.0).epsilon(1e-12));
    const Matrix arrivals = forward_arrivals(prior, prior.mu0);
    double first_at_2 = 0.0;
    for (std::size_t i = 0; i < Q.size(); ++i)
        if (Q.paths->first_arrival(i) == std::optional<std::pair<int, int>>({0, 2})) first_at_2 += Q.probs(static_cast<Eigen::Index>(i));
    CHECK(std::abs(first_at_2 - arrivals(0, 1)) <= 1e-12);
    CHECK(std::abs(cumulative_constraint_eval(Q, 0, 2) - arrivals(0, 0) - arrivals(0, 1)) <= 1e-12);

    // padding: absorbed paths repeat their absorbing state
    for (std::size_t i = 0; i < Q.size(); ++i) {
        auto path = Q.paths->path(i);
        for (std::size_t k = 1; k < path.size(); ++k)
            if (path[k - 1] < 2) CHECK(path[k] == path[k - 1]);
    }
}

TEST_CASE("policy path law hits the targets") {
    FairGame g;
    CHECK(max_abs_diff(path_arrivals(g.P).arrivals, de_moivre_targets()) <= 1e-3);
    CHECK(std::abs(cumulative_constraint_eval(g.P, 0, 2) - 0.325) <= 1e-3);

    double total = g.P.probs.sum() - path_arrivals(g.P).residual.sum();
    double absorbed = 0.0;
    for (int j = 0; j < 2; ++j) absorbed += cumulative_constraint_eval(g.P, j, 3);
    CHECK(absorbed == doctest::Approx(total).epsilon(1e-12));
    CHECK(absorbed + path_arrivals(g.P).residual.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cumulative constraint without absorption") {
    const PriorLaw prior = validate_prior(make_space(2, 2), 3, {StageKernel{Matrix::Zero(2, 2), Matrix::Identity(2, 2)}},
                                          Vector::Constant(2, 0.5));
    const PathLaw law = enumerate_paths(prior, prior.mu0);
    for (int j = 0; j < 2; ++j)
        for (int tau = 0; tau <= 3; ++tau) CHECK(cumulative_constraint_eval(law, j, tau) == 0.0);
}

TEST_CASE("kl and total variation") {
    const PathLaw Q = two_path_law(0.5, 0.5);
    CHECK(kl_divergence(Q, Q) == 0.0);
    CHECK(kl_divergence(two_path_law(1.0, 0.0), Q) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(kl_divergence(Q, two_path_law(1.0, 0.0)) == std::numeric_limits<double>::infinity());
    CHECK(total_variation(two_path_law(1.0, 0.0), Q) == doctest::Approx(0.5));

    const PathLaw other = make_path_law(1, 1, 1, {{1, 1}}, {1.0});
    CHECK_THROWS_AS(kl_divergence(other, Q), Error);
}

TEST_CASE("make_path_law sorts and validates") {
    const PathLaw law = make_path_law(1, 1, 1, {{1, 1}, {1, 0}}, {0.7, 0.3});
    CHECK(law.paths->path(0)[1] == 0);
    CHECK(law.probs(0) == 0.3);
    CHECK_THROWS_AS(make_path_law(1, 1, 2, {{1, 0, 1}}, {1.0}), Error);  // leaves an absorbing state
    CHECK_THROWS_AS(make_path_law(1, 1, 1, {{1, 2}}, {1.0}), Error);     // out of range
}

TEST_CASE("enumeration cap") {
    CHECK(path_space_size(9, 8) == 387420489u);
    CHECK(path_space_size(1000, 100) == std::numeric_limits<std::size_t>::max());
    StageKernel stage{Matrix::Constant(6, 3, 1.0 / 9), Matrix::Constant(6, 6, 1.0 / 9)};
    const PriorLaw big = validate_prior(make_space(3, 6), 8, {stage}, Vector::Constant(6, 1.0 / 6));
    try {
        enumerate_paths(big, big.mu0);
        FAIL("expected StateSpaceTooLarge");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::StateSpaceTooLarge);
    }
}

TEST_CASE("ipf projection") {
    FairGame g;

    SUBCASE("consistent constraints leave Q alone") {
        const PathLaw same = ipf_project(g.Q, g.prior.mu0, path_arrivals(g.Q).arrivals);
        CHECK(max_abs_diff(same.probs, g.Q.probs) <= 1e-12);
    }
    SUBCASE("agrees with the synthesized policy") {
        const PathLaw ipf = ipf_project(g.Q, g.spec.mu_hat0, g.spec.nu_hat);
        CHECK(total_variation(ipf, g.P) <= 1e-6);
        CHECK(markovianity_check(ipf, 1e-6).passed);
    }
    SUBCASE("initial marginal alone is a single reweighting") {
        Vector target(4);
        target << 0.1, 0.2, 0.3, 0.4;
        std::vector<int> cells(g.Q.size());
        for (std::size_t i = 0; i < g.Q.size(); ++i) cells[i] = g.Q.paths->path(i)[0] - 2;
        const PartitionConstraint fam[] = {{cells, target}};
        const PathLaw P = ipf_project_partitions(g.Q, fam);
        for (std::size_t i = 0; i < g.Q.size(); ++i) {
            const int x0 = cells[i];
            CHECK(std::abs(P.probs(static_cast<Eigen::Index>(i)) -
                           target(x0) / g.prior.mu0(x0) * g.Q.probs(static_cast<Eigen::Index>(i))) <= 1e-15);
        }
    }
    SUBCASE("unreachable target") {
        Matrix nu = g.spec.nu_hat;
        Vector start = Vector::Zero(4);
        start(1) = 1.0;  // wealth 2 cannot be ruined at round 1
        CHECK_THROWS_AS(ipf_project(g.Q, start, nu), Error);
    }
}

TEST_CASE("markovianity") {
    const PriorLaw prior = de_moivre_prior();
    CHECK(markovianity_check(enumerate_paths(prior, prior.mu0), 1e-12).passed);

    std::mt19937_64 rng(11);
    const std::vector<std::vector<bool>> full(2, std::vector<bool>(3, true));
    std::vector<StageKernel> a, b;
    for (int tau = 0; tau < 3; ++tau) {
        a.push_back(random_stage(1, 2, full, rng));
        b.push_back(random_stage(1, 2, full, rng));
    }
    const Vector mu = Vector::Constant(2, 0.5);
    const PathLaw La = enumerate_paths(1, std::span<const StageKernel>(a), mu);
    const PathLaw Lb = evaluate_on(La.paths, std::span<const StageKernel>(b), mu);
    CHECK(markovianity_check(La, 1e-12).passed);
    CHECK(markovianity_check(Lb, 1e-12).passed);
    PathLaw mix = La;
    mix.probs = 0.5 * (La.probs + Lb.probs);
    const MarkovianityReport report = markovianity_check(mix, 1e-6);
    CHECK_FALSE(report.passed);
    CHECK(report.worst_violation > 1e-3);
    CHECK(report.tau >= 1);
}

TEST_CASE("two-endpoint projection is Markov") {
    const PriorLaw prior = de_moivre_prior();
    const PathLaw Q = enumerate_paths(prior, prior.mu0);
    Vector start = Vector::Zero(6), end = Vector::Zero(6);
    start.tail(4) << 0.1, 0.4, 0.3, 0.2;
    end << 0.3, 0.2, 0.1, 0.15, 0.15, 0.1;
    const PathLaw P = ipf_project_endpoints(Q, start, end);
    CHECK(markovianity_check(P, 1e-6).passed);
}

TEST_CASE("shared bridges") {
    FairGame g;
    CHECK(shared_bridges_check(g.Q, g.Q, 1e-12).passed);
    CHECK(shared_bridges_check(g.Q, g.P, 1e-6).passed);

    // a policy built for different targets still shares the prior's bridges
    Matrix nu(2, 3);
    nu << 0.05, 0.1, 0.1, 0.2, 0.05, 0.1;
    const MarginalSpec other = validate_marginals(g.prior.space, 3, g.prior.mu0, nu);
    const Solution sol = solve(g.prior, other);
    const PathLaw P2 = evaluate_on(g.Q.paths, std::span<const StageKernel>(sol.policy.stages), g.prior.mu0);
    const SharedBridgesReport r = shared_bridges_check(g.Q, P2, 1e-6);
    CHECK(r.passed);
}
