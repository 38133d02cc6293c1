#include <doctest.h>

#include "stopbridge/kernel_synthesis.hpp"
#include "stopbridge/sinkhorn.hpp"
#include "test_support.hpp"

using namespace stopbridge;
using namespace stopbridge::testing;

namespace {

RandomInstance instance_with_shape(int m, int n, int t) {
    for (std::uint64_t seed = 1;; ++seed) {
        auto inst = random_instance(seed * 7919);
        if (inst.prior.space.num_absorbing() == m && inst.prior.space.num_transient() == n &&
            inst.prior.horizon == t)
            return inst;
    }
}

}  // namespace

TEST_CASE("traffic scalings") {
    const ProblemFile traffic = load_problem(problem_path("traffic"));
    const auto pm = telescopic_expand(traffic.prior);
    const auto result = sinkhorn_partial(pm, traffic.spec.mu_hat0, flatten_arrivals(traffic.spec.nu_hat));
    CHECK(result.diagnostics.converged);
    CHECK(result.diagnostics.iterations <= 500);

    Vector d0(5);
    d0 << 0.975, 1.034, 1.008, 1.024, 1.008;
    CHECK(max_abs_diff(result.scalings.kernel_scaling(traffic.spec.mu_hat0), d0) <= 1e-3);

    Matrix lambda(2, 5);
    lambda << 0.984, 1.019, 0, 0, 0, 0.984, 0.97, 0.711, 1.108, 1.4;
    CHECK(max_abs_diff(result.scalings.lambda_table(), lambda) <= 1e-3);
    for (int tau = 3; tau <= 5; ++tau) CHECK(result.scalings.lambda(0, tau) == 0.0);
}

TEST_CASE("fair game converges quickly") {
    const PriorLaw prior = de_moivre_prior();
    const auto pm = telescopic_expand(prior);
    const auto result = sinkhorn_partial(pm, prior.mu0, flatten_arrivals(de_moivre_targets()));
    CHECK(result.diagnostics.converged);
    CHECK(result.diagnostics.iterations <= 500);
    CHECK(result.diagnostics.final_residual <= 1e-10);
}

TEST_CASE("consistent data is a fixed point") {
    const PriorLaw prior = de_moivre_prior();
    const auto pm = telescopic_expand(prior);
    const Vector nu = flatten_arrivals(forward_arrivals(prior, prior.mu0));
    const auto result = sinkhorn_partial(pm, prior.mu0, nu);
    CHECK(result.diagnostics.converged);
    CHECK(result.diagnostics.iterations == 0);
    CHECK(max_abs_diff(result.scalings.D, prior.mu0) <= 1e-15);
    CHECK(result.scalings.Lambda == Vector::Ones(6));
}

TEST_CASE("joint law matches IPF on the explicit table") {
    const auto inst = instance_with_shape(2, 3, 2);
    const auto pm = telescopic_expand(inst.prior);
    const Vector nu = flatten_arrivals(inst.spec.nu_hat);
    const auto result = sinkhorn_partial(pm, inst.spec.mu_hat0, nu, {.tol = 1e-13});
    REQUIRE(result.diagnostics.converged);

    const ScalingPair& s = result.scalings;
    Matrix joint(3, 7);
    joint << s.D.asDiagonal() * pm.Bcal * s.Lambda.asDiagonal(), s.D.asDiagonal() * pm.Acal;

    Matrix K(3, 7);
    K << inst.prior.mu0.asDiagonal() * pm.Bcal, inst.prior.mu0.asDiagonal() * pm.Acal;
    std::vector<int> cells = {0, 1, 2, 3, 4, 4, 4};
    Vector targets(5);
    targets << nu, 1.0 - nu.sum();
    const Matrix oracle = ipf_table(K, inst.spec.mu_hat0, cells, targets);
    CHECK(max_abs_diff(joint, oracle) <= 1e-8);
}

TEST_CASE("residual history is monotone up to slack") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto inst = random_instance(seed);
        const auto pm = telescopic_expand(inst.prior);
        const auto result = sinkhorn_partial(pm, inst.spec.mu_hat0, flatten_arrivals(inst.spec.nu_hat));
        const auto& h = result.diagnostics.residual_history;
        for (std::size_t k = 2; k < h.size(); ++k) CHECK(h[k] <= 1.1 * h[k - 1] + 1e-15);

        // after convergence both residuals sit under tol
        REQUIRE(result.diagnostics.converged);
        const auto& sc = result.scalings;
        const Vector rows =
            sc.D.cwiseProduct(pm.Bcal * sc.Lambda + pm.Acal.rowwise().sum()) - inst.spec.mu_hat0;
        const Vector cols = sc.Lambda.cwiseProduct(pm.Bcal.transpose() * sc.D) - flatten_arrivals(inst.spec.nu_hat);
        CHECK(rows.cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(cols.cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("gauge invariance") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> w(0.1, 10.0);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto inst = random_instance(seed);
        const auto pm = telescopic_expand(inst.prior);
        const Vector nu = flatten_arrivals(inst.spec.nu_hat);
        Vector S(pm.Acal.rows());
        for (Eigen::Index i = 0; i < S.size(); ++i) S(i) = w(rng);

        const auto a = sinkhorn_partial(pm.Bcal, pm.Acal, inst.spec.mu_hat0, nu, {.tol = 1e-13});
        const auto b = sinkhorn_partial(S.asDiagonal() * pm.Bcal, S.asDiagonal() * pm.Acal, inst.spec.mu_hat0, nu,
                                        {.tol = 1e-13});
        const Matrix ja = a.scalings.D.asDiagonal() * pm.Bcal * a.scalings.Lambda.asDiagonal();
        const Matrix jb = b.scalings.D.asDiagonal() * (S.asDiagonal() * pm.Bcal) * b.scalings.Lambda.asDiagonal();
        CHECK(max_abs_diff(ja, jb) <= 1e-10);
    }
}

TEST_CASE("hard infeasibility and non-convergence") {
    const PriorLaw prior = de_moivre_prior();
    const auto pm = telescopic_expand(prior);
    Vector nu = flatten_arrivals(de_moivre_targets());

    // a target on a column the prior cannot reach from the given start
    Vector mu = Vector::Zero(4);
    mu(1) = 0.5;
    mu(2) = 0.5;
    try {
        sinkhorn_partial(pm, mu, nu);
        FAIL("expected DivisionBlowup");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DivisionBlowup);
    }

    const auto capped = sinkhorn_partial(pm, prior.mu0, nu, {.tol = 1e-10, .max_iter = 3});
    CHECK_FALSE(capped.diagnostics.converged);
    CHECK(capped.diagnostics.iterations == 3);
    CHECK(capped.diagnostics.final_residual > 1e-10);
}

TEST_CASE("classical bridge") {
    SUBCASE("doubly stochastic kernel with uniform marginals") {
        Matrix G(3, 3);
        G << 0.2, 0.3, 0.5, 0.5, 0.2, 0.3, 0.3, 0.5, 0.2;
        const Vector u = Vector::Constant(3, 1.0 / 3);
        const auto s = classical_sb(G, u, u);
        CHECK(s.diagnostics.converged);
        CHECK((s.row.array() - s.row(0)).abs().maxCoeff() <= 1e-15);
        CHECK((s.col.array() - s.col(0)).abs().maxCoeff() <= 1e-15);
    }
    SUBCASE("rank one kernel gives the product coupling") {
        const Matrix G = Matrix::Constant(2, 2, 0.5);
        Vector a(2), b(2);
        a << 0.5, 0.5;
        b << 0.3, 0.7;
        const auto s = classical_sb(G, a, b);
        Matrix expected(2, 2);
        expected << 0.15, 0.35, 0.15, 0.35;
        CHECK(max_abs_diff(s.coupling(G), expected) <= 1e-10);
    }
    SUBCASE("random positive kernel against IPF") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> w(0.05, 1.0);
        for (int trial = 0; trial < 20; ++trial) {
            Matrix G(4, 4);
            for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = w(rng);
            const Vector a = random_simplex(4, rng);
            const Vector b = random_simplex(4, rng);
            const auto s = classical_sb(G, a, b, {.tol = 1e-13});
            const Matrix oracle = ipf_table(G, a, {0, 1, 2, 3}, b);
            CHECK(max_abs_diff(s.coupling(G), oracle) <= 1e-8);
        }
    }
    SUBCASE("disconnected support") {
        Matrix G = Matrix::Identity(2, 2);
        Vector a(2), b(2);
        a << 0.5, 0.5;
        b << 1.0, 0.0;
        try {
            classical_sb(G, a, b);
            FAIL("expected DivisionBlowup");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DivisionBlowup);
        }
    }
}
