#include <doctest.h>

#include "stopbridge/chain_model.hpp"
#include "test_support.hpp"

using namespace stopbridge;
using namespace stopbridge::testing;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::Parse;
}

}  // namespace

TEST_CASE("state space") {
    const StateSpace space({"ruin", "win"}, {"1", "2", "3", "4"});
    CHECK(space.num_states() == 6);
    CHECK(space.index_of("win") == 1);
    CHECK(space.index_of("1") == 2);
    CHECK_FALSE(space.index_of("7").has_value());
    CHECK(space.label(5) == "4");
    CHECK(space.is_absorbing(1));
    CHECK_FALSE(space.is_absorbing(2));

    CHECK(kind_of([] { StateSpace({"a"}, {"a"}); }) == ErrorKind::DimensionMismatch);
    CHECK(kind_of([] { StateSpace({}, {"a"}); }) == ErrorKind::DimensionMismatch);
    CHECK(kind_of([] { StateSpace({"a"}, {}); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("validate_prior accepts the fair game and replicates a single stage") {
    const PriorLaw prior = de_moivre_prior();
    CHECK(prior.horizon == 3);
    REQUIRE(prior.stages.size() == 3);
    for (const auto& s : prior.stages) {
        CHECK(s == de_moivre_stage());
        CHECK((s.row_sums().array() - 1.0).abs().maxCoeff() <= kStochasticTol);
    }
}

TEST_CASE("identity walk is a valid prior") {
    const StateSpace space = make_space(2, 3);
    const StageKernel still{Matrix::Zero(3, 2), Matrix::Identity(3, 3)};
    const PriorLaw prior = validate_prior(space, 4, {still}, Vector::Constant(3, 1.0 / 3));
    CHECK(prior.stages.size() == 4);
}

TEST_CASE("row sum violation names row, stage and deficit") {
    auto stages = std::vector<StageKernel>(3, de_moivre_stage());
    stages[1].B(0, 0) = 0.6;
    try {
        validate_prior(StateSpace({"ruin", "win"}, {"1", "2", "3", "4"}), 3, stages, Vector::Constant(4, 0.25));
        FAIL("expected RowSumViolation");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::RowSumViolation);
        CHECK(e.field() == "stages[1]");
        const std::string msg = e.what();
        CHECK(msg.find("row '1'") != std::string::npos);
        CHECK(msg.find("stage 2") != std::string::npos);
        CHECK(msg.find("-0.1") != std::string::npos);
    }
}

TEST_CASE("renormalization is opt-in") {
    auto stage = de_moivre_stage();
    stage.B(0, 0) = 0.6;
    const StateSpace space({"ruin", "win"}, {"1", "2", "3", "4"});
    CHECK(kind_of([&] { validate_prior(space, 3, {stage}, Vector::Constant(4, 0.25)); }) ==
          ErrorKind::RowSumViolation);
    const PriorLaw fixed = validate_prior(space, 3, {stage}, Vector::Constant(4, 0.25), {.renormalize = true});
    CHECK(fixed.stages[0].B(0, 0) == doctest::Approx(0.6 / 1.1));
    CHECK(fixed.stages[0].row_sums()(0) == doctest::Approx(1.0));
}

TEST_CASE("validate_prior error paths") {
    const StateSpace space({"ruin", "win"}, {"1", "2", "3", "4"});
    const Vector mu = Vector::Constant(4, 0.25);

    auto negative = de_moivre_stage();
    negative.A(1, 0) = -0.5;
    negative.A(1, 2) = 1.5;
    CHECK(kind_of([&] { validate_prior(space, 3, {negative}, mu); }) == ErrorKind::NegativeEntry);

    auto wrong_shape = de_moivre_stage();
    wrong_shape.B = Matrix::Zero(4, 3);
    CHECK(kind_of([&] { validate_prior(space, 3, {wrong_shape}, mu); }) == ErrorKind::DimensionMismatch);

    CHECK(kind_of([&] { validate_prior(space, 3, {de_moivre_stage(), de_moivre_stage()}, mu); }) ==
          ErrorKind::DimensionMismatch);
    CHECK(kind_of([&] { validate_prior(space, 0, {de_moivre_stage()}, mu); }) == ErrorKind::DimensionMismatch);

    Vector full(6);
    full << 0.1, 0.0, 0.3, 0.2, 0.2, 0.2;
    CHECK(kind_of([&] { validate_prior(space, 3, {de_moivre_stage()}, full); }) ==
          ErrorKind::InitialMassOnAbsorbing);
    full(0) = 0.0;
    full(2) = 0.4;
    CHECK(validate_prior(space, 3, {de_moivre_stage()}, full).mu0.size() == 4);

    CHECK(kind_of([&] { validate_prior(space, 3, {de_moivre_stage()}, Vector::Constant(4, 0.3)); }) ==
          ErrorKind::RowSumViolation);
    CHECK(kind_of([&] { validate_prior(space, 3, {de_moivre_stage()}, Vector::Constant(3, 1.0 / 3)); }) ==
          ErrorKind::DimensionMismatch);
}

TEST_CASE("validation is idempotent") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto inst = random_instance(seed);
        CHECK(validate_prior(inst.prior) == inst.prior);
        const MarginalSpec again =
            validate_marginals(inst.prior.space, inst.prior.horizon, inst.spec.mu_hat0, inst.spec.nu_hat);
        CHECK(again == inst.spec);
    }
}

TEST_CASE("validate_marginals") {
    const StateSpace space({"ruin", "win"}, {"1", "2", "3", "4"});
    const Vector mu = Vector::Constant(4, 0.25);

    const MarginalSpec spec = validate_marginals(space, 3, mu, de_moivre_targets());
    CHECK(spec.total_arrival_mass() == doctest::Approx(0.6375).epsilon(1e-15));

    CHECK(validate_marginals(space, 3, mu, Matrix::Zero(2, 3)).total_arrival_mass() == 0.0);

    Matrix heavy = de_moivre_targets();
    heavy(0, 0) += 1.2 - heavy.sum();
    CHECK(kind_of([&] { validate_marginals(space, 3, mu, heavy); }) == ErrorKind::MassExceedsOne);

    Matrix negative = de_moivre_targets();
    negative(1, 2) = -0.01;
    CHECK(kind_of([&] { validate_marginals(space, 3, mu, negative); }) == ErrorKind::NegativeEntry);
    CHECK(kind_of([&] { validate_marginals(space, 3, mu, Matrix::Zero(2, 4)); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("support feasibility report") {
    const PriorLaw prior = de_moivre_prior();
    const MarginalSpec spec = validate_marginals(prior.space, 3, prior.mu0, de_moivre_targets());
    CHECK(support_feasibility_report(prior, spec).passed());

    // nobody can be ruined at tau=1 once B_1's ruin column is empty
    auto stages = prior.stages;
    stages[0].B(0, 0) = 0.0;
    stages[0].A(0, 1) = 1.0;
    const PriorLaw blocked = validate_prior(prior.space, 3, stages, prior.mu0);
    const FeasibilityReport report = support_feasibility_report(blocked, spec);
    REQUIRE(report.cells.size() == 1);
    CHECK(report.cells[0].absorbing == 0);
    CHECK(report.cells[0].tau == 1);
    CHECK(report.cells[0].target == doctest::Approx(0.125));

    const ProblemFile traffic = load_problem(problem_path("traffic"));
    CHECK(support_feasibility_report(traffic.prior, traffic.spec).passed());
}
