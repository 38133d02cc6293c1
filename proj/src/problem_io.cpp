#include "stopbridge/problem_io.hpp"

#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>

namespace stopbridge {

namespace {

[[noreturn]] void parse_error(const std::string& field, const std::string& message) {
    throw Error(ErrorKind::Parse, field, fmt::format("{}: {}", field, message));
}

double parse_decimal(std::string_view text, const std::string& field) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        parse_error(field, fmt::format("'{}' is not a number", text));
    return value;
}

const json& require(const json& doc, const char* key, const std::string& field) {
    auto it = doc.find(key);
    if (it == doc.end()) parse_error(field, "missing required field");
    return *it;
}

Vector parse_vector(const json& value, const std::string& field) {
    if (!value.is_array()) parse_error(field, "expected an array");
    Vector out(static_cast<Eigen::Index>(value.size()));
    for (std::size_t i = 0; i < value.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = parse_number(value[i], fmt::format("{}[{}]", field, i));
    return out;
}

Matrix parse_matrix(const json& value, const std::string& field) {
    if (!value.is_array()) parse_error(field, "expected an array of rows");
    const std::size_t rows = value.size();
    const std::size_t cols = rows ? value[0].size() : 0;
    Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::string row_field = fmt::format("{}[{}]", field, r);
        if (!value[r].is_array() || value[r].size() != cols)
            throw Error(ErrorKind::DimensionMismatch, row_field,
                        fmt::format("{}: rows must all have {} entries", row_field, cols));
        for (std::size_t c = 0; c < cols; ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                parse_number(value[r][c], fmt::format("{}[{}]", row_field, c));
    }
    return out;
}

std::vector<std::string> parse_labels(const json& value, const std::string& field) {
    if (!value.is_array()) parse_error(field, "expected an array of labels");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < value.size(); ++i) {
        const auto& v = value[i];
        if (v.is_string())
            out.push_back(v.get<std::string>());
        else if (v.is_number_integer())
            out.push_back(std::to_string(v.get<long long>()));
        else
            parse_error(fmt::format("{}[{}]", field, i), "labels must be strings or integers");
    }
    return out;
}

// A distribution over states: an array (transient or all states) or an object keyed by label.
Vector parse_distribution(const json& value, const StateSpace& space, const std::string& field) {
    if (value.is_array()) return parse_vector(value, field);
    if (!value.is_object()) parse_error(field, "expected an array or an object keyed by state label");
    Vector out = Vector::Zero(space.num_states());
    for (const auto& [label, mass] : value.items()) {
        auto idx = space.index_of(label);
        if (!idx) parse_error(field, fmt::format("unknown state '{}'", label));
        out(*idx) = parse_number(mass, fmt::format("{}.{}", field, label));
    }
    return out;
}

Matrix parse_arrival_targets(const json& value, const StateSpace& space, const std::string& field) {
    if (value.is_array()) return parse_matrix(value, field);
    if (!value.is_object()) parse_error(field, "expected an m x t array or an object keyed by absorbing label");
    std::vector<Vector> rows(static_cast<std::size_t>(space.num_absorbing()));
    Eigen::Index t = -1;
    for (const auto& [label, row] : value.items()) {
        auto idx = space.index_of(label);
        if (!idx || !space.is_absorbing(*idx)) parse_error(field, fmt::format("'{}' is not an absorbing state", label));
        rows[static_cast<std::size_t>(*idx)] = parse_vector(row, fmt::format("{}.{}", field, label));
        if (t >= 0 && rows[static_cast<std::size_t>(*idx)].size() != t)
            throw Error(ErrorKind::DimensionMismatch, field, fmt::format("{}: rows differ in length", field));
        t = rows[static_cast<std::size_t>(*idx)].size();
    }
    Matrix out = Matrix::Zero(space.num_absorbing(), std::max<Eigen::Index>(t, 0));
    for (std::size_t j = 0; j < rows.size(); ++j)
        if (rows[j].size()) out.row(static_cast<Eigen::Index>(j)) = rows[j].transpose();
    return out;
}

std::vector<StageKernel> parse_stages(const json& value, const std::string& field) {
    auto one = [](const json& v, const std::string& f) {
        if (!v.is_object()) parse_error(f, "expected an object with B and A");
        return StageKernel{parse_matrix(require(v, "B", f + ".B"), f + ".B"),
                           parse_matrix(require(v, "A", f + ".A"), f + ".A")};
    };
    if (value.is_object()) return {one(value, field)};
    if (!value.is_array()) parse_error(field, "expected a stage object or an array of them");
    std::vector<StageKernel> out;
    for (std::size_t s = 0; s < value.size(); ++s) out.push_back(one(value[s], fmt::format("{}[{}]", field, s)));
    return out;
}

// Empty B blocks still need their n x m shape.
void fix_empty_shapes(std::vector<StageKernel>& stages, const StateSpace& space) {
    for (auto& s : stages) {
        if (s.B.size() == 0) s.B = Matrix::Zero(space.num_transient(), space.num_absorbing());
        if (s.A.size() == 0) s.A = Matrix::Zero(space.num_transient(), space.num_transient());
    }
}

}  // namespace

double parse_number(const json& value, const std::string& field) {
    if (value.is_number()) return value.get<double>();
    if (!value.is_string()) parse_error(field, "expected a number or a numeric string");
    const auto text = value.get<std::string>();
    const auto slash = text.find('/');
    if (slash == std::string::npos) return parse_decimal(text, field);
    const double num = parse_decimal(std::string_view(text).substr(0, slash), field);
    const double den = parse_decimal(std::string_view(text).substr(slash + 1), field);
    if (den == 0.0) parse_error(field, fmt::format("'{}' divides by zero", text));
    return num / den;
}

ProblemFile parse_problem(const json& doc, const LoadOptions& options) {
    if (!doc.is_object()) parse_error("$", "problem file must be a JSON object");
    const json& states = require(doc, "states", "states");
    StateSpace space(parse_labels(require(states, "absorbing", "states.absorbing"), "states.absorbing"),
                     parse_labels(require(states, "transient", "states.transient"), "states.transient"));

    const json& horizon_json = require(doc, "horizon", "horizon");
    if (!horizon_json.is_number_integer()) parse_error("horizon", "expected a positive integer");
    const int horizon = horizon_json.get<int>();

    auto stages = parse_stages(require(doc, "stages", "stages"), "stages");
    fix_empty_shapes(stages, space);
    const Vector mu0 = parse_distribution(require(doc, "mu0", "mu0"), space, "mu0");

    ProblemFile problem;
    problem.prior = validate_prior(space, horizon, std::move(stages), mu0,
                                   ValidationOptions{options.renormalize});

    const Vector mu_hat0 = doc.contains("mu_hat0") ? parse_distribution(doc["mu_hat0"], space, "mu_hat0")
                                                   : problem.prior.mu0;
    problem.spec = validate_marginals(space, horizon, mu_hat0,
                                      parse_arrival_targets(require(doc, "nu_hat", "nu_hat"), space, "nu_hat"));

    if (doc.contains("costs")) {
        auto costs = parse_stages(doc["costs"], "costs");
        fix_empty_shapes(costs, space);
        if (costs.size() == 1 && horizon > 1) costs.assign(static_cast<std::size_t>(horizon), costs.front());
        if (!doc.contains("beta")) parse_error("beta", "required when costs are given");
        problem.costs = EdgeCostSchedule::from_beta(std::move(costs), parse_number(doc["beta"], "beta"));
        // shape checks and the exp range guard
        (void)tilt_prior(problem.prior, *problem.costs);
    }

    if (doc.contains("solver")) {
        const json& s = doc["solver"];
        if (s.contains("tol")) problem.solver.tol = parse_number(s["tol"], "solver.tol");
        if (s.contains("max_iter")) problem.solver.max_iter = s["max_iter"].get<int>();
    }
    return problem;
}

ProblemFile load_problem(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Parse, path.string(), fmt::format("cannot open {}", path.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, path.string(), fmt::format("{}: {}", path.string(), e.what()));
    }
    return parse_problem(doc, options);
}

json matrix_to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

namespace {

json states_to_json(const StateSpace& space) {
    return {{"absorbing", space.absorbing_labels()}, {"transient", space.transient_labels()}};
}

json stages_to_json(const std::vector<StageKernel>& stages) {
    json out = json::array();
    for (const auto& s : stages) out.push_back({{"B", matrix_to_json(s.B)}, {"A", matrix_to_json(s.A)}});
    return out;
}

}  // namespace

json problem_to_json(const ProblemFile& problem) {
    json doc = {
        {"states", states_to_json(problem.prior.space)},
        {"horizon", problem.prior.horizon},
        {"stages", stages_to_json(problem.prior.stages)},
        {"mu0", vector_to_json(problem.prior.mu0)},
        {"mu_hat0", vector_to_json(problem.spec.mu_hat0)},
        {"nu_hat", matrix_to_json(problem.spec.nu_hat)},
        {"solver", {{"tol", problem.solver.tol}, {"max_iter", problem.solver.max_iter}}},
    };
    if (problem.costs) {
        doc["costs"] = stages_to_json(problem.costs->U);
        doc["beta"] = problem.costs->beta();
    }
    return doc;
}

json to_json(const Policy& policy) {
    json d = json::array();
    for (const auto& v : policy.d_vectors) d.push_back(vector_to_json(v));
    json unreachable = json::array();
    for (const auto& rows : policy.unreachable_rows) {
        json labels = json::array();
        for (int x : rows) labels.push_back(policy.space.transient_labels()[static_cast<std::size_t>(x)]);
        unreachable.push_back(std::move(labels));
    }
    const auto& p = policy.provenance;
    return {
        {"states", states_to_json(policy.space)},
        {"horizon", policy.horizon},
        {"stages", stages_to_json(policy.stages)},
        {"d_vectors", std::move(d)},
        {"kernel_D0", vector_to_json(policy.kernel_D0)},
        {"lambda", matrix_to_json(policy.lambda)},
        {"unreachable_rows", std::move(unreachable)},
        {"provenance",
         {{"tol", p.tol},
          {"max_iter", p.max_iter},
          {"iterations", p.iterations},
          {"final_residual", p.final_residual},
          {"converged", p.converged}}},
    };
}

json to_json(const SinkhornDiagnostics& diagnostics) {
    return {{"iterations", diagnostics.iterations},
            {"final_residual", diagnostics.final_residual},
            {"converged", diagnostics.converged}};
}

json to_json(const ArrivalDistribution& arrivals, const StateSpace& space) {
    return {{"absorbing", space.absorbing_labels()},
            {"transient", space.transient_labels()},
            {"arrivals", matrix_to_json(arrivals.arrivals)},
            {"residual", vector_to_json(arrivals.residual)},
            {"total", arrivals.total()}};
}

json to_json(const EmpiricalLaw& emp, const StateSpace& space) {
    json counts = json::array();
    for (int j = 0; j < emp.num_absorbing; ++j) {
        json row = json::array();
        for (int tau = 1; tau <= emp.horizon; ++tau) row.push_back(emp.count(j, tau));
        counts.push_back(std::move(row));
    }
    return {{"absorbing", space.absorbing_labels()},
            {"transient", space.transient_labels()},
            {"n", emp.N},
            {"seed", emp.seed},
            {"counts", std::move(counts)},
            {"residual_counts", emp.residual_counts},
            {"frequencies", matrix_to_json(emp.frequencies())}};
}

json to_json(const VerificationReport& r) {
    auto markov = [](const MarkovianityReport& m) {
        return json{{"worst_violation", m.worst_violation}, {"tau", m.tau}, {"state", m.state}, {"passed", m.passed}};
    };
    json out = {
        {"num_paths", r.num_paths},
        {"kl_policy", r.kl_policy},
        {"kl_ipf", r.kl_ipf},
        {"kl_passed", r.kl_passed},
        {"tv_policy_ipf", r.tv_policy_ipf},
        {"tv_passed", r.tv_passed},
        {"initial_residual", r.initial_residual},
        {"arrival_residual", r.arrival_residual},
        {"constraints_passed", r.constraints_passed},
        {"markov_ipf", markov(r.markov_ipf)},
        {"markov_policy", markov(r.markov_policy)},
        {"shared_bridges", {{"worst_violation", r.shared_bridges.worst_violation}, {"passed", r.shared_bridges.passed}}},
        {"passed", r.passed()},
    };
    if (r.free_energy) out["free_energy"] = *r.free_energy;
    return out;
}

}  // namespace stopbridge
