// stopbridge: command-line front end for the first-arrival bridge solver.
//
// Exit codes: 0 ok, 1 invalid input or usage, 2 solver did not converge
// (or the targets are infeasible), 3 path space too large for the oracle.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "stopbridge/problem_io.hpp"

#ifndef STOPBRIDGE_PROBLEMS_DIR
#define STOPBRIDGE_PROBLEMS_DIR "problems"
#endif

namespace fs = std::filesystem;
using namespace stopbridge;

namespace {

enum ExitCode : int { kOk = 0, kInvalid = 1, kNotConverged = 2, kTooLarge = 3 };

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NotConverged:
        case ErrorKind::DivisionBlowup:
        case ErrorKind::NonStochasticOutput: return kNotConverged;
        case ErrorKind::StateSpaceTooLarge: return kTooLarge;
        default: return kInvalid;
    }
}

struct CommonOptions {
    std::string problem;
    bool json = false;
    bool renormalize = false;
    std::optional<double> tol;
    std::optional<int> max_iter;
};

ProblemFile load(const CommonOptions& o) {
    ProblemFile p = load_problem(o.problem, LoadOptions{o.renormalize});
    if (o.tol) p.solver.tol = *o.tol;
    if (o.max_iter) p.solver.max_iter = *o.max_iter;
    return p;
}

Solution run_solver(const ProblemFile& p) {
    return p.costs ? solve_regularized(p.prior, *p.costs, p.spec, p.solver) : solve(p.prior, p.spec, p.solver);
}

void print_matrix(const std::string& title, const Matrix& M, const std::vector<std::string>& rows,
                  const std::vector<std::string>& cols) {
    fmt::print("{}\n", title);
    fmt::print("  {:>10}", "");
    for (const auto& c : cols) fmt::print(" {:>10}", c);
    fmt::print("\n");
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        fmt::print("  {:>10}", rows[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < M.cols(); ++c) fmt::print(" {:>10.6f}", M(r, c));
        fmt::print("\n");
    }
}

std::vector<std::string> time_labels(int horizon) {
    std::vector<std::string> out;
    for (int tau = 1; tau <= horizon; ++tau) out.push_back(fmt::format("t={}", tau));
    return out;
}

void print_vector(const std::string& title, const Vector& v) {
    fmt::print("{} [", title);
    for (Eigen::Index i = 0; i < v.size(); ++i) fmt::print("{}{:.6f}", i ? " " : "", v(i));
    fmt::print("]\n");
}

void print_arrivals(const ArrivalDistribution& a, const StateSpace& space) {
    print_matrix("first-arrival masses:", a.arrivals, space.absorbing_labels(), time_labels(a.arrivals.cols()));
    print_vector("unabsorbed at horizon:", a.residual);
    fmt::print("total mass: {:.12f}\n", a.total());
}

int cmd_solve(const CommonOptions& o, const std::string& out_path) {
    const ProblemFile p = load(o);
    const Solution sol = run_solver(p);
    const ArrivalDistribution induced = induced_marginals(sol.policy, p.spec.mu_hat0);
    const double arrival_residual = (induced.arrivals - p.spec.nu_hat).cwiseAbs().maxCoeff();
    const json policy_json = to_json(sol.policy);

    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw Error(ErrorKind::Parse, "--out", fmt::format("cannot write {}", out_path));
        out << policy_json.dump(2) << "\n";
    }

    if (o.json) {
        json doc = {{"policy", policy_json},
                    {"diagnostics", to_json(sol.diagnostics)},
                    {"induced", to_json(induced, p.prior.space)},
                    {"arrival_residual", arrival_residual}};
        std::cout << doc.dump(2) << "\n";
    } else {
        const auto& space = p.prior.space;
        for (int tau = 1; tau <= sol.policy.horizon; ++tau) {
            const auto& s = sol.policy.stages[static_cast<std::size_t>(tau - 1)];
            print_matrix(fmt::format("B*_{}:", tau), s.B, space.transient_labels(), space.absorbing_labels());
            print_matrix(fmt::format("A*_{}:", tau), s.A, space.transient_labels(), space.transient_labels());
        }
        print_vector("kernel D_0:", sol.policy.kernel_D0);
        print_matrix("Lambda:", sol.policy.lambda, space.absorbing_labels(), time_labels(sol.policy.horizon));
        for (std::size_t k = 0; k < sol.policy.d_vectors.size(); ++k)
            print_vector(fmt::format("d_{}:", k + 1), sol.policy.d_vectors[k]);
        fmt::print("iterations: {}  final residual: {:.3e}  converged: {}\n", sol.diagnostics.iterations,
                   sol.diagnostics.final_residual, sol.diagnostics.converged);
        fmt::print("max arrival residual under the policy: {:.3e}\n", arrival_residual);
    }
    if (!sol.diagnostics.converged) {
        std::cerr << fmt::format("error: NotConverged after {} iterations (residual {:.3e} > tol {:.3e})\n",
                                 sol.diagnostics.iterations, sol.diagnostics.final_residual, p.solver.tol);
        return kNotConverged;
    }
    return kOk;
}

std::size_t resolve_cap(const std::optional<std::size_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("STOPBRIDGE_CAP")) {
        try {
            return static_cast<std::size_t>(std::stoull(env));
        } catch (const std::exception&) {
            throw Error(ErrorKind::Parse, "STOPBRIDGE_CAP", fmt::format("STOPBRIDGE_CAP='{}' is not a count", env));
        }
    }
    return kDefaultEnumerationCap;
}

int cmd_verify(const CommonOptions& o, const std::optional<std::size_t>& cap_flag) {
    const ProblemFile p = load(o);
    VerifyOptions vo;
    vo.cap = resolve_cap(cap_flag);
    const std::size_t needed = path_space_size(p.prior.space.num_states(), p.prior.horizon);
    if (needed > vo.cap)
        throw Error(ErrorKind::StateSpaceTooLarge, "paths",
                    fmt::format("path space of {} exceeds the enumeration cap {}", needed, vo.cap));
    const Solution sol = run_solver(p);
    if (!sol.diagnostics.converged)
        throw Error(ErrorKind::NotConverged, "solver",
                    fmt::format("solver did not converge (residual {:.3e})", sol.diagnostics.final_residual));
    const VerificationReport r = verify_solution(p.prior, p.spec, sol.policy, p.costs, vo);

    if (o.json) {
        std::cout << to_json(r).dump(2) << "\n";
    } else {
        auto mark = [](bool ok) { return ok ? "pass" : "FAIL"; };
        fmt::print("paths enumerated:            {}\n", r.num_paths);
        fmt::print("KL(policy || reference):     {:.12g}\n", r.kl_policy);
        fmt::print("KL(ipf || reference):        {:.12g}   [{}]\n", r.kl_ipf, mark(r.kl_passed));
        fmt::print("TV(policy, ipf):             {:.3e}   [{}]\n", r.tv_policy_ipf, mark(r.tv_passed));
        fmt::print("constraint residuals:        init {:.3e}, arrival {:.3e}   [{}]\n", r.initial_residual,
                   r.arrival_residual, mark(r.constraints_passed));
        fmt::print("markovianity (ipf):          {:.3e}   [{}]\n", r.markov_ipf.worst_violation,
                   mark(r.markov_ipf.passed));
        fmt::print("markovianity (policy):       {:.3e}   [{}]\n", r.markov_policy.worst_violation,
                   mark(r.markov_policy.passed));
        fmt::print("shared bridges:              {:.3e}   [{}]\n", r.shared_bridges.worst_violation,
                   mark(r.shared_bridges.passed));
        if (r.free_energy) fmt::print("free energy of the policy:   {:.12g}\n", *r.free_energy);
        fmt::print("overall: {}\n", r.passed() ? "pass" : "FAIL");
    }
    return r.passed() ? kOk : kNotConverged;
}

int cmd_arrival(const CommonOptions& o, bool from_mu0) {
    const ProblemFile p = load(o);
    const Vector& mu = from_mu0 ? p.prior.mu0 : p.spec.mu_hat0;
    const ArrivalDistribution a = prior_arrival_distribution(p.prior, mu);
    if (o.json)
        std::cout << to_json(a, p.prior.space).dump(2) << "\n";
    else
        print_arrivals(a, p.prior.space);
    return kOk;
}

int cmd_simulate(const CommonOptions& o, std::uint64_t n, std::uint64_t seed, unsigned threads, bool prior_only) {
    const ProblemFile p = load(o);
    EmpiricalLaw emp;
    Matrix target;
    if (prior_only) {
        emp = sample_paths(p.prior, p.spec.mu_hat0, n, seed, threads);
        target = prior_arrival_distribution(p.prior, p.spec.mu_hat0).arrivals;
    } else {
        const Solution sol = run_solver(p);
        if (!sol.diagnostics.converged)
            throw Error(ErrorKind::NotConverged, "solver", "solver did not converge; refusing to simulate");
        emp = sample_paths(sol.policy, p.spec.mu_hat0, n, seed, threads);
        target = p.spec.nu_hat;
    }
    const EmpiricalDistance dist = empirical_distance(emp, target);
    if (o.json) {
        json doc = to_json(emp, p.prior.space);
        doc["target"] = matrix_to_json(target);
        doc["distance"] = {{"linf", dist.linf}, {"l1", dist.l1}};
        std::cout << doc.dump(2) << "\n";
    } else {
        print_matrix("empirical first-arrival frequencies:", emp.frequencies(), p.prior.space.absorbing_labels(),
                     time_labels(emp.horizon));
        print_matrix("target:", target, p.prior.space.absorbing_labels(), time_labels(emp.horizon));
        print_vector("unabsorbed at horizon:", emp.residual_frequencies());
        fmt::print("N = {}, seed = {}: Linf = {:.5f}, L1 = {:.5f}\n", emp.N, emp.seed, dist.linf, dist.l1);
    }
    return kOk;
}

fs::path problems_dir() {
    if (const char* env = std::getenv("STOPBRIDGE_PROBLEMS")) return env;
    return STOPBRIDGE_PROBLEMS_DIR;
}

int cmd_example_list(bool as_json) {
    const fs::path dir = problems_dir();
    std::vector<fs::path> files;
    if (fs::is_directory(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    json list = json::array();
    for (const auto& f : files) {
        std::ifstream in(f);
        const json doc = json::parse(in, nullptr, false);
        const std::string description = doc.is_object() ? doc.value("description", "") : "";
        list.push_back({{"name", f.stem().string()}, {"path", f.string()}, {"description", description}});
    }
    if (as_json) {
        std::cout << list.dump(2) << "\n";
    } else {
        if (list.empty()) fmt::print("no bundled problems found in {}\n", dir.string());
        for (const auto& item : list)
            fmt::print("{:<12} {}\n{:<12} {}\n", item["name"].get<std::string>(), item["path"].get<std::string>(), "",
                       item["description"].get<std::string>());
    }
    return kOk;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool solver_flags) {
    cmd->add_option("problem", o.problem, "Problem file (JSON)")->required();
    cmd->add_flag("--json", o.json, "Emit a single JSON document");
    cmd->add_flag("--renormalize", o.renormalize, "Rescale prior rows that do not sum to one");
    if (solver_flags) {
        cmd->add_option("--tol", o.tol, "Sinkhorn stopping tolerance (default 1e-10)")->check(CLI::PositiveNumber);
        cmd->add_option("--max-iter", o.max_iter, "Sinkhorn iteration limit (default 10000)")
            ->check(CLI::PositiveNumber);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Most likely Markov policy matching first-arrival time distributions"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::string out_path;
    auto* solve_cmd = app.add_subcommand("solve", "Synthesize the optimal policy");
    add_common(solve_cmd, opts, true);
    solve_cmd->add_option("--out", out_path, "Also write the policy JSON to this file");

    std::optional<std::size_t> cap;
    auto* verify_cmd = app.add_subcommand("verify", "Audit the policy against the path-space oracle");
    add_common(verify_cmd, opts, true);
    verify_cmd->add_option("--cap", cap, "Maximum (m+n)^(t+1) path count (env STOPBRIDGE_CAP)");

    bool from_mu0 = false;
    auto* arrival_cmd = app.add_subcommand("arrival", "Prior first-arrival distribution");
    add_common(arrival_cmd, opts, false);
    arrival_cmd->add_flag("--from-mu0", from_mu0, "Start from mu0 instead of mu_hat0");

    std::uint64_t n = 0;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    bool prior_only = false;
    auto* simulate_cmd = app.add_subcommand("simulate", "Monte-Carlo check of the arrival marginals");
    add_common(simulate_cmd, opts, true);
    simulate_cmd->add_option("--n", n, "Number of walkers")->required()->check(CLI::PositiveNumber);
    simulate_cmd->add_option("--seed", seed, "Generator seed");
    simulate_cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
    simulate_cmd->add_flag("--prior", prior_only, "Simulate the prior instead of the policy");

    bool list_json = false;
    auto* example_cmd = app.add_subcommand("example", "Bundled example problems");
    example_cmd->require_subcommand(1);
    auto* list_cmd = example_cmd->add_subcommand("list", "List bundled problem files");
    list_cmd->add_flag("--json", list_json, "Emit JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (solve_cmd->parsed()) return cmd_solve(opts, out_path);
        if (verify_cmd->parsed()) return cmd_verify(opts, cap);
        if (arrival_cmd->parsed()) return cmd_arrival(opts, from_mu0);
        if (simulate_cmd->parsed()) return cmd_simulate(opts, n, seed, threads, prior_only);
        if (list_cmd->parsed()) return cmd_example_list(list_json);
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.kind()) << " [" << e.field() << "] " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    }
    return kInvalid;
}
