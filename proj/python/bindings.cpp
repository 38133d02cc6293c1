#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "stopbridge/cost_transport.hpp"
#include "stopbridge/problem_io.hpp"
#include "stopbridge/simulator.hpp"
#include "stopbridge/verify.hpp"

namespace py = pybind11;
using namespace stopbridge;

namespace {

py::list stages_to_list(const std::vector<StageKernel>& stages) {
    py::list out;
    for (const auto& s : stages) out.append(py::make_tuple(s.B, s.A));
    return out;
}

Vector start_law(const ProblemFile& p, bool from_mu0) { return from_mu0 ? p.prior.mu0 : p.spec.mu_hat0; }

Solution run_solve(const ProblemFile& p, std::optional<double> tol, std::optional<int> max_iter) {
    SinkhornOptions opts = p.solver;
    if (tol) opts.tol = *tol;
    if (max_iter) opts.max_iter = *max_iter;
    return p.costs ? solve_regularized(p.prior, *p.costs, p.spec, opts) : solve(p.prior, p.spec, opts);
}

py::array_t<std::uint64_t> counts_array(const EmpiricalLaw& emp) {
    py::array_t<std::uint64_t> out({emp.num_absorbing, emp.horizon});
    std::copy(emp.counts.begin(), emp.counts.end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Minimum relative-entropy Markov policies with prescribed first-arrival marginals";

    static py::exception<Error> error(m, "StopbridgeError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::handle(error.ptr())(py::str(e.what()));
            exc.attr("kind") = to_string(e.kind());
            exc.attr("field") = e.field();
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    py::class_<ProblemFile>(m, "Problem")
        .def_property_readonly("absorbing", [](const ProblemFile& p) { return p.prior.space.absorbing_labels(); })
        .def_property_readonly("transient", [](const ProblemFile& p) { return p.prior.space.transient_labels(); })
        .def_property_readonly("horizon", [](const ProblemFile& p) { return p.prior.horizon; })
        .def_property_readonly("stages", [](const ProblemFile& p) { return stages_to_list(p.prior.stages); })
        .def_property_readonly("mu0", [](const ProblemFile& p) { return p.prior.mu0; })
        .def_property_readonly("mu_hat0", [](const ProblemFile& p) { return p.spec.mu_hat0; })
        .def_property_readonly("nu_hat", [](const ProblemFile& p) { return p.spec.nu_hat; })
        .def_property_readonly("beta",
                               [](const ProblemFile& p) -> std::optional<double> {
                                   if (!p.costs) return std::nullopt;
                                   return p.costs->beta();
                               })
        .def("to_json", [](const ProblemFile& p) { return problem_to_json(p).dump(); })
        .def("__repr__", [](const ProblemFile& p) {
            return "<Problem m=" + std::to_string(p.prior.space.num_absorbing()) +
                   " n=" + std::to_string(p.prior.space.num_transient()) + " t=" + std::to_string(p.prior.horizon) + ">";
        });

    py::class_<Policy>(m, "Policy")
        .def_property_readonly("stages", [](const Policy& p) { return stages_to_list(p.stages); })
        .def_readonly("d_vectors", &Policy::d_vectors)
        .def_readonly("kernel_D0", &Policy::kernel_D0)
        .def_readonly("lambda_", &Policy::lambda)
        .def_readonly("unreachable_rows", &Policy::unreachable_rows)
        .def_property_readonly("iterations", [](const Policy& p) { return p.provenance.iterations; })
        .def_property_readonly("converged", [](const Policy& p) { return p.provenance.converged; })
        .def_property_readonly("final_residual", [](const Policy& p) { return p.provenance.final_residual; })
        .def("to_json", [](const Policy& p) { return to_json(p).dump(); });

    m.def(
        "load_problem",
        [](const std::filesystem::path& path, bool renormalize) { return load_problem(path, {renormalize}); },
        py::arg("path"), py::arg("renormalize") = false, "Reads and validates a JSON problem file.");
    m.def(
        "parse_problem",
        [](const std::string& text, bool renormalize) { return parse_problem(json::parse(text), {renormalize}); },
        py::arg("text"), py::arg("renormalize") = false, "Validates a problem given as a JSON string.");

    m.def(
        "solve",
        [](const ProblemFile& p, std::optional<double> tol, std::optional<int> max_iter) {
            py::gil_scoped_release release;
            return run_solve(p, tol, max_iter).policy;
        },
        py::arg("problem"), py::arg("tol") = py::none(), py::arg("max_iter") = py::none(),
        "Optimal policy; uses the cost-tilted prior when the problem carries costs.");

    m.def(
        "arrival",
        [](const ProblemFile& p, bool from_mu0) {
            const auto a = prior_arrival_distribution(p.prior, start_law(p, from_mu0));
            return py::make_tuple(a.arrivals, a.residual);
        },
        py::arg("problem"), py::arg("from_mu0") = false,
        "Prior first-arrival masses (m x t) and unabsorbed mass at the horizon.");

    m.def(
        "induced_marginals",
        [](const Policy& policy, const Vector& mu) {
            const auto a = induced_marginals(policy, mu);
            return py::make_tuple(a.arrivals, a.residual);
        },
        py::arg("policy"), py::arg("mu"));

    m.def(
        "telescopic_expand",
        [](const ProblemFile& p) {
            const auto pm = telescopic_expand(p.prior);
            return py::make_tuple(pm.Bcal, pm.Acal);
        },
        py::arg("problem"), "Bcal (n x m*t, tau-major columns) and Acal (n x n).");

    m.def(
        "sinkhorn_partial",
        [](const Matrix& Bcal, const Matrix& Acal, const Vector& mu, const Vector& nu, double tol, int max_iter) {
            const auto r = sinkhorn_partial(Bcal, Acal, mu, nu, {tol, max_iter});
            py::dict out;
            out["D"] = r.scalings.D;
            out["Lambda"] = r.scalings.Lambda;
            out["iterations"] = r.diagnostics.iterations;
            out["converged"] = r.diagnostics.converged;
            out["final_residual"] = r.diagnostics.final_residual;
            return out;
        },
        py::arg("Bcal"), py::arg("Acal"), py::arg("mu_hat"), py::arg("nu_hat"), py::arg("tol") = 1e-10,
        py::arg("max_iter") = 10000);

    m.def(
        "simulate",
        [](const ProblemFile& p, std::uint64_t n, std::uint64_t seed, unsigned threads, bool prior) {
            EmpiricalLaw emp;
            Matrix target;
            {
                py::gil_scoped_release release;
                if (prior) {
                    emp = sample_paths(p.prior, p.spec.mu_hat0, n, seed, threads);
                    target = prior_arrival_distribution(p.prior, p.spec.mu_hat0).arrivals;
                } else {
                    const Solution sol = run_solve(p, std::nullopt, std::nullopt);
                    emp = sample_paths(sol.policy, p.spec.mu_hat0, n, seed, threads);
                    target = p.spec.nu_hat;
                }
            }
            const auto dist = empirical_distance(emp, target);
            py::dict out;
            out["counts"] = counts_array(emp);
            out["residual_counts"] = emp.residual_counts;
            out["frequencies"] = emp.frequencies();
            out["linf"] = dist.linf;
            out["l1"] = dist.l1;
            return out;
        },
        py::arg("problem"), py::arg("n"), py::arg("seed") = 0, py::arg("threads") = 0, py::arg("prior") = false,
        "Samples walkers under the policy (or the prior) and compares arrival frequencies to their targets.");

    m.def(
        "verify_json",
        [](const ProblemFile& p, std::optional<std::size_t> cap) {
            VerifyOptions opts;
            if (cap) opts.cap = *cap;
            py::gil_scoped_release release;
            const Solution sol = run_solve(p, std::nullopt, std::nullopt);
            return to_json(verify_solution(p.prior, p.spec, sol.policy, p.costs, opts)).dump();
        },
        py::arg("problem"), py::arg("cap") = py::none());

    m.attr("__version__") = STOPBRIDGE_VERSION;
}
