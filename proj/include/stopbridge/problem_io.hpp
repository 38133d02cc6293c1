#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "stopbridge/cost_transport.hpp"
#include "stopbridge/simulator.hpp"
#include "stopbridge/verify.hpp"

namespace stopbridge {

using json = nlohmann::json;

/// Parsed problem file. Inputs are validated on load.
struct ProblemFile {
    PriorLaw prior;
    MarginalSpec spec;
    std::optional<EdgeCostSchedule> costs;
    SinkhornOptions solver;
};

struct LoadOptions {
    bool renormalize = false;
};

/// Number from a JSON value: a number, or a string holding a decimal or a
/// fraction "p/q".
double parse_number(const json& value, const std::string& field);

ProblemFile parse_problem(const json& doc, const LoadOptions& options = {});
ProblemFile load_problem(const std::filesystem::path& path, const LoadOptions& options = {});

/// Inverse of parse_problem; numbers are written as doubles.
json problem_to_json(const ProblemFile& problem);

json matrix_to_json(const Matrix& m);
json vector_to_json(const Vector& v);

json to_json(const Policy& policy);
json to_json(const SinkhornDiagnostics& diagnostics);
json to_json(const ArrivalDistribution& arrivals, const StateSpace& space);
json to_json(const EmpiricalLaw& emp, const StateSpace& space);
json to_json(const VerificationReport& report);

}  // namespace stopbridge
