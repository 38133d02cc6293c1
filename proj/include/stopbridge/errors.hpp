#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stopbridge {

enum class ErrorKind {
    DimensionMismatch,
    RowSumViolation,
    NegativeEntry,
    InitialMassOnAbsorbing,
    MassExceedsOne,
    NotConverged,
    DivisionBlowup,
    ScalingMismatch,
    NonStochasticOutput,
    Overflow,
    StateSpaceTooLarge,
    Parse,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library. `field` is a JSON-style path to the
// offending input ("stages[1].B[0]", "nu_hat") when one exists.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string field, const std::string& message)
        : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& field() const noexcept { return field_; }

private:
    ErrorKind kind_;
    std::string field_;
};

}  // namespace stopbridge
