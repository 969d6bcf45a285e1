#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vav {

/// Invalid user input: bad hyperparameters, malformed config, out-of-range batch size.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The loss offset makes sqrt(f + c) undefined. Raising c is the usual remedy.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Internal consistency failure: a property that holds algebraically was violated
/// beyond rounding.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite loss, gradient or iterate. Divergence is an outcome of a run, not a tool
/// failure, so the harness turns this into a summary status.
class DivergenceError : public std::runtime_error {
public:
    static constexpr long kNoStep = -1;

    explicit DivergenceError(const std::string& what, long step = kNoStep)
        : std::runtime_error(what), step_(step) {}

    [[nodiscard]] long step() const noexcept { return step_; }

    [[nodiscard]] DivergenceError at_step(long step) const {
        return DivergenceError(std::string(what()) + " (step " + std::to_string(step) + ")", step);
    }

private:
    long step_;
};

/// The finite-difference oracle hit a non-finite probe value.
class OracleError : public std::runtime_error {
public:
    OracleError(const std::string& what, std::size_t coordinate)
        : std::runtime_error(what), coordinate_(coordinate) {}

    [[nodiscard]] std::size_t coordinate() const noexcept { return coordinate_; }

private:
    std::size_t coordinate_;
};

}  // namespace vav
