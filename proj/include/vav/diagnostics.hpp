#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vav/optim.hpp"

namespace vav {

/// Default tolerances: identities are relative, inequalities absolute on the r^2 scale.
struct Tolerances {
    double identity = 1e-8;
    double inequality = 1e-9;
    double monotonicity = 1e-8;
};

struct InvariantReport {
    std::string name;
    long step = 0;
    double observed = 0.0;
    double bound = 0.0;
    bool passed = true;
    long coordinate = -1;  // -1 for scalar checks
    std::string inputs;    // key=value pairs, enough to rerun the computation alone

    [[nodiscard]] std::string context() const {
        return coordinate < 0 ? "scalar" : "coord " + std::to_string(coordinate);
    }
};

struct LowerBoundEntry {
    long step;
    double batch_loss;
    double r_squared_max;
    bool violated;
};

struct LowerBoundTrace {
    std::vector<LowerBoundEntry> steps;

    [[nodiscard]] std::size_t violations() const;
    [[nodiscard]] double violation_fraction() const;
};

// Per-step checks. Each returns one report per coordinate (one for the scalar scheme).

/// r~^2 - r^2 + (r~ - r)^2 + dx^2 / lr == 0, relative to max(1, r^2).
std::vector<InvariantReport> dissipation_reports(const StepDetail& step, double tol);
/// r'^2 - r~^2 <= (psi / lr) dx^2.
std::vector<InvariantReport> relaxation_reports(const StepDetail& step, double tol);
/// r'^2 - r^2 <= -(r~ - r)^2 - ((1 - psi) / lr) dx^2.
std::vector<InvariantReport> monotonicity_reports(const StepDetail& step, double tol);
/// Range, feasibility, Q(1) <= 0 and discriminant sign for a single solve.
std::vector<InvariantReport> omega_reports(const OmegaSolve& solve, long step, double tol);

// Whole-stream checks.

std::vector<InvariantReport> check_dissipation(std::span<const StepDetail> steps,
                                               double tol = Tolerances{}.identity);
std::vector<InvariantReport> check_relaxation(std::span<const StepDetail> steps,
                                              double tol = Tolerances{}.inequality);
std::vector<InvariantReport> check_monotonicity(std::span<const StepDetail> steps,
                                                double tol = Tolerances{}.monotonicity);
std::vector<InvariantReport> audit_omega(std::span<const OmegaSolve> solves,
                                         double tol = Tolerances{}.inequality);

/// Compares max_i r_i^2 after each step with the loss + c it was relaxed toward.
LowerBoundTrace track_lower_bound(std::span<const StepRecord> records, double c, double tol);

std::size_t count_failures(std::span<const InvariantReport> reports);

/// Streaming form used by the harness: keeps counts for every check and the first
/// `max_kept` failed reports.
class RunAuditor {
public:
    struct CheckTally {
        std::string name;
        std::size_t checked = 0;
        std::size_t failed = 0;
        double worst = 0.0;  // max of observed - bound (or |observed| for identities)
    };

    RunAuditor(std::vector<std::string> checkers, double c, Tolerances tol = {},
               double lower_bound_tol = Tolerances{}.inequality, std::size_t max_kept = 1000);

    /// Throws ConfigError on unknown checker names.
    static void validate_names(std::span<const std::string> checkers);

    void observe(const StepDetail& detail, std::span<const OmegaSolve> solves,
                 const StepRecord& record);

    [[nodiscard]] bool wants_detail() const noexcept { return wants_detail_; }
    [[nodiscard]] bool wants_omega() const noexcept { return wants_omega_; }
    [[nodiscard]] const std::vector<CheckTally>& tallies() const noexcept { return tallies_; }
    [[nodiscard]] const std::vector<InvariantReport>& failures() const noexcept { return kept_; }
    /// True when any hard check (everything but the lower bound) failed.
    [[nodiscard]] bool hard_failure() const;
    [[nodiscard]] double lower_bound_violation_fraction() const;

private:
    void absorb(const std::vector<InvariantReport>& reports);
    CheckTally* find(const std::string& name);

    std::vector<std::string> checkers_;
    double c_;
    Tolerances tol_;
    double lower_bound_tol_;
    std::size_t max_kept_;
    bool wants_detail_ = false;
    bool wants_omega_ = false;
    std::vector<CheckTally> tallies_;
    std::vector<InvariantReport> kept_;
    std::size_t lb_steps_ = 0;
    std::size_t lb_violations_ = 0;
};

}  // namespace vav
