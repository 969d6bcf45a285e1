#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vav/core.hpp"

namespace vav {

// ---------------------------------------------------------------------------------------
// State

/// Hyperparameters shared by the auxiliary-variable optimizers.
struct VavOptions {
    double eta = 0.01;   // default learning rate
    double psi = 0.95;   // relaxation strength, in (0, 1)
    double c = 0.0;      // loss offset, r approximates sqrt(f + c)
    bool scheduler_enabled = false;

    /// Throws ConfigError unless eta > 0, 0 < psi < 1, c >= 0.
    void validate() const;
};

/// Elementwise relaxed auxiliary-variable optimizer state. Single owner.
struct VavState {
    ParamVector x;
    std::vector<double> r;  // one auxiliary value per coordinate
    VavOptions options;
    long step = 0;
};

/// Scalar auxiliary-variable state, unrelaxed.
struct SavState {
    ParamVector x;
    double r = 0.0;
    double eta = 0.01;
    double c = 0.0;
    long step = 0;
};

// ---------------------------------------------------------------------------------------
// Per-step telemetry

struct StepRecord {
    long step = 0;
    double batch_loss = 0.0;  // f(x_t; xi_t), the loss the step was taken on
    double next_loss = 0.0;   // f(x_{t+1}; xi_{t+1}), the relaxation target (without c)
    bool full_batch = true;
    double grad_norm = 0.0;
    double r_min = 0.0, r_max = 0.0, r_mean = 0.0;  // of r_{t+1}
    double rho_min = 0.0, rho_max = 0.0;            // r~_i / sqrt(f + c)
    double omega_min = 0.0, omega_max = 0.0;
    double lr_min = 0.0, lr_max = 0.0;
    double dissipation_residual = 0.0;  // worst relative residual of the unrelaxed identity
};

/// Quadratic-solve inputs for one coordinate. f_next already includes the offset c.
struct OmegaInputs {
    double f_next;
    double r_tilde;
    double dx;
    double psi;
    double eta;
};

struct OmegaCoefficients {
    double a;
    double b;
    double cc;

    [[nodiscard]] double at(double omega) const { return (a * omega + b) * omega + cc; }
    [[nodiscard]] double discriminant() const { return b * b - 4.0 * a * cc; }
};

/// One omega solve, kept for auditing.
struct OmegaSolve {
    OmegaInputs inputs;
    double omega;
};

/// Full per-coordinate view of one step. Filled only when a caller asks for it; the
/// optimizer output does not depend on whether it is requested.
struct StepDetail {
    long step = 0;
    double loss = 0.0;       // f(x_t; xi_t)
    double next_loss = 0.0;  // f(x_{t+1}; xi_{t+1})
    double c = 0.0;
    double psi = 0.0;
    bool relaxed = true;     // false for the scalar scheme
    std::vector<double> grad;
    std::vector<double> r_prev;
    std::vector<double> r_tilde;
    std::vector<double> r_next;
    std::vector<double> dx;
    std::vector<double> lr;
    std::vector<double> omega;
};

// ---------------------------------------------------------------------------------------
// Building blocks

/// x - eta * g. Non-finite output throws DivergenceError.
ParamVector sgd_step(const ParamVector& x, const ParamVector& grad, double eta);

/// Closed-form solution of the implicit scalar pair
///   x' = x - eta r'/sqrt(f+c) g,   r' = r + <g, x' - x> / (2 sqrt(f+c)),
/// i.e. r' = r / (1 + eta |g|^2 / (2 (f + c))).
double sav_tilde_r(double r, std::span<const double> grad, double f_batch, double c, double eta);

/// Elementwise version: r~_i = r_i / (1 + lr_i g_i^2 / (2 (f + c))).
std::vector<double> vav_tilde_r(std::span<const double> r, std::span<const double> grad,
                                double f_batch, double c, std::span<const double> lr);
std::vector<double> vav_tilde_r(std::span<const double> r, std::span<const double> grad,
                                double f_batch, double c, double eta);

/// x_i - lr_i (r~_i / sqrt(f + c)) g_i.
ParamVector vav_position_update(const ParamVector& x, std::span<const double> grad,
                                std::span<const double> r_tilde, double f_batch, double c,
                                std::span<const double> lr);
ParamVector vav_position_update(const ParamVector& x, std::span<const double> grad,
                                std::span<const double> r_tilde, double f_batch, double c,
                                double eta);

OmegaCoefficients omega_coefficients(const OmegaInputs& in);

/// Smallest omega in [0, 1] with a w^2 + b w + cc <= 0. A zero leading coefficient maps
/// to 0. Throws InvariantError if the discriminant is negative beyond rounding.
double solve_omega(const OmegaInputs& in);

/// r_i' = w_i r~_i + (1 - w_i) sqrt(f_next + c).
std::vector<double> relax_r(std::span<const double> r_tilde, double f_next_loss, double c,
                            std::span<const double> omega);

/// min(eta, sqrt(max(r^2 - c, 0))).
double scheduler_effective_lr(double r, double c, double eta_default);

/// Relative residual of r~^2 - r^2 + (r~ - r)^2 + dx^2 / lr, scaled by max(1, r^2).
double dissipation_residual(double r, double r_tilde, double dx, double lr);

// ---------------------------------------------------------------------------------------
// Steppers

/// r0 = sqrt(f(x0) + c) in every coordinate. `first_batch` is the batch of the first
/// step for stochastic objectives, null for deterministic ones.
VavState init_vav_state(const Objective& obj, ParamVector x0, const VavOptions& options,
                        const Batch* first_batch = nullptr);
SavState init_sav_state(const Objective& obj, ParamVector x0, double eta, double c,
                        const Batch* first_batch = nullptr);

/// One relaxed elementwise step. Either batch may be null (full objective). On
/// divergence the state is left untouched and DivergenceError carries the step index.
StepRecord vav_step(VavState& state, const Objective& obj, const Batch* batch_t,
                    const Batch* batch_next, StepDetail* detail = nullptr,
                    std::vector<OmegaSolve>* solves = nullptr);

/// One unrelaxed scalar step.
StepRecord sav_step(SavState& state, const Objective& obj, const Batch* batch_t,
                    StepDetail* detail = nullptr);

/// One plain SGD step; the record reports the rho = 1 equivalent for the
/// auxiliary-variable columns.
StepRecord sgd_full_step(ParamVector& x, const Objective& obj, const Batch* batch_t, double eta,
                         long step);

}  // namespace vav
