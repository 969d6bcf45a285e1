#include "vav/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace vav {

namespace {

// Discriminant negativity beyond rounding.
constexpr double kDiscriminantTol = 1e-9;

double offset_root(double f, double c, const char* where) {
    const double shifted = f + c;
    if (!(shifted > 0.0))
        throw DomainError(std::string(where) + ": f + c = " + std::to_string(shifted) +
                          " is not positive; increase the offset c");
    return std::sqrt(shifted);
}

void require_same_size(std::size_t a, std::size_t b, const char* where) {
    if (a != b) throw ConfigError(std::string(where) + ": dimension mismatch");
}

double squared_norm(std::span<const double> v) {
    return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
}

struct MinMaxMean {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    double mean = 0.0;
};

MinMaxMean summarize(std::span<const double> v) {
    MinMaxMean s;
    double sum = 0.0;
    for (double e : v) {
        s.min = std::min(s.min, e);
        s.max = std::max(s.max, e);
        sum += e;
    }
    s.mean = sum / static_cast<double>(v.size());
    return s;
}

}  // namespace

void VavOptions::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be positive");
    if (!(psi > 0.0 && psi < 1.0)) throw ConfigError("psi must lie in (0, 1)");
    if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("c must be nonnegative");
}

ParamVector sgd_step(const ParamVector& x, const ParamVector& grad, double eta) {
    require_same_size(x.dim(), grad.dim(), "sgd_step");
    if (!(eta > 0.0)) throw ConfigError("sgd_step: eta must be positive");
    std::vector<double> out(x.dim());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - eta * grad[i];
    return ParamVector::from_step(std::move(out));
}

double sav_tilde_r(double r, std::span<const double> grad, double f_batch, double c, double eta) {
    const double root = offset_root(f_batch, c, "sav_tilde_r");
    return r / (1.0 + eta * squared_norm(grad) / (2.0 * root * root));
}

std::vector<double> vav_tilde_r(std::span<const double> r, std::span<const double> grad,
                                double f_batch, double c, std::span<const double> lr) {
    require_same_size(r.size(), grad.size(), "vav_tilde_r");
    require_same_size(r.size(), lr.size(), "vav_tilde_r");
    const double shifted = f_batch + c;
    offset_root(f_batch, c, "vav_tilde_r");
    std::vector<double> out(r.size());
    for (std::size_t i = 0; i < r.size(); ++i)
        out[i] = r[i] / (1.0 + lr[i] * grad[i] * grad[i] / (2.0 * shifted));
    return out;
}

std::vector<double> vav_tilde_r(std::span<const double> r, std::span<const double> grad,
                                double f_batch, double c, double eta) {
    const std::vector<double> lr(r.size(), eta);
    return vav_tilde_r(r, grad, f_batch, c, lr);
}

ParamVector vav_position_update(const ParamVector& x, std::span<const double> grad,
                                std::span<const double> r_tilde, double f_batch, double c,
                                std::span<const double> lr) {
    require_same_size(x.dim(), grad.size(), "vav_position_update");
    require_same_size(x.dim(), r_tilde.size(), "vav_position_update");
    require_same_size(x.dim(), lr.size(), "vav_position_update");
    const double root = offset_root(f_batch, c, "vav_position_update");
    std::vector<double> out(x.dim());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = x[i] - lr[i] * (r_tilde[i] / root) * grad[i];
    return ParamVector::from_step(std::move(out));
}

ParamVector vav_position_update(const ParamVector& x, std::span<const double> grad,
                                std::span<const double> r_tilde, double f_batch, double c,
                                double eta) {
    const std::vector<double> lr(x.dim(), eta);
    return vav_position_update(x, grad, r_tilde, f_batch, c, lr);
}

OmegaCoefficients omega_coefficients(const OmegaInputs& in) {
    const double root_f = std::sqrt(in.f_next);
    const double gap = root_f - in.r_tilde;
    return {gap * gap, 2.0 * root_f * (in.r_tilde - root_f),
            in.f_next - in.r_tilde * in.r_tilde - (in.psi / in.eta) * in.dx * in.dx};
}

double solve_omega(const OmegaInputs& in) {
    if (!(in.f_next > 0.0)) throw DomainError("solve_omega: f_next must be positive");
    if (!(in.eta > 0.0)) throw ConfigError("solve_omega: eta must be positive");
    const OmegaCoefficients q = omega_coefficients(in);
    // a == 0 means r~ == sqrt(F), and the relaxed value is the same for every omega.
    if (q.a == 0.0) return 0.0;

    const double disc = q.discriminant();
    if (disc < -kDiscriminantTol)
        throw InvariantError("solve_omega: discriminant " + std::to_string(disc) +
                             " is negative beyond rounding");
    const double sq = std::sqrt(std::max(disc, 0.0));
    // Smaller root. For b < 0 the quotient form avoids cancellation and stays accurate as
    // a -> 0, so no near-singular cutoff is needed.
    const double lower = q.b < 0.0 ? 2.0 * q.cc / (-q.b + sq) : (-q.b - sq) / (2.0 * q.a);
    return std::clamp(lower, 0.0, 1.0);
}

std::vector<double> relax_r(std::span<const double> r_tilde, double f_next_loss, double c,
                            std::span<const double> omega) {
    require_same_size(r_tilde.size(), omega.size(), "relax_r");
    const double target = offset_root(f_next_loss, c, "relax_r");
    std::vector<double> out(r_tilde.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double w = omega[i];
        if (!(w >= 0.0 && w <= 1.0))
            throw InvariantError("relax_r: omega[" + std::to_string(i) + "] = " +
                                 std::to_string(w) + " outside [0, 1]");
        out[i] = w * r_tilde[i] + (1.0 - w) * target;
    }
    return out;
}

double scheduler_effective_lr(double r, double c, double eta_default) {
    return std::min(eta_default, std::sqrt(std::max(r * r - c, 0.0)));
}

double dissipation_residual(double r, double r_tilde, double dx, double lr) {
    const double gap = r_tilde - r;
    const double residual = r_tilde * r_tilde - r * r + gap * gap + dx * dx / lr;
    return std::abs(residual) / std::max(1.0, r * r);
}

VavState init_vav_state(const Objective& obj, ParamVector x0, const VavOptions& options,
                        const Batch* first_batch) {
    options.validate();
    if (x0.dim() != obj.dim()) throw ConfigError("init_vav_state: x0 has the wrong dimension");
    const double f0 = evaluate_value(obj, x0, first_batch);
    if (!(f0 + options.c > 0.0))
        throw ConfigError("init_vav_state: f(x0) + c must be positive; increase c");
    const double r0 = std::sqrt(f0 + options.c);
    VavState state{std::move(x0), {}, options, 0};
    state.r.assign(state.x.dim(), r0);
    return state;
}

SavState init_sav_state(const Objective& obj, ParamVector x0, double eta, double c,
                        const Batch* first_batch) {
    if (!(eta > 0.0)) throw ConfigError("init_sav_state: eta must be positive");
    if (!(c >= 0.0)) throw ConfigError("init_sav_state: c must be nonnegative");
    if (x0.dim() != obj.dim()) throw ConfigError("init_sav_state: x0 has the wrong dimension");
    const double f0 = evaluate_value(obj, x0, first_batch);
    if (!(f0 + c > 0.0))
        throw ConfigError("init_sav_state: f(x0) + c must be positive; increase c");
    return SavState{std::move(x0), std::sqrt(f0 + c), eta, c, 0};
}

StepRecord vav_step(VavState& state, const Objective& obj, const Batch* batch_t,
                    const Batch* batch_next, StepDetail* detail, std::vector<OmegaSolve>* solves) {
    const std::size_t n = state.x.dim();
    const VavOptions& opt = state.options;
    try {
        const Evaluation ev = evaluate(obj, state.x, batch_t);
        const std::span<const double> g = ev.grad.values();

        std::vector<double> lr(n, opt.eta);
        if (opt.scheduler_enabled) {
            for (std::size_t i = 0; i < n; ++i)
                lr[i] = scheduler_effective_lr(state.r[i], opt.c, opt.eta);
        }

        const std::vector<double> r_tilde = vav_tilde_r(state.r, g, ev.loss, opt.c, lr);
        ParamVector x_next = vav_position_update(state.x, g, r_tilde, ev.loss, opt.c, lr);
        const double next_loss = evaluate_value(obj, x_next, batch_next);
        const double f_next = next_loss + opt.c;
        if (!(f_next > 0.0))
            throw DomainError("vav_step: f(x_{t+1}) + c is not positive; increase the offset c");

        std::vector<double> dx(n), omega(n);
        for (std::size_t i = 0; i < n; ++i) {
            dx[i] = x_next[i] - state.x[i];
            // A fully annealed coordinate has lr 0 and dx 0; the bound term vanishes for
            // any positive rate, so the default rate stands in.
            const OmegaInputs in{f_next, r_tilde[i], dx[i], opt.psi, lr[i] > 0.0 ? lr[i] : opt.eta};
            omega[i] = solve_omega(in);
            if (solves) solves->push_back({in, omega[i]});
        }
        std::vector<double> r_next = relax_r(r_tilde, next_loss, opt.c, omega);

        const double root = std::sqrt(ev.loss + opt.c);
        StepRecord rec;
        rec.step = state.step;
        rec.batch_loss = ev.loss;
        rec.next_loss = next_loss;
        rec.full_batch = batch_t == nullptr;
        rec.grad_norm = std::sqrt(squared_norm(g));
        const MinMaxMean rs = summarize(r_next);
        rec.r_min = rs.min;
        rec.r_max = rs.max;
        rec.r_mean = rs.mean;
        const MinMaxMean rt = summarize(r_tilde);
        rec.rho_min = rt.min / root;
        rec.rho_max = rt.max / root;
        const MinMaxMean ws = summarize(omega);
        rec.omega_min = ws.min;
        rec.omega_max = ws.max;
        const MinMaxMean ls = summarize(lr);
        rec.lr_min = ls.min;
        rec.lr_max = ls.max;
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (lr[i] > 0.0)
                worst = std::max(worst, dissipation_residual(state.r[i], r_tilde[i], dx[i], lr[i]));
        }
        rec.dissipation_residual = worst;

        if (detail) {
            *detail = StepDetail{state.step, ev.loss, next_loss, opt.c, opt.psi, true,
                                 ev.grad.vec(), state.r, r_tilde, r_next, dx, lr, omega};
        }
        state.x = std::move(x_next);
        state.r = std::move(r_next);
        ++state.step;
        return rec;
    } catch (const DivergenceError& e) {
        throw e.at_step(state.step);
    }
}

StepRecord sav_step(SavState& state, const Objective& obj, const Batch* batch_t,
                    StepDetail* detail) {
    try {
        const Evaluation ev = evaluate(obj, state.x, batch_t);
        const std::span<const double> g = ev.grad.values();
        const double r_next = sav_tilde_r(state.r, g, ev.loss, state.c, state.eta);
        const double root = std::sqrt(ev.loss + state.c);
        const std::size_t n = state.x.dim();
        std::vector<double> moved(n);
        for (std::size_t i = 0; i < n; ++i)
            moved[i] = state.x[i] - state.eta * (r_next / root) * g[i];
        ParamVector x_next = ParamVector::from_step(std::move(moved));

        double dx_sq = 0.0;
        std::vector<double> dx(n);
        for (std::size_t i = 0; i < n; ++i) {
            dx[i] = x_next[i] - state.x[i];
            dx_sq += dx[i] * dx[i];
        }
        const double gap = r_next - state.r;
        const double residual =
            std::abs(r_next * r_next - state.r * state.r + gap * gap + dx_sq / state.eta) /
            std::max(1.0, state.r * state.r);

        StepRecord rec;
        rec.step = state.step;
        rec.batch_loss = ev.loss;
        rec.next_loss = ev.loss;
        rec.full_batch = batch_t == nullptr;
        rec.grad_norm = std::sqrt(squared_norm(g));
        rec.r_min = rec.r_max = rec.r_mean = r_next;
        rec.rho_min = rec.rho_max = r_next / root;
        rec.omega_min = rec.omega_max = 1.0;
        rec.lr_min = rec.lr_max = state.eta;
        rec.dissipation_residual = residual;

        if (detail) {
            *detail = StepDetail{state.step,  ev.loss,      ev.loss,  state.c,
                                 0.0,         false,        ev.grad.vec(), {state.r},
                                 {r_next},    {r_next},     dx,       {state.eta},
                                 {1.0}};
        }
        state.x = std::move(x_next);
        state.r = r_next;
        ++state.step;
        return rec;
    } catch (const DivergenceError& e) {
        throw e.at_step(state.step);
    }
}

StepRecord sgd_full_step(ParamVector& x, const Objective& obj, const Batch* batch_t, double eta,
                         long step) {
    try {
        const Evaluation ev = evaluate(obj, x, batch_t);
        ParamVector x_next = sgd_step(x, ev.grad, eta);
        StepRecord rec;
        rec.step = step;
        rec.batch_loss = ev.loss;
        rec.next_loss = ev.loss;
        rec.full_batch = batch_t == nullptr;
        rec.grad_norm = std::sqrt(squared_norm(ev.grad.values()));
        rec.r_min = rec.r_max = rec.r_mean = std::sqrt(std::max(ev.loss, 0.0));
        rec.rho_min = rec.rho_max = 1.0;
        rec.omega_min = rec.omega_max = 0.0;
        rec.lr_min = rec.lr_max = eta;
        rec.dissipation_residual = 0.0;
        x = std::move(x_next);
        return rec;
    } catch (const DivergenceError& e) {
        throw e.at_step(step);
    }
}

}  // namespace vav
