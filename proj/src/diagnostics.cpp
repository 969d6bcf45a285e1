#include "vav/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vav/format.hpp"

namespace vav {

namespace {

const std::set<std::string>& known_checkers() {
    static const std::set<std::string> names{"dissipation", "relaxation", "monotonicity", "omega",
                                             "lower_bound"};
    return names;
}

std::string coordinate_inputs(const StepDetail& s, std::size_t i) {
    std::string out = "r=" + format_double(s.r_prev[i]) + ",r_tilde=" + format_double(s.r_tilde[i]) +
                      ",r_next=" + format_double(s.r_next[i]) + ",dx=" + format_double(s.dx[i]) +
                      ",lr=" + format_double(s.lr[i]) + ",loss=" + format_double(s.loss) +
                      ",next_loss=" + format_double(s.next_loss) + ",c=" + format_double(s.c);
    if (s.relaxed) out += ",psi=" + format_double(s.psi) + ",omega=" + format_double(s.omega[i]);
    return out;
}

// The scalar scheme stores one r but dx per coordinate; its bound term uses |dx|^2.
double dx_squared(const StepDetail& s, std::size_t i) {
    if (s.relaxed) return s.dx[i] * s.dx[i];
    double sum = 0.0;
    for (double d : s.dx) sum += d * d;
    return sum;
}

long coordinate_label(const StepDetail& s, std::size_t i) {
    return s.relaxed ? static_cast<long>(i) : -1;
}

InvariantReport inequality(std::string name, long step, double observed, double bound, double tol,
                           long coordinate, std::string inputs) {
    return {std::move(name), step, observed, bound, observed <= bound + tol, coordinate,
            std::move(inputs)};
}

}  // namespace

std::size_t LowerBoundTrace::violations() const {
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [](const auto& e) { return e.violated; }));
}

double LowerBoundTrace::violation_fraction() const {
    return steps.empty() ? 0.0 : static_cast<double>(violations()) / static_cast<double>(steps.size());
}

std::vector<InvariantReport> dissipation_reports(const StepDetail& s, double tol) {
    std::vector<InvariantReport> out;
    for (std::size_t i = 0; i < s.r_prev.size(); ++i) {
        const double lr = s.lr[i];
        if (!(lr > 0.0)) continue;  // annealed coordinate: nothing moved
        const double r = s.r_prev[i], rt = s.r_tilde[i];
        const double gap = rt - r;
        const double residual =
            std::abs(rt * rt - r * r + gap * gap + dx_squared(s, i) / lr) / std::max(1.0, r * r);
        out.push_back({"dissipation", s.step, residual, 0.0, residual <= tol, coordinate_label(s, i),
                       coordinate_inputs(s, i)});
    }
    return out;
}

std::vector<InvariantReport> relaxation_reports(const StepDetail& s, double tol) {
    std::vector<InvariantReport> out;
    if (!s.relaxed) return out;
    for (std::size_t i = 0; i < s.r_prev.size(); ++i) {
        const double lr = s.lr[i] > 0.0 ? s.lr[i] : 1.0;
        const double observed = s.r_next[i] * s.r_next[i] - s.r_tilde[i] * s.r_tilde[i];
        const double bound = (s.psi / lr) * s.dx[i] * s.dx[i];
        out.push_back(inequality("relaxation", s.step, observed, bound, tol, static_cast<long>(i),
                                 coordinate_inputs(s, i)));
    }
    return out;
}

std::vector<InvariantReport> monotonicity_reports(const StepDetail& s, double tol) {
    std::vector<InvariantReport> out;
    if (!s.relaxed) return out;
    for (std::size_t i = 0; i < s.r_prev.size(); ++i) {
        const double lr = s.lr[i] > 0.0 ? s.lr[i] : 1.0;
        const double r = s.r_prev[i], rt = s.r_tilde[i], rn = s.r_next[i];
        const double observed = rn * rn - r * r;
        const double bound = -(rt - r) * (rt - r) - ((1.0 - s.psi) / lr) * s.dx[i] * s.dx[i];
        out.push_back(inequality("monotonicity", s.step, observed, bound, tol, static_cast<long>(i),
                                 coordinate_inputs(s, i)));
    }
    return out;
}

std::vector<InvariantReport> omega_reports(const OmegaSolve& solve, long step, double tol) {
    const OmegaInputs& in = solve.inputs;
    const OmegaCoefficients q = omega_coefficients(in);
    const std::string inputs = "f_next=" + format_double(in.f_next) +
                               ",r_tilde=" + format_double(in.r_tilde) + ",dx=" + format_double(in.dx) +
                               ",psi=" + format_double(in.psi) + ",eta=" + format_double(in.eta) +
                               ",omega=" + format_double(solve.omega);
    const double w = solve.omega;
    const bool in_range = w >= 0.0 && w <= 1.0;
    std::vector<InvariantReport> out;
    out.push_back({"omega_range", step, w, 1.0, in_range, -1, inputs});
    out.push_back(inequality("omega_feasible", step, q.at(w), 0.0, tol, -1, inputs));
    out.push_back(inequality("omega_q1", step, q.at(1.0), 0.0, tol, -1, inputs));
    out.push_back(inequality("omega_discriminant", step, -q.discriminant(), 0.0, tol, -1, inputs));
    return out;
}

namespace {

template <class Fn>
std::vector<InvariantReport> over_steps(std::span<const StepDetail> steps, double tol, Fn fn) {
    std::vector<InvariantReport> out;
    for (const auto& s : steps) {
        auto reports = fn(s, tol);
        out.insert(out.end(), std::make_move_iterator(reports.begin()),
                   std::make_move_iterator(reports.end()));
    }
    return out;
}

}  // namespace

std::vector<InvariantReport> check_dissipation(std::span<const StepDetail> steps, double tol) {
    return over_steps(steps, tol, dissipation_reports);
}

std::vector<InvariantReport> check_relaxation(std::span<const StepDetail> steps, double tol) {
    return over_steps(steps, tol, relaxation_reports);
}

std::vector<InvariantReport> check_monotonicity(std::span<const StepDetail> steps, double tol) {
    return over_steps(steps, tol, monotonicity_reports);
}

std::vector<InvariantReport> audit_omega(std::span<const OmegaSolve> solves, double tol) {
    std::vector<InvariantReport> out;
    out.reserve(solves.size() * 4);
    for (std::size_t k = 0; k < solves.size(); ++k) {
        auto reports = omega_reports(solves[k], static_cast<long>(k), tol);
        out.insert(out.end(), reports.begin(), reports.end());
    }
    return out;
}

LowerBoundTrace track_lower_bound(std::span<const StepRecord> records, double c, double tol) {
    LowerBoundTrace trace;
    trace.steps.reserve(records.size());
    for (const auto& rec : records) {
        const double r_sq = std::max(rec.r_min * rec.r_min, rec.r_max * rec.r_max);
        trace.steps.push_back({rec.step, rec.next_loss, r_sq, r_sq > rec.next_loss + c + tol});
    }
    return trace;
}

std::size_t count_failures(std::span<const InvariantReport> reports) {
    return static_cast<std::size_t>(
        std::count_if(reports.begin(), reports.end(), [](const auto& r) { return !r.passed; }));
}

// ---------------------------------------------------------------------------------------

RunAuditor::RunAuditor(std::vector<std::string> checkers, double c, Tolerances tol,
                       double lower_bound_tol, std::size_t max_kept)
    : checkers_(std::move(checkers)),
      c_(c),
      tol_(tol),
      lower_bound_tol_(lower_bound_tol),
      max_kept_(max_kept) {
    validate_names(checkers_);
    for (const auto& name : checkers_) {
        if (name == "lower_bound") continue;
        wants_detail_ = true;
        if (name == "omega") {
            wants_omega_ = true;
            for (const char* sub : {"omega_range", "omega_feasible", "omega_q1", "omega_discriminant"})
                tallies_.push_back({sub});
        } else {
            tallies_.push_back({name});
        }
    }
    if (std::find(checkers_.begin(), checkers_.end(), "lower_bound") != checkers_.end())
        tallies_.push_back({"lower_bound"});
}

void RunAuditor::validate_names(std::span<const std::string> checkers) {
    for (const auto& name : checkers)
        if (!known_checkers().contains(name)) throw ConfigError("unknown checker '" + name + "'");
}

RunAuditor::CheckTally* RunAuditor::find(const std::string& name) {
    for (auto& t : tallies_)
        if (t.name == name) return &t;
    return nullptr;
}

void RunAuditor::absorb(const std::vector<InvariantReport>& reports) {
    for (const auto& rep : reports) {
        CheckTally* t = find(rep.name);
        if (!t) continue;
        ++t->checked;
        const double excess = rep.name == "dissipation" ? rep.observed : rep.observed - rep.bound;
        t->worst = t->checked == 1 ? excess : std::max(t->worst, excess);
        if (!rep.passed) {
            ++t->failed;
            if (kept_.size() < max_kept_) kept_.push_back(rep);
        }
    }
}

void RunAuditor::observe(const StepDetail& detail, std::span<const OmegaSolve> solves,
                         const StepRecord& record) {
    for (const auto& name : checkers_) {
        if (name == "dissipation") {
            absorb(dissipation_reports(detail, tol_.identity));
        } else if (name == "relaxation") {
            absorb(relaxation_reports(detail, tol_.inequality));
        } else if (name == "monotonicity") {
            absorb(monotonicity_reports(detail, tol_.monotonicity));
        } else if (name == "omega") {
            for (const auto& solve : solves) absorb(omega_reports(solve, record.step, tol_.inequality));
        } else if (name == "lower_bound") {
            const StepRecord one[] = {record};
            const LowerBoundTrace trace = track_lower_bound(one, c_, lower_bound_tol_);
            const auto& e = trace.steps.front();
            ++lb_steps_;
            if (e.violated) ++lb_violations_;
            InvariantReport rep{"lower_bound", record.step, e.r_squared_max, e.batch_loss + c_,
                                !e.violated, -1,
                                "next_loss=" + format_double(e.batch_loss) + ",c=" + format_double(c_)};
            absorb({rep});
        }
    }
}

bool RunAuditor::hard_failure() const {
    return std::any_of(tallies_.begin(), tallies_.end(),
                       [](const auto& t) { return t.name != "lower_bound" && t.failed > 0; });
}

double RunAuditor::lower_bound_violation_fraction() const {
    return lb_steps_ == 0 ? 0.0 : static_cast<double>(lb_violations_) / static_cast<double>(lb_steps_);
}

}  // namespace vav
