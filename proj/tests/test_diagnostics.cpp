#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "test_helpers.hpp"
#include "vav/diagnostics.hpp"
#include "vav/problems.hpp"

namespace vav {
namespace {

std::map<std::string, double> parse_inputs(const std::string& s) {
    std::map<std::string, double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    }
    return out;
}

struct Trace {
    std::vector<StepDetail> details;
    std::vector<OmegaSolve> solves;
    std::vector<StepRecord> records;
};

Trace run_vav(const Objective& obj, ParamVector x0, VavOptions opt, int steps) {
    Trace t;
    VavState s = init_vav_state(obj, std::move(x0), opt);
    for (int k = 0; k < steps; ++k) {
        StepDetail d;
        t.records.push_back(vav_step(s, obj, nullptr, nullptr, &d, &t.solves));
        t.details.push_back(std::move(d));
    }
    return t;
}

TEST(Dissipation, SavStepsPass) {
    const QuadraticProblem q = QuadraticProblem::diagonal(std::vector<double>{1.0, 4.0}, 0.2);
    SavState s = init_sav_state(q, ParamVector{2.0, -1.0}, 0.1, 0.0);
    std::vector<StepDetail> details;
    for (int k = 0; k < 100; ++k) {
        StepDetail d;
        (void)sav_step(s, q, nullptr, &d);
        details.push_back(d);
    }
    const auto reports = check_dissipation(details);
    EXPECT_EQ(reports.size(), 100u);
    EXPECT_EQ(count_failures(reports), 0u);
    for (const auto& r : reports) EXPECT_EQ(r.context(), "scalar");
}

TEST(Dissipation, CorruptedRTildeFails) {
    const QuadraticProblem q = QuadraticProblem::identity(2, 0.5);
    SavState s = init_sav_state(q, ParamVector{1.0, 1.0}, 0.1, 0.0);
    StepDetail d;
    (void)sav_step(s, q, nullptr, &d);
    EXPECT_EQ(count_failures(dissipation_reports(d, Tolerances{}.identity)), 0u);
    d.r_tilde[0] += 1e-3;
    const auto reports = dissipation_reports(d, Tolerances{}.identity);
    ASSERT_EQ(reports.size(), 1u);
    EXPECT_FALSE(reports[0].passed);
}

TEST(Dissipation, FullRosenbrockRunHasNoFailures) {
    const RosenbrockProblem rosen(1.0, 100.0, 0.1);
    const Trace t = run_vav(rosen, ParamVector{-2.0, -2.0}, {0.04, 0.95, 0.0, false}, 15000);
    EXPECT_EQ(count_failures(check_dissipation(t.details)), 0u);
    EXPECT_EQ(count_failures(check_relaxation(t.details)), 0u);
    EXPECT_EQ(count_failures(check_monotonicity(t.details)), 0u);
    EXPECT_EQ(count_failures(audit_omega(t.solves)), 0u);
}

TEST(Dissipation, LiteralRosenbrockRunHasNoFailures) {
    const RosenbrockProblem rosen;
    const Trace t = run_vav(rosen, ParamVector{-2.0, -2.0}, {0.04, 0.95, 0.0, false}, 15000);
    EXPECT_EQ(count_failures(check_dissipation(t.details)), 0u);
    EXPECT_EQ(count_failures(check_monotonicity(t.details)), 0u);
}

TEST(Dissipation, ReportInputsReproduceResidual) {
    const QuadraticProblem q = QuadraticProblem::diagonal(std::vector<double>{1.0, 30.0}, 0.0);
    const Trace t = run_vav(q, ParamVector{1.0, 1.0}, {0.05, 0.9, 0.01, false}, 20);
    for (const auto& rep : check_dissipation(t.details, 0.0)) {
        const auto in = parse_inputs(rep.inputs);
        const double recomputed = dissipation_residual(in.at("r"), in.at("r_tilde"), in.at("dx"), in.at("lr"));
        EXPECT_DOUBLE_EQ(recomputed, rep.observed);
    }
}

TEST(Relaxation, TamperedOmegaIsCaught) {
    const QuadraticProblem q = QuadraticProblem::diagonal(std::vector<double>{1.0, 10.0}, 0.0);
    Trace t = run_vav(q, ParamVector{1.0, -1.0}, {0.05, 0.95, 0.01, false}, 1);
    StepDetail d = t.details.front();
    EXPECT_EQ(count_failures(relaxation_reports(d, Tolerances{}.inequality)), 0u);
    // Replacing r' by a much larger value breaks both inequalities.
    d.r_next[0] = 10.0 * (d.r_tilde[0] + 1.0);
    EXPECT_FALSE(relaxation_reports(d, Tolerances{}.inequality)[0].passed);
    EXPECT_FALSE(monotonicity_reports(d, Tolerances{}.monotonicity)[0].passed);
    EXPECT_EQ(relaxation_reports(d, Tolerances{}.inequality)[0].context(), "coord 0");
}

TEST(LowerBound, DeterministicQuadraticNeverViolates) {
    const QuadraticProblem q = QuadraticProblem::diagonal(std::vector<double>{1.0, 10.0, 100.0}, 0.0);
    const double c = 0.01;
    const Trace t = run_vav(q, ParamVector{1.0, -2.0, 0.5}, {0.05, 0.95, c, false}, 2000);
    const LowerBoundTrace lb = track_lower_bound(t.records, c, Tolerances{}.inequality);
    EXPECT_EQ(lb.steps.size(), 2000u);
    EXPECT_EQ(lb.violations(), 0u);
    EXPECT_EQ(lb.violation_fraction(), 0.0);
}

TEST(LowerBound, OffsetIsApplied) {
    StepRecord rec;
    rec.next_loss = 1.0;
    rec.r_min = rec.r_max = std::sqrt(1.5);
    const StepRecord one[] = {rec};
    EXPECT_TRUE(track_lower_bound(one, 0.0, 1e-9).steps[0].violated);
    EXPECT_FALSE(track_lower_bound(one, 0.5 + 1e-12, 1e-9).steps[0].violated);
    EXPECT_EQ(track_lower_bound({}, 0.0, 0.0).violation_fraction(), 0.0);
}

TEST(LowerBound, MinibatchFractionIsReported) {
    const RegressionProblem reg = make_sine_regression(512, 0.05, 7);
    RngStream rng(1);
    VavState s = init_vav_state(reg, reg.model().init_params(rng), {0.5, 0.95, 0.0, false});
    Batch current = sample_batch(rng, reg.dataset_size(), 128);
    std::vector<StepRecord> records;
    for (int k = 0; k < 300; ++k) {
        Batch next = sample_batch(rng, reg.dataset_size(), 128);
        records.push_back(vav_step(s, reg, &current, &next));
        current = next;
    }
    const LowerBoundTrace lb = track_lower_bound(records, 0.0, Tolerances{}.inequality);
    const double frac = lb.violation_fraction();
    EXPECT_GE(frac, 0.0);
    EXPECT_LE(frac, 1.0);
    RecordProperty("violation_fraction", std::to_string(frac));
}

TEST(OmegaAudit, ZeroLeadingCoefficientPasses) {
    const OmegaInputs in{4.0, 2.0, 0.3, 0.95, 0.1};
    const OmegaSolve solves[] = {{in, solve_omega(in)}};
    EXPECT_EQ(count_failures(audit_omega(solves)), 0u);
}

TEST(OmegaAudit, RandomSolvesPass) {
    RngStream rng(99);
    std::vector<OmegaSolve> solves;
    for (int k = 0; k < 10000; ++k) {
        const double f = std::exp(rng.uniform(-8.0, 8.0));
        const OmegaInputs in{f, rng.uniform(0.0, 2.0 * std::sqrt(f)), rng.normal() * std::exp(rng.uniform(-8.0, 2.0)),
                             rng.uniform(0.01, 0.99), std::exp(rng.uniform(-9.0, 0.0))};
        solves.push_back({in, solve_omega(in)});
    }
    const auto reports = audit_omega(solves);
    EXPECT_EQ(reports.size(), 40000u);
    EXPECT_EQ(count_failures(reports), 0u);
}

TEST(OmegaAudit, OutOfRangeFails) {
    const OmegaInputs in{1.0, 0.5, 0.1, 0.95, 0.1};
    const OmegaSolve solves[] = {{in, 1.5}};
    const auto reports = audit_omega(solves);
    ASSERT_FALSE(reports.empty());
    EXPECT_EQ(reports[0].name, "omega_range");
    EXPECT_FALSE(reports[0].passed);
}

TEST(OmegaAudit, ReportInputsReproduceSolve) {
    RngStream rng(4);
    for (int k = 0; k < 50; ++k) {
        const OmegaInputs in{rng.uniform(0.1, 3.0), rng.uniform(0.0, 1.0), rng.normal() * 0.1, 0.95, 0.05};
        const OmegaSolve solves[] = {{in, solve_omega(in)}};
        const auto parsed = parse_inputs(audit_omega(solves)[0].inputs);
        const OmegaInputs again{parsed.at("f_next"), parsed.at("r_tilde"), parsed.at("dx"), parsed.at("psi"),
                                parsed.at("eta")};
        EXPECT_EQ(solve_omega(again), parsed.at("omega"));
    }
}

TEST(Observers, DetailRequestDoesNotChangeTrajectory) {
    const RegressionProblem reg = make_sine_regression(256, 0.05, 2);
    auto run = [&](bool observe) {
        RngStream rng(5);
        VavState s = init_vav_state(reg, reg.model().init_params(rng), {0.3, 0.9, 0.0, true});
        StepDetail d;
        std::vector<OmegaSolve> solves;
        RunAuditor auditor({"dissipation", "relaxation", "monotonicity", "omega", "lower_bound"}, 0.0);
        for (int k = 0; k < 100; ++k) {
            const Batch b = sample_batch(rng, reg.dataset_size(), 64);
            solves.clear();
            const StepRecord rec =
                vav_step(s, reg, &b, &b, observe ? &d : nullptr, observe ? &solves : nullptr);
            if (observe) auditor.observe(d, solves, rec);
        }
        EXPECT_FALSE(auditor.hard_failure());
        return std::pair{s.x, s.r};
    };
    EXPECT_EQ(run(true), run(false));
}

TEST(RunAuditorTest, TalliesAndNames) {
    EXPECT_THROW(RunAuditor({"dissipation", "energy"}, 0.0), ConfigError);
    const QuadraticProblem q = QuadraticProblem::diagonal(std::vector<double>{1.0, 10.0}, 0.0);
    RunAuditor auditor({"dissipation", "omega", "lower_bound"}, 0.01);
    EXPECT_TRUE(auditor.wants_detail());
    EXPECT_TRUE(auditor.wants_omega());
    VavState s = init_vav_state(q, ParamVector{1.0, 1.0}, {0.05, 0.95, 0.01, false});
    for (int k = 0; k < 10; ++k) {
        StepDetail d;
        std::vector<OmegaSolve> solves;
        const StepRecord rec = vav_step(s, q, nullptr, nullptr, &d, &solves);
        auditor.observe(d, solves, rec);
    }
    std::map<std::string, std::size_t> checked;
    for (const auto& t : auditor.tallies()) {
        checked[t.name] = t.checked;
        EXPECT_EQ(t.failed, 0u) << t.name;
    }
    EXPECT_EQ(checked.at("dissipation"), 20u);
    EXPECT_EQ(checked.at("omega_q1"), 20u);
    EXPECT_EQ(checked.at("lower_bound"), 10u);
    EXPECT_FALSE(auditor.hard_failure());
    EXPECT_EQ(auditor.lower_bound_violation_fraction(), 0.0);
}

TEST(RunAuditorTest, LowerBoundViolationIsSoft) {
    RunAuditor auditor({"lower_bound"}, 0.0);
    EXPECT_FALSE(auditor.wants_detail());
    StepRecord rec;
    rec.next_loss = 1.0;
    rec.r_min = rec.r_max = 2.0;
    auditor.observe(StepDetail{}, {}, rec);
    EXPECT_EQ(auditor.lower_bound_violation_fraction(), 1.0);
    EXPECT_FALSE(auditor.hard_failure());
    ASSERT_EQ(auditor.failures().size(), 1u);
}

}  // namespace
}  // namespace vav
