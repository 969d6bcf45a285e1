#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "test_helpers.hpp"
#include "vav/core.hpp"
#include "vav/problems.hpp"

namespace vav {
namespace {

TEST(ParamVector, RejectsNonFiniteAndEmpty) {
    EXPECT_THROW(ParamVector({1.0, std::nan("")}), ConfigError);
    EXPECT_THROW(ParamVector(std::vector<double>{}), ConfigError);
    EXPECT_THROW(ParamVector::from_step({1.0, INFINITY}), DivergenceError);
    EXPECT_EQ(ParamVector({1.0, 2.0}).dim(), 2u);
}

TEST(Batch, EnforcesBoundsAndDistinctness) {
    EXPECT_THROW(Batch({0, 5}, 5), ConfigError);
    EXPECT_THROW(Batch({1, 1}, 5), ConfigError);
    EXPECT_THROW(Batch({}, 5), ConfigError);
    const Batch b({3, 0, 2}, 5);
    EXPECT_EQ(std::vector<std::size_t>(b.indices().begin(), b.indices().end()),
              (std::vector<std::size_t>{0, 2, 3}));
}

TEST(Evaluate, RosenbrockAtMinimum) {
    const RosenbrockProblem rosen;
    const Evaluation ev = evaluate(rosen, ParamVector{1.0, 1.0});
    EXPECT_EQ(ev.loss, 0.0);
    EXPECT_EQ(ev.grad[0], 0.0);
    EXPECT_EQ(ev.grad[1], 0.0);
}

TEST(Evaluate, RosenbrockAtStartingPoint) {
    // (1 - (-2))^2 + 100 (-2 - 4)^2 = 9 + 3600
    const RosenbrockProblem rosen;
    const Evaluation ev = evaluate(rosen, ParamVector{-2.0, -2.0});
    EXPECT_EQ(ev.loss, 3609.0);
    EXPECT_EQ(ev.grad[0], -2.0 * 3.0 - 4.0 * 100.0 * -2.0 * -6.0);
    EXPECT_EQ(ev.grad[1], 2.0 * 100.0 * -6.0);
}

TEST(Evaluate, HalfSquaredNorm) {
    const test::HalfSquaredNorm q(2);
    const Evaluation ev = evaluate(q, ParamVector{3.0, 4.0});
    EXPECT_EQ(ev.loss, 12.5);
    EXPECT_EQ(ev.grad.vec(), (std::vector<double>{3.0, 4.0}));
}

TEST(Evaluate, NonFiniteLossIsDivergence) {
    const test::BlowsUp obj;
    EXPECT_THROW(evaluate(obj, ParamVector{2.0}), DivergenceError);
    EXPECT_THROW(evaluate_value(obj, ParamVector{2.0}), DivergenceError);
}

TEST(SampleBatch, FullSizeIsIdentity) {
    RngStream rng(3);
    const Batch b = sample_batch(rng, 7, 7);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(b.indices()[i], i);
}

TEST(SampleBatch, RejectsOutOfRangeSizes) {
    RngStream rng(3);
    EXPECT_THROW(sample_batch(rng, 10, 0), ConfigError);
    EXPECT_THROW(sample_batch(rng, 10, 11), ConfigError);
}

TEST(SampleBatch, SameSeedSameSequence) {
    RngStream a(99), b(99);
    for (int k = 0; k < 50; ++k) EXPECT_EQ(sample_batch(a, 100, 10), sample_batch(b, 100, 10));
    RngStream c(100);
    RngStream d(99);
    bool any_diff = false;
    for (int k = 0; k < 5; ++k) any_diff = any_diff || !(sample_batch(c, 100, 10) == sample_batch(d, 100, 10));
    EXPECT_TRUE(any_diff);
}

TEST(SampleBatch, FrequenciesWithinThreeSigma) {
    // Each index appears in a draw with probability 10/100, so over 1000 draws its count is
    // Binomial(1000, 0.1): mean 100, sigma = sqrt(1000 * 0.1 * 0.9) = 9.4868.
    const double sigma = std::sqrt(1000.0 * 0.1 * 0.9);
    RngStream rng(12345);
    std::vector<int> counts(100, 0);
    for (int k = 0; k < 1000; ++k) {
        const Batch b = sample_batch(rng, 100, 10);
        for (std::size_t i : b.indices()) ++counts[i];
    }
    for (std::size_t i = 0; i < counts.size(); ++i)
        EXPECT_LE(std::abs(counts[i] - 100.0), 3.0 * sigma) << "index " << i;
}

TEST(RngStream, KnownEngineOutput) {
    // The C++ standard fixes the 10000th output of a default-seeded mt19937_64.
    RngStream rng(5489u);
    std::uint64_t v = 0;
    for (int k = 0; k < 10000; ++k) v = rng.next_u64();
    EXPECT_EQ(v, 9981545732273789042ull);
}

TEST(RngStream, UniformAndNormalMoments) {
    RngStream rng(1);
    double sum = 0.0, sum_sq = 0.0, nsum = 0.0, nsq = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sum_sq += u * u;
        const double z = rng.normal();
        nsum += z;
        nsq += z * z;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
    EXPECT_NEAR(sum_sq / n - 0.25, 1.0 / 12.0, 0.005);
    EXPECT_NEAR(nsum / n, 0.0, 0.01);
    EXPECT_NEAR(nsq / n, 1.0, 0.01);
}

TEST(FiniteDifference, QuadraticIsExact) {
    const test::HalfSquaredNorm q(2);
    const ParamVector fd = finite_difference_gradient(q, ParamVector{1.0, 2.0}, nullptr, 1e-5);
    EXPECT_NEAR(fd[0], 1.0, 1e-8);
    EXPECT_NEAR(fd[1], 2.0, 1e-8);
}

TEST(FiniteDifference, RosenbrockMatchesAnalytic) {
    const RosenbrockProblem rosen;
    const ParamVector x{-2.0, -2.0};
    const ParamVector fd = finite_difference_gradient(rosen, x, nullptr, 1e-6);
    const Evaluation ev = evaluate(rosen, x);
    EXPECT_TRUE(compare_gradients(ev.grad.values(), fd.values(), 1e-4, 1e-8).passed);
}

TEST(FiniteDifference, ReportsFailingCoordinate) {
    const test::BlowsUp obj;
    try {
        (void)finite_difference_gradient(obj, ParamVector{1.0}, nullptr, 0.5);
        FAIL() << "expected OracleError";
    } catch (const OracleError& e) {
        EXPECT_EQ(e.coordinate(), 0u);
    }
    EXPECT_THROW(finite_difference_gradient(obj, ParamVector{0.0}, nullptr, 0.0), ConfigError);
}

TEST(CompareGradients, AbsoluteFloorAndRelativeTolerance) {
    const std::vector<double> a{1.0, 1e-10, 100.0};
    EXPECT_TRUE(compare_gradients(a, std::vector<double>{1.00005, 5e-9, 100.0}, 1e-4, 1e-8).passed);
    const GradientCheck bad = compare_gradients(a, std::vector<double>{1.0, 0.0, 101.0}, 1e-4, 1e-8);
    EXPECT_FALSE(bad.passed);
    EXPECT_EQ(bad.worst_coordinate, 2u);
}

}  // namespace
}  // namespace vav
