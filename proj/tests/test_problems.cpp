#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <vector>

#include "vav/problems.hpp"

namespace vav {
namespace {

namespace fs = std::filesystem;

void expect_fd_agreement(const Objective& obj, RngStream& rng, double spread, double h,
                         const Batch* batch = nullptr) {
    for (int k = 0; k < 100; ++k) {
        std::vector<double> x(obj.dim());
        for (double& v : x) v = rng.uniform(-spread, spread);
        const ParamVector p(x);
        const Evaluation ev = evaluate(obj, p, batch);
        const ParamVector fd = finite_difference_gradient(obj, p, batch, h);
        const GradientCheck check = compare_gradients(ev.grad.values(), fd.values(), 1e-4, 1e-8);
        EXPECT_TRUE(check.passed) << "point " << k << ", coordinate " << check.worst_coordinate
                                  << ", error " << check.max_error;
    }
}

TEST(Rosenbrock, Values) {
    const auto [f, g] = rosenbrock_value_grad(1.0, 1.0);
    EXPECT_EQ(f, 0.0);
    EXPECT_EQ(g[0], 0.0);
    EXPECT_EQ(g[1], 0.0);
    EXPECT_EQ(rosenbrock_value_grad(-2.0, -2.0).first, 3609.0);
    const RosenbrockProblem scaled(1.0, 100.0, 0.1);
    EXPECT_DOUBLE_EQ(evaluate_value(scaled, ParamVector{-2.0, -2.0}), 360.9);
    EXPECT_THROW(RosenbrockProblem(1.0, 100.0, 0.0), ConfigError);
    EXPECT_THROW((void)evaluate_value(scaled, ParamVector{1.0}), ConfigError);
}

TEST(Rosenbrock, GradientMatchesFiniteDifferences) {
    RngStream rng(100);
    expect_fd_agreement(RosenbrockProblem(), rng, 2.0, 1e-6);
    expect_fd_agreement(RosenbrockProblem(1.0, 100.0, 0.1), rng, 2.0, 1e-6);
}

TEST(Quadratic, ValuesAndValidation) {
    const QuadraticProblem q = QuadraticProblem::diagonal(std::vector<double>{2.0, 8.0}, 0.5);
    // 0.5 (2 * 1 + 8 * 0.25) + 0.5
    EXPECT_DOUBLE_EQ(evaluate_value(q, ParamVector{1.0, 0.5}), 2.5);
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, 0.0, 1.0;
    EXPECT_THROW(QuadraticProblem{asym}, ConfigError);
    Eigen::MatrixXd indefinite(2, 2);
    indefinite << 1.0, 0.0, 0.0, -1.0;
    EXPECT_THROW(QuadraticProblem{indefinite}, ConfigError);
}

TEST(Quadratic, GradientMatchesFiniteDifferences) {
    Eigen::MatrixXd m(3, 3);
    m << 4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0;
    RngStream rng(101);
    expect_fd_agreement(QuadraticProblem(m, 0.1), rng, 3.0, 1e-5);
}

TEST(Mlp, ParameterLayout) {
    const MlpModel model({1, 16, 16, 1});
    EXPECT_EQ(model.num_params(), 16u * 1 + 16 + 16 * 16 + 16 + 1 * 16 + 1);
    EXPECT_THROW(MlpModel({1}), ConfigError);
}

TEST(Mlp, ZeroWeightsGiveBiasOutput) {
    // Hidden biases h pass through tanh but meet zero output weights, so every output
    // is the output bias.
    const MlpModel model({1, 3, 1});
    std::vector<double> params(model.num_params(), 0.0);
    for (std::size_t i = 3; i < 6; ++i) params[i] = 0.7;  // hidden biases
    const double beta = -0.3;
    params.back() = beta;
    Eigen::MatrixXd xs(4, 1), ys = Eigen::MatrixXd::Zero(4, 1);
    xs << -1.0, -0.2, 0.4, 0.9;
    const RegressionProblem reg(xs, ys, model);
    EXPECT_DOUBLE_EQ(reg.value(params, nullptr), beta * beta);
    EXPECT_DOUBLE_EQ(model.forward(params, std::vector<double>{0.4})[0], beta);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
    const RegressionProblem reg = make_sine_regression(64, 0.05, 3);
    RngStream rng(102);
    expect_fd_agreement(reg, rng, 1.0, 1e-5);
    const Batch b = sample_batch(rng, reg.dataset_size(), 16);
    expect_fd_agreement(reg, rng, 1.0, 1e-5, &b);
}

TEST(Mlp, BatchLossIsMeanOfRowLosses) {
    const RegressionProblem reg = make_sine_regression(40, 0.1, 4);
    RngStream rng(9);
    const ParamVector p = reg.model().init_params(rng);
    std::vector<std::size_t> rows{1, 5, 17, 33};
    double sum = 0.0;
    for (std::size_t r : rows) {
        const Batch one({r}, 40);
        sum += reg.value(p.values(), &one);
    }
    const Batch b(rows, 40);
    EXPECT_NEAR(reg.value(p.values(), &b), sum / 4.0, 1e-15);
    EXPECT_THROW(Batch({1, 1}, 40), ConfigError);
}

TEST(Mlp, FullLossIsWeightedMeanOfDisjointBatches) {
    const RegressionProblem reg = make_sine_regression(100, 0.05, 5);
    RngStream rng(10);
    const ParamVector p = reg.model().init_params(rng);
    std::vector<std::size_t> first(30), second(70);
    std::iota(first.begin(), first.end(), 0);
    std::iota(second.begin(), second.end(), 30);
    const Batch a(first, 100), b(second, 100);
    const double combined = (30.0 * reg.value(p.values(), &a) + 70.0 * reg.value(p.values(), &b)) / 100.0;
    EXPECT_NEAR(reg.value(p.values(), nullptr), combined, 1e-12);
}

TEST(Mlp, InitWithinFanInBounds) {
    const MlpModel model({1, 16, 16, 1});
    RngStream rng(3);
    const ParamVector p = model.init_params(rng);
    // First layer has fan-in 1; the next two have fan-in 16.
    for (std::size_t i = 0; i < 32; ++i) EXPECT_LE(std::abs(p[i]), 1.0);
    for (std::size_t i = 32; i < p.dim(); ++i) EXPECT_LE(std::abs(p[i]), 0.25);
    RngStream again(3);
    EXPECT_EQ(model.init_params(again), p);
}

TEST(SineRegression, NoiselessTargetsAreExact) {
    const RegressionProblem reg = make_sine_regression(200, 0.0, 11);
    for (Eigen::Index i = 0; i < reg.inputs().rows(); ++i) {
        const double x = reg.inputs()(i, 0);
        EXPECT_GE(x, -1.0);
        EXPECT_LT(x, 1.0);
        EXPECT_EQ(reg.targets()(i, 0), std::sin(std::numbers::pi * x));
    }
    EXPECT_EQ(std::sin(std::numbers::pi * 0.0), 0.0);
    EXPECT_EQ(std::sin(std::numbers::pi * 0.5), 1.0);
}

TEST(SineRegression, SeedDeterminism) {
    const RegressionProblem a = make_sine_regression(300, 0.05, 7);
    const RegressionProblem b = make_sine_regression(300, 0.05, 7);
    const RegressionProblem c = make_sine_regression(300, 0.05, 8);
    EXPECT_EQ(a.inputs(), b.inputs());
    EXPECT_EQ(a.targets(), b.targets());
    EXPECT_NE(a.inputs(), c.inputs());
    EXPECT_THROW(make_sine_regression(1, 0.0, 1), ConfigError);
    EXPECT_THROW(make_sine_regression(10, -1.0, 1), ConfigError);
}

TEST(DatasetCsv, RoundTrip) {
    const fs::path path = fs::temp_directory_path() / "vav_dataset_roundtrip.csv";
    const RegressionProblem reg = make_sine_regression(50, 0.05, 12);
    export_dataset_csv(reg, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "x,y");
    const auto [xs, ys] = import_dataset_csv(path);
    EXPECT_EQ(xs, reg.inputs());
    EXPECT_EQ(ys, reg.targets());
    fs::remove(path);
}

TEST(DatasetCsv, RejectsMalformedFiles) {
    const fs::path path = fs::temp_directory_path() / "vav_dataset_bad.csv";
    {
        std::ofstream out(path);
        out << "a,b\n1,2\n";
    }
    EXPECT_THROW(import_dataset_csv(path), ConfigError);
    {
        std::ofstream out(path);
        out << "x,y\n1,oops\n";
    }
    EXPECT_THROW(import_dataset_csv(path), ConfigError);
    fs::remove(path);
    EXPECT_THROW(import_dataset_csv(path), ConfigError);
}

}  // namespace
}  // namespace vav
