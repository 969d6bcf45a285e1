#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vav/core.hpp"

namespace vav {

/// scale * ((a - x)^2 + b (y - x^2)^2). Minimum 0 at (a, a^2).
class RosenbrockProblem final : public Objective {
public:
    explicit RosenbrockProblem(double a = 1.0, double b = 100.0, double scale = 1.0);

    [[nodiscard]] std::size_t dim() const override { return 2; }
    [[nodiscard]] double value(std::span<const double> x, const Batch* batch) const override;
    double value_and_gradient(std::span<const double> x, const Batch* batch,
                              std::span<double> grad) const override;

    [[nodiscard]] double a() const noexcept { return a_; }
    [[nodiscard]] double b() const noexcept { return b_; }
    [[nodiscard]] double scale() const noexcept { return scale_; }

private:
    double a_, b_, scale_;
};

/// Unscaled Rosenbrock value and gradient at a point.
std::pair<double, std::array<double, 2>> rosenbrock_value_grad(double x, double y, double a = 1.0,
                                                               double b = 100.0);

/// 0.5 x^T M x + offset with M symmetric positive semidefinite.
class QuadraticProblem final : public Objective {
public:
    QuadraticProblem(Eigen::MatrixXd matrix, double offset = 0.0);
    static QuadraticProblem identity(std::size_t n, double offset = 0.0);
    static QuadraticProblem diagonal(std::span<const double> diag, double offset = 0.0);

    [[nodiscard]] std::size_t dim() const override { return static_cast<std::size_t>(m_.rows()); }
    [[nodiscard]] double value(std::span<const double> x, const Batch* batch) const override;
    double value_and_gradient(std::span<const double> x, const Batch* batch,
                              std::span<double> grad) const override;

    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return m_; }
    [[nodiscard]] double offset() const noexcept { return offset_; }

private:
    Eigen::MatrixXd m_;
    double offset_;
};

/// Fully connected tanh network with a linear output layer. Parameters are flattened
/// layer by layer; within a layer the weight matrix comes first (row-major,
/// out x in) followed by the bias vector.
class MlpModel {
public:
    explicit MlpModel(std::vector<std::size_t> widths);

    [[nodiscard]] const std::vector<std::size_t>& widths() const noexcept { return widths_; }
    [[nodiscard]] std::size_t num_params() const noexcept { return num_params_; }
    [[nodiscard]] std::size_t input_dim() const noexcept { return widths_.front(); }
    [[nodiscard]] std::size_t output_dim() const noexcept { return widths_.back(); }

    /// Uniform in +-1/sqrt(fan_in) for every weight and bias of a layer.
    [[nodiscard]] ParamVector init_params(RngStream& rng) const;

    /// Output for a single input row.
    [[nodiscard]] std::vector<double> forward(std::span<const double> params,
                                              std::span<const double> input) const;

    /// Mean squared error over `rows` and, when `grad` is non-empty, its gradient
    /// accumulated by reverse-mode backprop.
    double mse(std::span<const double> params, const Eigen::MatrixXd& inputs,
               const Eigen::MatrixXd& targets, std::span<const std::size_t> rows,
               std::span<double> grad) const;

private:
    struct LayerSlice {
        std::size_t in, out, weight_offset, bias_offset;
    };
    std::vector<std::size_t> widths_;
    std::vector<LayerSlice> layers_;
    std::size_t num_params_ = 0;
};

/// Mini-batch least squares regression through an MlpModel.
class RegressionProblem final : public Objective {
public:
    RegressionProblem(Eigen::MatrixXd inputs, Eigen::MatrixXd targets, MlpModel model);

    [[nodiscard]] std::size_t dim() const override { return model_.num_params(); }
    [[nodiscard]] std::size_t dataset_size() const override {
        return static_cast<std::size_t>(inputs_.rows());
    }
    [[nodiscard]] double value(std::span<const double> x, const Batch* batch) const override;
    double value_and_gradient(std::span<const double> x, const Batch* batch,
                              std::span<double> grad) const override;

    [[nodiscard]] const MlpModel& model() const noexcept { return model_; }
    [[nodiscard]] const Eigen::MatrixXd& inputs() const noexcept { return inputs_; }
    [[nodiscard]] const Eigen::MatrixXd& targets() const noexcept { return targets_; }

private:
    std::span<const std::size_t> rows(const Batch* batch) const;

    Eigen::MatrixXd inputs_;
    Eigen::MatrixXd targets_;
    MlpModel model_;
    std::vector<std::size_t> all_rows_;
};

/// Inputs uniform on [-1, 1], targets sin(pi x) plus gaussian noise. Deterministic per seed.
RegressionProblem make_sine_regression(std::size_t num_points, double noise_sd, std::uint64_t seed,
                                       std::vector<std::size_t> widths = {1, 16, 16, 1});

/// Writes a one-input, one-output dataset as CSV with header `x,y`.
void export_dataset_csv(const RegressionProblem& problem, const std::filesystem::path& path);

/// Reads an `x,y` CSV written by export_dataset_csv.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> import_dataset_csv(const std::filesystem::path& path);

}  // namespace vav
