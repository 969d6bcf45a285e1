#include "vav/problems.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

namespace vav {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_dim(std::span<const double> x, std::size_t n, const char* who) {
    if (x.size() != n)
        throw ConfigError(std::string(who) + ": expected " + std::to_string(n) +
                          " parameters, got " + std::to_string(x.size()));
}

}  // namespace

// ---------------------------------------------------------------------------------------
// Rosenbrock

std::pair<double, std::array<double, 2>> rosenbrock_value_grad(double x, double y, double a,
                                                               double b) {
    const double u = a - x;
    const double v = y - x * x;
    return {u * u + b * v * v, {-2.0 * u - 4.0 * b * x * v, 2.0 * b * v}};
}

RosenbrockProblem::RosenbrockProblem(double a, double b, double scale)
    : a_(a), b_(b), scale_(scale) {
    if (!(b >= 0.0)) throw ConfigError("rosenbrock: b must be nonnegative");
    if (!(scale > 0.0)) throw ConfigError("rosenbrock: scale must be positive");
}

double RosenbrockProblem::value(std::span<const double> x, const Batch*) const {
    check_dim(x, 2, "rosenbrock");
    return scale_ * rosenbrock_value_grad(x[0], x[1], a_, b_).first;
}

double RosenbrockProblem::value_and_gradient(std::span<const double> x, const Batch*,
                                             std::span<double> grad) const {
    check_dim(x, 2, "rosenbrock");
    const auto [f, g] = rosenbrock_value_grad(x[0], x[1], a_, b_);
    grad[0] = scale_ * g[0];
    grad[1] = scale_ * g[1];
    return scale_ * f;
}

// ---------------------------------------------------------------------------------------
// Quadratic

QuadraticProblem::QuadraticProblem(Eigen::MatrixXd matrix, double offset)
    : m_(std::move(matrix)), offset_(offset) {
    if (m_.rows() == 0 || m_.rows() != m_.cols())
        throw ConfigError("quadratic: matrix must be square and nonempty");
    if (!(offset >= 0.0)) throw ConfigError("quadratic: offset must be nonnegative");
    const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
    if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ConfigError("quadratic: matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m_, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale)
        throw ConfigError("quadratic: matrix must be positive semidefinite");
}

QuadraticProblem QuadraticProblem::identity(std::size_t n, double offset) {
    const auto size = static_cast<Eigen::Index>(n);
    return QuadraticProblem(Eigen::MatrixXd::Identity(size, size), offset);
}

QuadraticProblem QuadraticProblem::diagonal(std::span<const double> diag, double offset) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(diag.size()));
    for (std::size_t i = 0; i < diag.size(); ++i) d[static_cast<Eigen::Index>(i)] = diag[i];
    return QuadraticProblem(d.asDiagonal().toDenseMatrix(), offset);
}

double QuadraticProblem::value(std::span<const double> x, const Batch*) const {
    check_dim(x, dim(), "quadratic");
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), m_.rows());
    return 0.5 * v.dot(m_ * v) + offset_;
}

double QuadraticProblem::value_and_gradient(std::span<const double> x, const Batch*,
                                            std::span<double> grad) const {
    check_dim(x, dim(), "quadratic");
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), m_.rows());
    Eigen::Map<Eigen::VectorXd> g(grad.data(), m_.rows());
    g.noalias() = m_ * v;
    return 0.5 * v.dot(g) + offset_;
}

// ---------------------------------------------------------------------------------------
// MLP

MlpModel::MlpModel(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw ConfigError("mlp: need at least an input and an output width");
    for (std::size_t w : widths_)
        if (w == 0) throw ConfigError("mlp: layer widths must be positive");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const std::size_t in = widths_[l], out = widths_[l + 1];
        layers_.push_back({in, out, offset, offset + in * out});
        offset += in * out + out;
    }
    num_params_ = offset;
}

ParamVector MlpModel::init_params(RngStream& rng) const {
    std::vector<double> p(num_params_);
    for (const auto& layer : layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        const std::size_t end = layer.bias_offset + layer.out;
        for (std::size_t i = layer.weight_offset; i < end; ++i) p[i] = rng.uniform(-bound, bound);
    }
    return ParamVector(std::move(p));
}

std::vector<double> MlpModel::forward(std::span<const double> params,
                                      std::span<const double> input) const {
    check_dim(params, num_params_, "mlp");
    check_dim(input, input_dim(), "mlp input");
    Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const auto in = static_cast<Eigen::Index>(layer.in), out = static_cast<Eigen::Index>(layer.out);
        const Eigen::Map<const RowMajorMatrix> w(params.data() + layer.weight_offset, out, in);
        const Eigen::Map<const Eigen::VectorXd> b(params.data() + layer.bias_offset, out);
        Eigen::VectorXd z = w * h + b;
        h = (l + 1 < layers_.size()) ? Eigen::VectorXd(z.array().tanh()) : z;
    }
    return {h.data(), h.data() + h.size()};
}

double MlpModel::mse(std::span<const double> params, const Eigen::MatrixXd& inputs,
                     const Eigen::MatrixXd& targets, std::span<const std::size_t> rows,
                     std::span<double> grad) const {
    check_dim(params, num_params_, "mlp");
    if (rows.empty()) throw ConfigError("mlp: batch must be nonempty");
    const auto batch = static_cast<Eigen::Index>(rows.size());

    // Activations are stored one sample per column.
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(layers_.size() + 1);
    Eigen::MatrixXd x0(static_cast<Eigen::Index>(input_dim()), batch);
    for (Eigen::Index j = 0; j < batch; ++j)
        x0.col(j) = inputs.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(j)])).transpose();
    acts.push_back(std::move(x0));

    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const auto in = static_cast<Eigen::Index>(layer.in), out = static_cast<Eigen::Index>(layer.out);
        const Eigen::Map<const RowMajorMatrix> w(params.data() + layer.weight_offset, out, in);
        const Eigen::Map<const Eigen::VectorXd> b(params.data() + layer.bias_offset, out);
        Eigen::MatrixXd z = w * acts.back();
        z.colwise() += b;
        if (l + 1 < layers_.size()) z = z.array().tanh().matrix();
        acts.push_back(std::move(z));
    }

    Eigen::MatrixXd err = acts.back();
    for (Eigen::Index j = 0; j < batch; ++j)
        err.col(j) -= targets.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(j)])).transpose();
    const double count = static_cast<double>(err.size());
    const double loss = err.squaredNorm() / count;
    if (grad.empty()) return loss;
    check_dim(grad, num_params_, "mlp gradient");

    // delta holds dL/dz for the current layer.
    Eigen::MatrixXd delta = (2.0 / count) * err;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        const auto in = static_cast<Eigen::Index>(layer.in), out = static_cast<Eigen::Index>(layer.out);
        Eigen::Map<RowMajorMatrix> gw(grad.data() + layer.weight_offset, out, in);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + layer.bias_offset, out);
        gw.noalias() = delta * acts[l].transpose();
        gb = delta.rowwise().sum();
        if (l == 0) break;
        const Eigen::Map<const RowMajorMatrix> w(params.data() + layer.weight_offset, out, in);
        Eigen::MatrixXd back = w.transpose() * delta;
        delta = back.array() * (1.0 - acts[l].array().square());
    }
    return loss;
}

// ---------------------------------------------------------------------------------------
// Regression

RegressionProblem::RegressionProblem(Eigen::MatrixXd inputs, Eigen::MatrixXd targets, MlpModel model)
    : inputs_(std::move(inputs)), targets_(std::move(targets)), model_(std::move(model)) {
    if (inputs_.rows() == 0) throw ConfigError("regression: dataset is empty");
    if (inputs_.rows() != targets_.rows())
        throw ConfigError("regression: inputs and targets have different row counts");
    if (static_cast<std::size_t>(inputs_.cols()) != model_.input_dim() ||
        static_cast<std::size_t>(targets_.cols()) != model_.output_dim())
        throw ConfigError("regression: dataset shape does not match the model");
    all_rows_.resize(static_cast<std::size_t>(inputs_.rows()));
    for (std::size_t i = 0; i < all_rows_.size(); ++i) all_rows_[i] = i;
}

std::span<const std::size_t> RegressionProblem::rows(const Batch* batch) const {
    if (!batch) return all_rows_;
    if (batch->indices().back() >= all_rows_.size())
        throw ConfigError("regression: batch index out of range");
    return batch->indices();
}

double RegressionProblem::value(std::span<const double> x, const Batch* batch) const {
    return model_.mse(x, inputs_, targets_, rows(batch), {});
}

double RegressionProblem::value_and_gradient(std::span<const double> x, const Batch* batch,
                                             std::span<double> grad) const {
    return model_.mse(x, inputs_, targets_, rows(batch), grad);
}

RegressionProblem make_sine_regression(std::size_t num_points, double noise_sd, std::uint64_t seed,
                                       std::vector<std::size_t> widths) {
    if (num_points < 2) throw ConfigError("sine regression: need at least two points");
    if (!(noise_sd >= 0.0)) throw ConfigError("sine regression: noise_sd must be nonnegative");
    MlpModel model(std::move(widths));
    if (model.input_dim() != 1 || model.output_dim() != 1)
        throw ConfigError("sine regression: model must map 1 input to 1 output");
    RngStream rng(seed);
    const auto m = static_cast<Eigen::Index>(num_points);
    Eigen::MatrixXd xs(m, 1), ys(m, 1);
    for (Eigen::Index i = 0; i < m; ++i) xs(i, 0) = rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double noise = noise_sd > 0.0 ? noise_sd * rng.normal() : 0.0;
        ys(i, 0) = std::sin(std::numbers::pi * xs(i, 0)) + noise;
    }
    return RegressionProblem(std::move(xs), std::move(ys), std::move(model));
}

void export_dataset_csv(const RegressionProblem& problem, const std::filesystem::path& path) {
    if (problem.inputs().cols() != 1 || problem.targets().cols() != 1)
        throw ConfigError("export_dataset_csv: only one-input, one-output datasets are supported");
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "x,y\n";
    for (Eigen::Index i = 0; i < problem.inputs().rows(); ++i)
        out << problem.inputs()(i, 0) << ',' << problem.targets()(i, 0) << '\n';
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> import_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "x,y")
        throw ConfigError(path.string() + ": expected header 'x,y'");
    std::vector<double> xs, ys;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError(path.string() + ": malformed row '" + line + "'");
        try {
            xs.push_back(std::stod(line.substr(0, comma)));
            ys.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw ConfigError(path.string() + ": malformed row '" + line + "'");
        }
    }
    const auto m = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd x(m, 1), y(m, 1);
    for (Eigen::Index i = 0; i < m; ++i) {
        x(i, 0) = xs[static_cast<std::size_t>(i)];
        y(i, 0) = ys[static_cast<std::size_t>(i)];
    }
    return {std::move(x), std::move(y)};
}

}  // namespace vav
