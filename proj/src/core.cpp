#include "vav/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace vav {

namespace {

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

}  // namespace

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ConfigError("ParamVector: dimension must be positive");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]))
            throw ConfigError("ParamVector: entry " + std::to_string(i) + " is not finite");
    }
}

ParamVector::ParamVector(std::initializer_list<double> values)
    : ParamVector(std::vector<double>(values)) {}

ParamVector ParamVector::from_step(std::vector<double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw DivergenceError("parameter " + std::to_string(i) + " became non-finite");
    }
    return ParamVector(std::move(values));
}

Batch::Batch(std::vector<std::size_t> indices, std::size_t dataset_size)
    : indices_(std::move(indices)) {
    if (indices_.empty()) throw ConfigError("Batch: must contain at least one index");
    std::sort(indices_.begin(), indices_.end());
    if (indices_.back() >= dataset_size)
        throw ConfigError("Batch: index " + std::to_string(indices_.back()) +
                          " out of range for dataset of size " + std::to_string(dataset_size));
    if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
        throw ConfigError("Batch: duplicate indices");
}

Evaluation evaluate(const Objective& obj, const ParamVector& x, const Batch* batch) {
    std::vector<double> grad(obj.dim());
    const double loss = obj.value_and_gradient(x.values(), batch, grad);
    if (!std::isfinite(loss)) throw DivergenceError("loss is not finite");
    if (!all_finite(grad)) throw DivergenceError("gradient is not finite");
    return {loss, ParamVector(std::move(grad))};
}

double evaluate_value(const Objective& obj, const ParamVector& x, const Batch* batch) {
    const double loss = obj.value(x.values(), batch);
    if (!std::isfinite(loss)) throw DivergenceError("loss is not finite");
    return loss;
}

double RngStream::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) throw ConfigError("RngStream::below: empty range");
    // Largest multiple of n representable; draws at or above it are rejected.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return v % n;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

Batch sample_batch(RngStream& rng, std::size_t dataset_size, std::size_t batch_size) {
    if (batch_size < 1 || batch_size > dataset_size)
        throw ConfigError("sample_batch: batch size " + std::to_string(batch_size) +
                          " outside [1, " + std::to_string(dataset_size) + "]");
    // Partial Fisher-Yates over the index range.
    std::vector<std::size_t> pool(dataset_size);
    for (std::size_t i = 0; i < dataset_size; ++i) pool[i] = i;
    for (std::size_t i = 0; i < batch_size; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(dataset_size - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(batch_size);
    return Batch(std::move(pool), dataset_size);
}

ParamVector finite_difference_gradient(const Objective& obj, const ParamVector& x,
                                       const Batch* batch, double h) {
    if (!(h > 0.0)) throw ConfigError("finite_difference_gradient: step must be positive");
    std::vector<double> probe = x.vec();
    std::vector<double> grad(x.dim());
    for (std::size_t i = 0; i < x.dim(); ++i) {
        const double xi = probe[i];
        probe[i] = xi + h;
        const double up = obj.value(probe, batch);
        probe[i] = xi - h;
        const double down = obj.value(probe, batch);
        probe[i] = xi;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw OracleError("finite_difference_gradient: non-finite probe at coordinate " +
                                  std::to_string(i),
                              i);
        grad[i] = (up - down) / (2.0 * h);
    }
    return ParamVector(std::move(grad));
}

GradientCheck compare_gradients(std::span<const double> analytic, std::span<const double> numeric,
                                double rel_tol, double abs_floor) {
    if (analytic.size() != numeric.size())
        throw ConfigError("compare_gradients: size mismatch");
    GradientCheck out{true, 0.0, 0};
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double diff = std::abs(analytic[i] - numeric[i]);
        if (diff <= abs_floor) continue;
        const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
        const double rel = diff / scale;
        if (rel > out.max_error) {
            out.max_error = rel;
            out.worst_coordinate = i;
        }
        if (rel > rel_tol) out.passed = false;
    }
    return out;
}

}  // namespace vav
