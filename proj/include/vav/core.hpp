#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

#include "vav/errors.hpp"

namespace vav {

/// Flat parameter state. Every entry is finite on construction; the dimension never
/// changes after that.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::vector<double> values);
    ParamVector(std::initializer_list<double> values);

    /// Builds from a result that may contain non-finite entries; throws DivergenceError
    /// instead of ConfigError.
    static ParamVector from_step(std::vector<double> values);

    [[nodiscard]] std::size_t dim() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
    [[nodiscard]] const std::vector<double>& vec() const noexcept { return values_; }

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    std::vector<double> values_;
};

/// Distinct, sorted row indices into a dataset.
class Batch {
public:
    Batch(std::vector<std::size_t> indices, std::size_t dataset_size);

    [[nodiscard]] std::size_t size() const noexcept { return indices_.size(); }
    [[nodiscard]] std::span<const std::size_t> indices() const noexcept { return indices_; }

    friend bool operator==(const Batch&, const Batch&) = default;

private:
    std::vector<std::size_t> indices_;
};

/// Value and gradient oracle. Implementations are immutable after construction and may
/// be shared across concurrent runs. A null batch means the full objective.
class Objective {
public:
    virtual ~Objective() = default;

    [[nodiscard]] virtual std::size_t dim() const = 0;
    /// Zero for deterministic objectives that have no notion of rows.
    [[nodiscard]] virtual std::size_t dataset_size() const { return 0; }

    [[nodiscard]] virtual double value(std::span<const double> x, const Batch* batch) const = 0;
    /// Writes the gradient into `grad` (size dim()) and returns the value on the same batch.
    virtual double value_and_gradient(std::span<const double> x, const Batch* batch,
                                      std::span<double> grad) const = 0;
};

struct Evaluation {
    double loss;
    ParamVector grad;
};

/// Paired value/gradient query. Non-finite loss or gradient throws DivergenceError.
Evaluation evaluate(const Objective& obj, const ParamVector& x, const Batch* batch = nullptr);

/// Value-only query with the same divergence contract.
double evaluate_value(const Objective& obj, const ParamVector& x, const Batch* batch = nullptr);

/// Seeded mt19937_64 stream. The engine output is fixed by the standard, and the
/// integer/real/normal transforms below are implemented here rather than through
/// <random> distributions, so a seed yields the same sequence on every platform.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n), rejection sampled (no modulo bias).
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via Box-Muller; the second variate is cached.
    double normal();

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Uniform sample of `batch_size` distinct rows. Consecutive calls are independent draws.
Batch sample_batch(RngStream& rng, std::size_t dataset_size, std::size_t batch_size);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate, all on
/// the same batch.
ParamVector finite_difference_gradient(const Objective& obj, const ParamVector& x,
                                       const Batch* batch, double h);

struct GradientCheck {
    bool passed;
    double max_error;  // worst relative error among entries above the absolute floor
    std::size_t worst_coordinate;
};

/// Elementwise comparison: |a - n| <= rel * max(|a|, |n|) or |a - n| <= abs_floor.
GradientCheck compare_gradients(std::span<const double> analytic, std::span<const double> numeric,
                                double rel_tol, double abs_floor);

}  // namespace vav
