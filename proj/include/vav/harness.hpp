#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vav/core.hpp"
#include "vav/diagnostics.hpp"

namespace vav {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kMetricsSchemaVersion = 1;
inline constexpr const char* kMetricsHeader =
    "step,batch_loss,grad_norm,r_min,r_max,r_mean,rho_min,rho_max,omega_min,omega_max,lr_min,"
    "lr_max,dissipation_residual";
/// Environment variable naming the default output root; a config's output_path wins.
inline constexpr const char* kOutputDirEnv = "VAV_OUTPUT_DIR";

/// Metrics or summary file written by an incompatible version.
class SchemaError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// ---------------------------------------------------------------------------------------
// Configuration

struct RosenbrockConfig {
    double a = 1.0;
    double b = 100.0;
    double scale = 1.0;
    std::vector<double> x0{-2.0, -2.0};
};

struct QuadraticConfig {
    std::vector<std::vector<double>> matrix;  // used when non-empty
    std::vector<double> diag;                 // otherwise diag(...)
    double offset = 0.0;
    std::vector<double> x0;
};

struct SineRegressionConfig {
    std::size_t num_points = 1024;
    double noise_sd = 0.05;
    std::uint64_t data_seed = 7;
    std::vector<std::size_t> widths{1, 16, 16, 1};
    std::string dataset_csv;  // when set, rows are read from this file instead
};

using ProblemConfig = std::variant<RosenbrockConfig, QuadraticConfig, SineRegressionConfig>;

enum class OptimizerKind { sgd, sav, vav };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::vav;
    double eta = 0.01;
    double psi = 0.95;
    double c = 0.0;
    bool scheduler = false;
};

struct ExperimentConfig {
    int schema_version = kConfigSchemaVersion;
    std::string name = "run";
    ProblemConfig problem = RosenbrockConfig{};
    OptimizerConfig optimizer;
    long iterations = 1000;
    std::optional<std::size_t> batch_size;
    std::uint64_t seed = 0;
    long record_every = 1;
    std::string output_path;
    std::vector<std::string> checkers;
    std::optional<double> loss_threshold;  // defaults to 1e-3 for rosenbrock
    double lower_bound_tol = Tolerances{}.inequality;
};

/// Parses and validates. Throws ConfigError with the offending field named.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

std::string problem_type(const ProblemConfig& p);
std::string optimizer_name(OptimizerKind kind);

/// Builds the objective and its starting point. The rng is consumed for random
/// initializations (MLP weights).
struct ProblemInstance {
    std::shared_ptr<const Objective> objective;
    ParamVector x0;
};
ProblemInstance build_problem(const ProblemConfig& cfg, RngStream& rng);

// ---------------------------------------------------------------------------------------
// Runs

enum class RunStatus { converged, diverged, completed };
std::string to_string(RunStatus s);

struct RunSummary {
    std::string name;
    RunStatus status = RunStatus::completed;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> final_x;  // empty for large problems
    long steps_executed = 0;
    long last_finite_step = -1;   // step index of the last finite state
    double wall_time_s = 0.0;
    double violation_fraction = 0.0;
    std::optional<double> loss_threshold;
    long negative_r_steps = 0;
    std::string message;
    std::vector<RunAuditor::CheckTally> checks;
    bool invariant_failure = false;
    std::filesystem::path output_dir;
};

nlohmann::json to_json(const RunSummary& s);

/// CLI flag, then config output_path, then $VAV_OUTPUT_DIR/<name>, then runs/<name>.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg,
                                         const std::optional<std::filesystem::path>& cli_out);

/// Runs one experiment. When `out_dir` is set, writes metrics.csv, summary.json and,
/// if checkers are enabled, reports.csv there.
RunSummary run_experiment(const ExperimentConfig& cfg,
                          const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// One run per value of a numeric field given as a dotted path ("optimizer.eta",
/// "iterations", "problem.scale", ...). Run k uses seed + k and writes to
/// <out_root>/<name>_<param>=<value> when out_root is set.
std::vector<RunSummary> sweep(const ExperimentConfig& base, const std::string& parameter,
                              const std::vector<double>& values,
                              const std::optional<std::filesystem::path>& out_root = std::nullopt,
                              bool parallel = true);

// ---------------------------------------------------------------------------------------
// Comparison

struct ComparisonRow {
    std::string path;
    std::string name;
    std::string status;
    double final_loss = 0.0;
    std::optional<long> steps_to_threshold;
    double violation_fraction = 0.0;
    double delta_final_loss = 0.0;
    std::optional<long> delta_steps;
};

struct Comparison {
    std::string baseline;
    std::optional<double> threshold;
    std::vector<ComparisonRow> rows;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] std::string to_text() const;
};

/// Each path is a run directory (or its summary.json). The threshold comes from the
/// baseline summary unless given explicitly.
Comparison compare_runs(const std::vector<std::filesystem::path>& paths,
                        const std::filesystem::path& baseline,
                        std::optional<double> threshold = std::nullopt);

// ---------------------------------------------------------------------------------------
// Shipped benchmark configurations

/// The four rows of the Rosenbrock comparison: SGD 0.01, SGD 0.005, VAV 0.04, VAV 0.005,
/// 15000 iterations from (-2, -2) on the 0.1-scaled objective.
std::vector<ExperimentConfig> rosenbrock_benchmark_configs();
/// Deterministic ill-conditioned quadratic, VAV with a small positive offset.
ExperimentConfig quadratic_benchmark_config();
/// Sine regression through a 1-16-16-1 tanh MLP, batch 128, 2000 iterations.
ExperimentConfig sine_regression_config(OptimizerKind kind, double eta = 0.5);

// ---------------------------------------------------------------------------------------
// Self test

struct SelftestItem {
    std::string name;
    bool passed;
    std::string detail;
};

/// Randomized invariant sweeps plus audited benchmark runs; metrics go under out_dir.
std::vector<SelftestItem> run_selftest(const std::filesystem::path& out_dir);

}  // namespace vav
