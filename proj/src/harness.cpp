#include "vav/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "vav/format.hpp"
#include "vav/optim.hpp"
#include "vav/problems.hpp"

namespace vav {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Largest problem whose final point is written into the summary.
constexpr std::size_t kMaxReportedDim = 16;

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
    throw ConfigError("config field '" + field + "': " + what);
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!allowed.contains(key)) field_error(where + key, "unknown field");
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        field_error(where + key, e.what());
    }
}

RosenbrockConfig parse_rosenbrock(const json& j) {
    reject_unknown(j, {"type", "a", "b", "scale", "x0"}, "problem.");
    RosenbrockConfig c;
    c.a = get_or(j, "a", c.a, "problem.");
    c.b = get_or(j, "b", c.b, "problem.");
    c.scale = get_or(j, "scale", c.scale, "problem.");
    c.x0 = get_or(j, "x0", c.x0, "problem.");
    if (c.x0.size() != 2) field_error("problem.x0", "rosenbrock needs a 2-vector");
    if (!(c.scale > 0.0)) field_error("problem.scale", "must be positive");
    return c;
}

QuadraticConfig parse_quadratic(const json& j) {
    reject_unknown(j, {"type", "matrix", "diag", "offset", "x0"}, "problem.");
    QuadraticConfig c;
    c.matrix = get_or(j, "matrix", c.matrix, "problem.");
    c.diag = get_or(j, "diag", c.diag, "problem.");
    c.offset = get_or(j, "offset", c.offset, "problem.");
    c.x0 = get_or(j, "x0", c.x0, "problem.");
    if (c.matrix.empty() == c.diag.empty())
        field_error("problem", "quadratic needs exactly one of 'matrix' or 'diag'");
    const std::size_t n = c.matrix.empty() ? c.diag.size() : c.matrix.size();
    if (c.x0.size() != n) field_error("problem.x0", "length must match the matrix size");
    return c;
}

SineRegressionConfig parse_sine(const json& j) {
    reject_unknown(j, {"type", "num_points", "noise_sd", "data_seed", "widths", "dataset_csv"},
                   "problem.");
    SineRegressionConfig c;
    c.num_points = get_or(j, "num_points", c.num_points, "problem.");
    c.noise_sd = get_or(j, "noise_sd", c.noise_sd, "problem.");
    c.data_seed = get_or(j, "data_seed", c.data_seed, "problem.");
    c.widths = get_or(j, "widths", c.widths, "problem.");
    c.dataset_csv = get_or(j, "dataset_csv", c.dataset_csv, "problem.");
    if (c.num_points < 2) field_error("problem.num_points", "must be at least 2");
    return c;
}

OptimizerKind parse_kind(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "sav") return OptimizerKind::sav;
    if (s == "vav") return OptimizerKind::vav;
    field_error("optimizer.type", "expected one of sgd, sav, vav; got '" + s + "'");
}

json problem_json(const ProblemConfig& p) {
    return std::visit(
        [](const auto& c) -> json {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, RosenbrockConfig>) {
                return {{"type", "rosenbrock"}, {"a", c.a}, {"b", c.b}, {"scale", c.scale}, {"x0", c.x0}};
            } else if constexpr (std::is_same_v<T, QuadraticConfig>) {
                json j{{"type", "quadratic"}, {"offset", c.offset}, {"x0", c.x0}};
                if (!c.matrix.empty()) j["matrix"] = c.matrix;
                else j["diag"] = c.diag;
                return j;
            } else {
                json j{{"type", "sine_regression"}, {"num_points", c.num_points},
                       {"noise_sd", c.noise_sd}, {"data_seed", c.data_seed}, {"widths", c.widths}};
                if (!c.dataset_csv.empty()) j["dataset_csv"] = c.dataset_csv;
                return j;
            }
        },
        p);
}

void write_metrics_row(std::ostream& out, const StepRecord& r) {
    out << r.step;
    for (double v : {r.batch_loss, r.grad_norm, r.r_min, r.r_max, r.r_mean, r.rho_min, r.rho_max,
                     r.omega_min, r.omega_max, r.lr_min, r.lr_max, r.dissipation_residual})
        out << ',' << format_double(v);
    out << '\n';
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

void write_reports(const fs::path& path, const std::vector<InvariantReport>& reports) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "name,step,coordinate,observed,bound,passed,inputs\n";
    for (const auto& r : reports)
        out << r.name << ',' << r.step << ',' << r.coordinate << ',' << format_double(r.observed)
            << ',' << format_double(r.bound) << ',' << (r.passed ? 1 : 0) << ','
            << csv_quote(r.inputs) << '\n';
}

json* locate(json& root, const std::string& dotted) {
    json* node = &root;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!node->is_object() || !node->contains(part)) return nullptr;
        node = &(*node)[part];
    }
    return node;
}

}  // namespace

// ---------------------------------------------------------------------------------------
// Config

std::string problem_type(const ProblemConfig& p) {
    return problem_json(p).at("type").get<std::string>();
}

std::string optimizer_name(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::sav: return "sav";
        case OptimizerKind::vav: return "vav";
    }
    return "?";
}

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"schema_version", "name", "problem", "optimizer", "iterations", "batch_size",
                    "seed", "record_every", "output_path", "checkers", "loss_threshold",
                    "lower_bound_tol"},
                   "");
    ExperimentConfig cfg;
    cfg.schema_version = get_or(j, "schema_version", -1, "");
    if (cfg.schema_version != kConfigSchemaVersion)
        throw SchemaError("config schema_version " + std::to_string(cfg.schema_version) +
                          " is not supported (expected " + std::to_string(kConfigSchemaVersion) + ")");
    cfg.name = get_or(j, "name", cfg.name, "");

    if (!j.contains("problem") || !j.at("problem").is_object()) field_error("problem", "missing");
    const json& pj = j.at("problem");
    const std::string type = get_or(pj, "type", std::string{}, "problem.");
    if (type == "rosenbrock") cfg.problem = parse_rosenbrock(pj);
    else if (type == "quadratic") cfg.problem = parse_quadratic(pj);
    else if (type == "sine_regression") cfg.problem = parse_sine(pj);
    else field_error("problem.type", "expected rosenbrock, quadratic or sine_regression; got '" + type + "'");

    if (!j.contains("optimizer") || !j.at("optimizer").is_object()) field_error("optimizer", "missing");
    const json& oj = j.at("optimizer");
    reject_unknown(oj, {"type", "eta", "psi", "c", "scheduler"}, "optimizer.");
    cfg.optimizer.kind = parse_kind(get_or(oj, "type", std::string{}, "optimizer."));
    cfg.optimizer.eta = get_or(oj, "eta", cfg.optimizer.eta, "optimizer.");
    cfg.optimizer.psi = get_or(oj, "psi", cfg.optimizer.psi, "optimizer.");
    cfg.optimizer.c = get_or(oj, "c", cfg.optimizer.c, "optimizer.");
    cfg.optimizer.scheduler = get_or(oj, "scheduler", cfg.optimizer.scheduler, "optimizer.");
    if (!(cfg.optimizer.eta > 0.0)) field_error("optimizer.eta", "must be positive");
    if (!(cfg.optimizer.c >= 0.0)) field_error("optimizer.c", "must be nonnegative");
    if (cfg.optimizer.kind == OptimizerKind::vav &&
        !(cfg.optimizer.psi > 0.0 && cfg.optimizer.psi < 1.0))
        field_error("optimizer.psi", "must lie in (0, 1)");
    if (cfg.optimizer.scheduler && cfg.optimizer.kind != OptimizerKind::vav)
        field_error("optimizer.scheduler", "only the vav optimizer has a scheduler");

    cfg.iterations = get_or(j, "iterations", cfg.iterations, "");
    if (cfg.iterations < 0) field_error("iterations", "must be nonnegative");
    if (j.contains("batch_size") && !j.at("batch_size").is_null()) {
        const long b = get_or(j, "batch_size", 0L, "");
        if (b < 1) field_error("batch_size", "must be positive");
        cfg.batch_size = static_cast<std::size_t>(b);
    }
    cfg.seed = get_or(j, "seed", cfg.seed, "");
    cfg.record_every = get_or(j, "record_every", cfg.record_every, "");
    if (cfg.record_every < 1) field_error("record_every", "must be at least 1");
    cfg.output_path = get_or(j, "output_path", cfg.output_path, "");
    cfg.checkers = get_or(j, "checkers", cfg.checkers, "");
    RunAuditor::validate_names(cfg.checkers);
    if (!cfg.checkers.empty() && cfg.optimizer.kind == OptimizerKind::sgd)
        field_error("checkers", "sgd has no auxiliary variable to check");
    if (j.contains("loss_threshold") && !j.at("loss_threshold").is_null())
        cfg.loss_threshold = get_or(j, "loss_threshold", 0.0, "");
    else if (std::holds_alternative<RosenbrockConfig>(cfg.problem))
        cfg.loss_threshold = 1e-3;
    cfg.lower_bound_tol = get_or(j, "lower_bound_tol", cfg.lower_bound_tol, "");

    if (cfg.batch_size && std::holds_alternative<SineRegressionConfig>(cfg.problem)) {
        const auto& sc = std::get<SineRegressionConfig>(cfg.problem);
        if (sc.dataset_csv.empty() && *cfg.batch_size > sc.num_points)
            field_error("batch_size", "exceeds the dataset size");
    } else if (cfg.batch_size) {
        field_error("batch_size", "only sine_regression has a dataset to batch");
    }
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& cfg) {
    json j{{"schema_version", cfg.schema_version},
           {"name", cfg.name},
           {"problem", problem_json(cfg.problem)},
           {"optimizer",
            {{"type", optimizer_name(cfg.optimizer.kind)},
             {"eta", cfg.optimizer.eta},
             {"psi", cfg.optimizer.psi},
             {"c", cfg.optimizer.c},
             {"scheduler", cfg.optimizer.scheduler}}},
           {"iterations", cfg.iterations},
           {"batch_size", nullptr},
           {"seed", cfg.seed},
           {"record_every", cfg.record_every},
           {"output_path", cfg.output_path},
           {"checkers", cfg.checkers},
           {"loss_threshold", nullptr},
           {"lower_bound_tol", cfg.lower_bound_tol}};
    if (cfg.batch_size) j["batch_size"] = *cfg.batch_size;
    if (cfg.loss_threshold) j["loss_threshold"] = *cfg.loss_threshold;
    return j;
}

ProblemInstance build_problem(const ProblemConfig& cfg, RngStream& rng) {
    return std::visit(
        [&rng](const auto& c) -> ProblemInstance {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, RosenbrockConfig>) {
                return {std::make_shared<RosenbrockProblem>(c.a, c.b, c.scale), ParamVector(c.x0)};
            } else if constexpr (std::is_same_v<T, QuadraticConfig>) {
                if (!c.diag.empty())
                    return {std::make_shared<QuadraticProblem>(QuadraticProblem::diagonal(c.diag, c.offset)),
                            ParamVector(c.x0)};
                const auto n = static_cast<Eigen::Index>(c.matrix.size());
                Eigen::MatrixXd m(n, n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    const auto& row = c.matrix[static_cast<std::size_t>(i)];
                    if (row.size() != c.matrix.size()) field_error("problem.matrix", "must be square");
                    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = row[static_cast<std::size_t>(k)];
                }
                return {std::make_shared<QuadraticProblem>(std::move(m), c.offset), ParamVector(c.x0)};
            } else {
                std::shared_ptr<RegressionProblem> problem;
                if (c.dataset_csv.empty()) {
                    problem = std::make_shared<RegressionProblem>(
                        make_sine_regression(c.num_points, c.noise_sd, c.data_seed, c.widths));
                } else {
                    auto [x, y] = import_dataset_csv(c.dataset_csv);
                    problem = std::make_shared<RegressionProblem>(std::move(x), std::move(y), MlpModel(c.widths));
                }
                ParamVector x0 = problem->model().init_params(rng);
                return {std::move(problem), std::move(x0)};
            }
        },
        cfg);
}

// ---------------------------------------------------------------------------------------
// Runs

std::string to_string(RunStatus s) {
    switch (s) {
        case RunStatus::converged: return "converged";
        case RunStatus::diverged: return "diverged";
        case RunStatus::completed: return "completed";
    }
    return "?";
}

json to_json(const RunSummary& s) {
    json checks = json::array();
    for (const auto& t : s.checks)
        checks.push_back({{"name", t.name}, {"checked", t.checked}, {"failed", t.failed}, {"worst", t.worst}});
    json j{{"schema_version", kMetricsSchemaVersion},
           {"name", s.name},
           {"status", to_string(s.status)},
           {"initial_loss", s.initial_loss},
           {"final_loss", s.final_loss},
           {"final_x", s.final_x},
           {"steps_executed", s.steps_executed},
           {"last_finite_step", s.last_finite_step},
           {"wall_time_s", s.wall_time_s},
           {"violation_fraction", s.violation_fraction},
           {"loss_threshold", nullptr},
           {"negative_r_steps", s.negative_r_steps},
           {"message", s.message},
           {"checks", checks},
           {"invariant_failure", s.invariant_failure}};
    if (s.loss_threshold) j["loss_threshold"] = *s.loss_threshold;
    return j;
}

fs::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<fs::path>& cli_out) {
    if (cli_out) return *cli_out;
    if (!cfg.output_path.empty()) return cfg.output_path;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return fs::path(env) / cfg.name;
    return fs::path("runs") / cfg.name;
}

RunSummary run_experiment(const ExperimentConfig& cfg, const std::optional<fs::path>& out_dir) {
    const auto started = std::chrono::steady_clock::now();
    RngStream rng(cfg.seed);
    ProblemInstance inst = build_problem(cfg.problem, rng);
    const Objective& obj = *inst.objective;

    const bool stochastic = cfg.batch_size.has_value();
    if (stochastic && (obj.dataset_size() == 0 || *cfg.batch_size > obj.dataset_size()))
        throw ConfigError("batch_size " + std::to_string(*cfg.batch_size) +
                          " is invalid for a dataset of " + std::to_string(obj.dataset_size()) + " rows");

    RunSummary summary;
    summary.name = cfg.name;
    summary.loss_threshold = cfg.loss_threshold;
    try {
        summary.initial_loss = evaluate_value(obj, inst.x0);
    } catch (const DivergenceError&) {
        throw ConfigError("the starting point has a non-finite loss");
    }

    std::ofstream metrics;
    if (out_dir) {
        fs::create_directories(*out_dir);
        metrics.open(*out_dir / "metrics.csv");
        if (!metrics) throw ConfigError("cannot write " + (*out_dir / "metrics.csv").string());
        metrics << kMetricsHeader << '\n';
    }

    std::optional<RunAuditor> auditor;
    if (!cfg.checkers.empty())
        auditor.emplace(cfg.checkers, cfg.optimizer.c, Tolerances{}, cfg.lower_bound_tol);

    auto draw = [&]() -> std::optional<Batch> {
        if (!stochastic) return std::nullopt;
        return sample_batch(rng, obj.dataset_size(), *cfg.batch_size);
    };
    auto ptr = [](const std::optional<Batch>& b) { return b ? &*b : nullptr; };

    auto emit = [&](const StepRecord& rec) {
        if (metrics.is_open() && rec.step % cfg.record_every == 0) write_metrics_row(metrics, rec);
        if (rec.r_min < 0.0) ++summary.negative_r_steps;
    };

    ParamVector x = inst.x0;
    const OptimizerConfig& oc = cfg.optimizer;
    StepDetail detail;
    std::vector<OmegaSolve> solves;
    try {
        std::optional<Batch> batch = draw();
        switch (oc.kind) {
            case OptimizerKind::sgd: {
                for (long t = 0; t < cfg.iterations; ++t) {
                    if (t > 0) batch = draw();
                    emit(sgd_full_step(x, obj, ptr(batch), oc.eta, t));
                    summary.steps_executed = t + 1;
                }
                break;
            }
            case OptimizerKind::sav: {
                SavState state = init_sav_state(obj, x, oc.eta, oc.c, ptr(batch));
                for (long t = 0; t < cfg.iterations; ++t) {
                    if (t > 0) batch = draw();
                    const StepRecord rec = sav_step(state, obj, ptr(batch), auditor ? &detail : nullptr);
                    if (auditor) auditor->observe(detail, {}, rec);
                    emit(rec);
                    x = state.x;
                    summary.steps_executed = t + 1;
                }
                break;
            }
            case OptimizerKind::vav: {
                const VavOptions options{oc.eta, oc.psi, oc.c, oc.scheduler};
                VavState state = init_vav_state(obj, x, options, ptr(batch));
                const bool want_detail = auditor && auditor->wants_detail();
                const bool want_omega = auditor && auditor->wants_omega();
                for (long t = 0; t < cfg.iterations; ++t) {
                    std::optional<Batch> next = draw();
                    solves.clear();
                    const StepRecord rec = vav_step(state, obj, ptr(batch), ptr(next),
                                                    want_detail ? &detail : nullptr,
                                                    want_omega ? &solves : nullptr);
                    if (auditor) auditor->observe(detail, solves, rec);
                    emit(rec);
                    x = state.x;
                    batch = std::move(next);
                    summary.steps_executed = t + 1;
                }
                break;
            }
        }
        summary.final_loss = evaluate_value(obj, x);
        summary.status = cfg.loss_threshold && summary.final_loss < *cfg.loss_threshold
                             ? RunStatus::converged
                             : RunStatus::completed;
        summary.last_finite_step = summary.steps_executed - 1;
    } catch (const DivergenceError& e) {
        summary.status = RunStatus::diverged;
        summary.final_loss = std::numeric_limits<double>::quiet_NaN();
        summary.last_finite_step = summary.steps_executed - 1;
        summary.message = e.what();
    } catch (const DomainError& e) {
        summary.status = RunStatus::diverged;
        summary.final_loss = std::numeric_limits<double>::quiet_NaN();
        summary.last_finite_step = summary.steps_executed - 1;
        summary.message = e.what();
    }

    if (x.dim() <= kMaxReportedDim) summary.final_x = x.vec();
    if (summary.negative_r_steps > 0) {
        if (!summary.message.empty()) summary.message += "; ";
        summary.message += "r became negative on " + std::to_string(summary.negative_r_steps) +
                           " steps; increase the offset c";
    }
    if (auditor) {
        summary.checks = auditor->tallies();
        summary.violation_fraction = auditor->lower_bound_violation_fraction();
        summary.invariant_failure = auditor->hard_failure();
    }
    summary.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (out_dir) {
        metrics.close();
        summary.output_dir = *out_dir;
        json sj = to_json(summary);
        sj["config"] = to_json(cfg);
        std::ofstream(*out_dir / "summary.json") << std::setw(2) << sj << '\n';
        if (auditor) write_reports(*out_dir / "reports.csv", auditor->failures());
    }
    return summary;
}

std::vector<RunSummary> sweep(const ExperimentConfig& base, const std::string& parameter,
                              const std::vector<double>& values,
                              const std::optional<fs::path>& out_root, bool parallel) {
    std::vector<ExperimentConfig> configs;
    for (std::size_t k = 0; k < values.size(); ++k) {
        json j = to_json(base);
        json* field = locate(j, parameter);
        if (!field || !(field->is_number() || (field->is_null() && parameter == "batch_size")))
            throw ConfigError("sweep: '" + parameter + "' does not name a numeric config field");
        const double v = values[k];
        if (field->is_number_integer() || field->is_null()) {
            if (v != std::floor(v)) throw ConfigError("sweep: '" + parameter + "' takes integer values");
            *field = static_cast<long long>(v);
        } else {
            *field = v;
        }
        j["seed"] = base.seed + k;
        j["name"] = base.name + "_" + parameter + "=" + format_double(v);
        j["output_path"] = "";
        configs.push_back(parse_config(j));
    }

    auto run_one = [&](std::size_t k) {
        std::optional<fs::path> dir;
        if (out_root) dir = *out_root / configs[k].name;
        return run_experiment(configs[k], dir);
    };
    std::vector<RunSummary> out;
    if (!parallel) {
        for (std::size_t k = 0; k < configs.size(); ++k) out.push_back(run_one(k));
        return out;
    }
    std::vector<std::future<RunSummary>> pending;
    for (std::size_t k = 0; k < configs.size(); ++k)
        pending.push_back(std::async(std::launch::async, run_one, k));
    for (auto& f : pending) out.push_back(f.get());
    return out;
}

// ---------------------------------------------------------------------------------------
// Comparison

namespace {

struct LoadedRun {
    fs::path dir;
    json summary;
    std::vector<std::pair<long, double>> losses;  // (step, batch_loss)
};

LoadedRun load_run(const fs::path& path) {
    LoadedRun run;
    run.dir = fs::is_directory(path) ? path : path.parent_path();
    const fs::path summary_path = fs::is_directory(path) ? path / "summary.json" : path;
    if (!fs::exists(summary_path)) throw ConfigError("no such run: " + summary_path.string());
    std::ifstream sin(summary_path);
    try {
        sin >> run.summary;
    } catch (const json::parse_error& e) {
        throw SchemaError(summary_path.string() + ": " + e.what());
    }
    const int version = run.summary.value("schema_version", -1);
    if (version != kMetricsSchemaVersion)
        throw SchemaError(summary_path.string() + ": summary schema_version " + std::to_string(version) +
                          ", expected " + std::to_string(kMetricsSchemaVersion));

    const fs::path metrics_path = run.dir / "metrics.csv";
    std::ifstream min(metrics_path);
    if (!min) throw ConfigError("no such file: " + metrics_path.string());
    std::string line;
    if (!std::getline(min, line) || line != kMetricsHeader)
        throw SchemaError(metrics_path.string() + ": header does not match metrics schema v" +
                          std::to_string(kMetricsSchemaVersion));
    while (std::getline(min, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string step, loss;
        std::getline(ss, step, ',');
        std::getline(ss, loss, ',');
        try {
            run.losses.emplace_back(std::stol(step), std::stod(loss));
        } catch (const std::exception&) {
            throw SchemaError(metrics_path.string() + ": malformed row '" + line + "'");
        }
    }
    return run;
}

double json_number(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.at(key).get<double>();
}

std::optional<long> steps_to(const LoadedRun& run, std::optional<double> threshold) {
    if (!threshold) return std::nullopt;
    for (const auto& [step, loss] : run.losses)
        if (loss < *threshold) return step;
    return std::nullopt;
}

}  // namespace

Comparison compare_runs(const std::vector<fs::path>& paths, const fs::path& baseline,
                        std::optional<double> threshold) {
    const LoadedRun base = load_run(baseline);
    if (!threshold && base.summary.contains("loss_threshold") && !base.summary.at("loss_threshold").is_null())
        threshold = base.summary.at("loss_threshold").get<double>();

    Comparison cmp;
    cmp.baseline = baseline.string();
    cmp.threshold = threshold;
    const double base_loss = json_number(base.summary, "final_loss");
    const std::optional<long> base_steps = steps_to(base, threshold);
    for (const auto& p : paths) {
        const LoadedRun run = load_run(p);
        ComparisonRow row;
        row.path = p.string();
        row.name = run.summary.value("name", std::string{});
        row.status = run.summary.value("status", std::string{});
        row.final_loss = json_number(run.summary, "final_loss");
        row.violation_fraction = json_number(run.summary, "violation_fraction");
        row.steps_to_threshold = steps_to(run, threshold);
        row.delta_final_loss = row.final_loss - base_loss;
        if (row.steps_to_threshold && base_steps) row.delta_steps = *row.steps_to_threshold - *base_steps;
        cmp.rows.push_back(std::move(row));
    }
    return cmp;
}

json Comparison::to_json() const {
    json rows_json = json::array();
    auto opt = [](const std::optional<long>& v) { return v ? json(*v) : json(nullptr); };
    for (const auto& r : rows)
        rows_json.push_back({{"path", r.path},
                             {"name", r.name},
                             {"status", r.status},
                             {"final_loss", r.final_loss},
                             {"steps_to_threshold", opt(r.steps_to_threshold)},
                             {"violation_fraction", r.violation_fraction},
                             {"delta_final_loss", r.delta_final_loss},
                             {"delta_steps", opt(r.delta_steps)}});
    return {{"schema_version", kMetricsSchemaVersion},
            {"baseline", baseline},
            {"threshold", threshold ? json(*threshold) : json(nullptr)},
            {"rows", rows_json}};
}

std::string Comparison::to_text() const {
    std::ostringstream out;
    auto opt = [](const std::optional<long>& v) { return v ? std::to_string(*v) : std::string("-"); };
    out << "baseline: " << baseline;
    if (threshold) out << "  (threshold " << format_double(*threshold) << ')';
    out << '\n';
    out << std::left << std::setw(32) << "run" << std::setw(11) << "status" << std::setw(16) << "final_loss"
        << std::setw(16) << "delta_loss" << std::setw(10) << "steps<thr" << std::setw(10) << "delta"
        << "violations\n";
    for (const auto& r : rows) {
        out << std::left << std::setw(32) << (r.name.empty() ? r.path : r.name) << std::setw(11) << r.status
            << std::setw(16) << format_double(r.final_loss) << std::setw(16)
            << format_double(r.delta_final_loss) << std::setw(10) << opt(r.steps_to_threshold)
            << std::setw(10) << opt(r.delta_steps) << format_double(r.violation_fraction) << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------------------
// Shipped configurations

std::vector<ExperimentConfig> rosenbrock_benchmark_configs() {
    struct Row {
        const char* name;
        OptimizerKind kind;
        double eta;
    };
    const Row rows[] = {{"rosenbrock_sgd_0.01", OptimizerKind::sgd, 0.01},
                        {"rosenbrock_sgd_0.005", OptimizerKind::sgd, 0.005},
                        {"rosenbrock_vav_0.04", OptimizerKind::vav, 0.04},
                        {"rosenbrock_vav_0.005", OptimizerKind::vav, 0.005}};
    std::vector<ExperimentConfig> out;
    for (const auto& row : rows) {
        ExperimentConfig cfg;
        cfg.name = row.name;
        cfg.problem = RosenbrockConfig{1.0, 100.0, 0.1, {-2.0, -2.0}};
        cfg.optimizer = {row.kind, row.eta, 0.95, 0.0, false};
        cfg.iterations = 15000;
        cfg.loss_threshold = 1e-3;
        if (row.kind == OptimizerKind::vav)
            cfg.checkers = {"dissipation", "relaxation", "monotonicity", "omega"};
        out.push_back(std::move(cfg));
    }
    return out;
}

ExperimentConfig quadratic_benchmark_config() {
    ExperimentConfig cfg;
    cfg.name = "quadratic_vav";
    cfg.problem = QuadraticConfig{{}, {1.0, 10.0, 100.0}, 0.0, {1.0, -2.0, 0.5}};
    cfg.optimizer = {OptimizerKind::vav, 0.05, 0.95, 0.01, false};
    cfg.iterations = 2000;
    cfg.checkers = {"dissipation", "relaxation", "monotonicity", "omega", "lower_bound"};
    return cfg;
}

ExperimentConfig sine_regression_config(OptimizerKind kind, double eta) {
    ExperimentConfig cfg;
    cfg.name = "sine_" + optimizer_name(kind) + "_" + format_double(eta);
    cfg.problem = SineRegressionConfig{};
    cfg.optimizer = {kind, eta, 0.95, 0.0, false};
    cfg.iterations = 2000;
    cfg.batch_size = 128;
    cfg.seed = 1;
    cfg.record_every = 10;
    if (kind == OptimizerKind::vav) cfg.checkers = {"dissipation", "lower_bound"};
    return cfg;
}

// ---------------------------------------------------------------------------------------
// Self test

std::vector<SelftestItem> run_selftest(const fs::path& out_dir) {
    std::vector<SelftestItem> items;
    RngStream rng(20240601);

    {  // omega audit over random instances
        std::vector<OmegaSolve> solves;
        for (int k = 0; k < 10000; ++k) {
            const double f_next = std::exp(rng.uniform(std::log(1e-3), std::log(1e3)));
            const OmegaInputs in{f_next, rng.uniform(0.0, 2.0 * std::sqrt(f_next)),
                                 rng.normal() * std::exp(rng.uniform(-6.0, 1.0)), rng.uniform(0.05, 0.99),
                                 std::exp(rng.uniform(std::log(1e-4), 0.0))};
            solves.push_back({in, solve_omega(in)});
        }
        const auto reports = audit_omega(solves);
        const std::size_t failed = count_failures(reports);
        items.push_back({"omega_audit_random", failed == 0,
                         std::to_string(reports.size()) + " checks, " + std::to_string(failed) + " failed"});
    }

    {  // unrelaxed dissipation identity over random steps
        std::size_t failed = 0;
        double worst = 0.0;
        for (int k = 0; k < 10000; ++k) {
            const std::size_t n = 1 + static_cast<std::size_t>(rng.below(8));
            std::vector<double> r(n), g(n), x(n);
            const double f = std::exp(rng.uniform(std::log(1e-4), std::log(1e4)));
            const double c = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 1.0);
            const double eta = std::exp(rng.uniform(std::log(1e-4), std::log(10.0)));
            for (std::size_t i = 0; i < n; ++i) {
                r[i] = rng.uniform(0.0, 2.0 * std::sqrt(f + c));
                g[i] = rng.normal() * std::exp(rng.uniform(-3.0, 3.0));
                x[i] = rng.normal();
            }
            const auto rt = vav_tilde_r(r, g, f, c, eta);
            const ParamVector x0(x);
            const ParamVector x1 = vav_position_update(x0, g, rt, f, c, eta);
            for (std::size_t i = 0; i < n; ++i) {
                const double res = dissipation_residual(r[i], rt[i], x1[i] - x0[i], eta);
                worst = std::max(worst, res);
                if (res > Tolerances{}.identity) ++failed;
            }
        }
        items.push_back({"dissipation_random", failed == 0, "worst residual " + format_double(worst)});
    }

    {  // gradient oracle on each problem family
        const RosenbrockProblem rosen;
        const QuadraticProblem quad = QuadraticProblem::diagonal(std::vector<double>{1.0, 10.0, 100.0});
        const RegressionProblem reg = make_sine_regression(256, 0.05, 7);
        struct Case {
            const char* name;
            const Objective* obj;
            double h;
        };
        const Case cases[] = {{"rosenbrock", &rosen, 1e-6}, {"quadratic", &quad, 1e-5},
                              {"sine_regression", &reg, 1e-5}};
        for (const auto& [name, obj, h] : cases) {
            std::size_t failed = 0;
            for (int k = 0; k < 100; ++k) {
                std::vector<double> p(obj->dim());
                for (double& v : p) v = rng.uniform(-2.0, 2.0);
                const ParamVector x(p);
                const Evaluation ev = evaluate(*obj, x);
                const ParamVector fd = finite_difference_gradient(*obj, x, nullptr, h);
                if (!compare_gradients(ev.grad.values(), fd.values(), 1e-4, 1e-8).passed) ++failed;
            }
            items.push_back({std::string("gradient_oracle_") + name, failed == 0,
                             std::to_string(failed) + " of 100 points failed"});
        }
    }

    {  // audited benchmark runs
        for (const auto& cfg : rosenbrock_benchmark_configs()) {
            const RunSummary s = run_experiment(cfg, out_dir / cfg.name);
            const bool expect_diverge = cfg.optimizer.kind == OptimizerKind::sgd && cfg.optimizer.eta == 0.01;
            const bool ok = !s.invariant_failure &&
                            (expect_diverge ? s.status == RunStatus::diverged
                                            : s.status == RunStatus::converged);
            std::string detail = to_string(s.status);
            if (s.final_x.size() == 2)
                detail += " at (" + format_double(s.final_x[0]) + ", " + format_double(s.final_x[1]) + ")";
            items.push_back({cfg.name, ok, detail});
        }
        const ExperimentConfig qc = quadratic_benchmark_config();
        const RunSummary qs = run_experiment(qc, out_dir / qc.name);
        items.push_back({qc.name, !qs.invariant_failure && qs.violation_fraction == 0.0,
                         "lower-bound violation fraction " + format_double(qs.violation_fraction)});
    }
    return items;
}

}  // namespace vav
