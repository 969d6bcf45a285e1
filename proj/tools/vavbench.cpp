// vavbench: run, sweep and compare optimizer experiments.
//
// Exit codes: 0 run finished (diverged runs included), 1 configuration error,
// 2 internal invariant violation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vav/format.hpp"
#include "vav/harness.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitInvariant = 2;

void print_summary(const vav::RunSummary& s) {
    std::cout << s.name << ": " << vav::to_string(s.status) << " after " << s.steps_executed
              << " steps, final loss " << vav::format_double(s.final_loss);
    if (!s.final_x.empty()) {
        std::cout << ", x = (";
        for (std::size_t i = 0; i < s.final_x.size(); ++i)
            std::cout << (i ? ", " : "") << vav::format_double(s.final_x[i]);
        std::cout << ')';
    }
    std::cout << '\n';
    for (const auto& t : s.checks)
        std::cout << "  check " << t.name << ": " << t.failed << '/' << t.checked << " failed\n";
    if (!s.message.empty()) std::cout << "  " << s.message << '\n';
    if (!s.output_dir.empty()) std::cout << "  output: " << s.output_dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Benchmark harness for auxiliary-variable learning-rate optimizers"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;

    auto* run = app.add_subcommand("run", "Run one experiment from a config file");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory (overrides the config)");

    std::string param;
    std::vector<double> values;
    bool serial = false;
    auto* sw = app.add_subcommand("sweep", "Run a config once per value of a numeric field");
    sw->add_option("--config", config_path, "Template config (JSON)")->required()->check(CLI::ExistingFile);
    sw->add_option("--param", param, "Dotted field name, e.g. optimizer.eta")->required();
    sw->add_option("--values", values, "Comma separated values")->delimiter(',');
    sw->add_option("--out", out_dir, "Output root directory");
    sw->add_flag("--serial", serial, "Run sequentially instead of in parallel");

    std::vector<std::string> run_paths;
    std::string baseline;
    std::optional<double> threshold;
    std::string json_out;
    auto* cmp = app.add_subcommand("compare", "Compare finished runs against a baseline run");
    cmp->add_option("paths", run_paths, "Run directories or summary.json files")->required();
    cmp->add_option("--baseline", baseline, "Baseline run directory")->required();
    cmp->add_option("--threshold", threshold, "Loss threshold for steps-to-threshold");
    cmp->add_option("--json", json_out, "Also write the comparison as JSON to this file");

    auto* self = app.add_subcommand("selftest", "Run the invariant suite and audited benchmark runs");
    self->add_option("--out", out_dir, "Output directory for the benchmark metrics");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    const std::optional<fs::path> cli_out =
        out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir);
    try {
        if (*run) {
            const auto cfg = vav::load_config(config_path);
            const auto summary = vav::run_experiment(cfg, vav::resolve_output_dir(cfg, cli_out));
            print_summary(summary);
            return summary.invariant_failure ? kExitInvariant : kExitOk;
        }
        if (*sw) {
            const auto cfg = vav::load_config(config_path);
            const fs::path root = cli_out ? *cli_out : vav::resolve_output_dir(cfg, std::nullopt);
            const auto summaries = vav::sweep(cfg, param, values, root, !serial);
            bool failed = false;
            for (const auto& s : summaries) {
                print_summary(s);
                failed = failed || s.invariant_failure;
            }
            return failed ? kExitInvariant : kExitOk;
        }
        if (*cmp) {
            std::vector<fs::path> paths(run_paths.begin(), run_paths.end());
            const auto table = vav::compare_runs(paths, baseline, threshold);
            std::cout << table.to_text();
            if (!json_out.empty()) std::ofstream(json_out) << std::setw(2) << table.to_json() << '\n';
            return kExitOk;
        }
        if (*self) {
            const fs::path dir = cli_out ? *cli_out
                                         : (std::getenv(vav::kOutputDirEnv)
                                                ? fs::path(std::getenv(vav::kOutputDirEnv)) / "selftest"
                                                : fs::path("runs/selftest"));
            bool all = true;
            for (const auto& item : vav::run_selftest(dir)) {
                std::cout << (item.passed ? "PASS " : "FAIL ") << item.name << "  " << item.detail << '\n';
                all = all && item.passed;
            }
            return all ? kExitOk : kExitInvariant;
        }
    } catch (const vav::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const vav::InvariantError& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvariant;
    }
    return kExitOk;
}
