#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vav/harness.hpp"
#include "vav/problems.hpp"

namespace py = pybind11;
using namespace vav;

namespace {

py::object json_to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& o) {
    if (py::isinstance<py::str>(o)) return nlohmann::json::parse(o.cast<std::string>());
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict record_dict(const StepRecord& r) {
    py::dict d;
    d["step"] = r.step;
    d["batch_loss"] = r.batch_loss;
    d["next_loss"] = r.next_loss;
    d["grad_norm"] = r.grad_norm;
    d["r_min"] = r.r_min;
    d["r_max"] = r.r_max;
    d["r_mean"] = r.r_mean;
    d["rho_min"] = r.rho_min;
    d["rho_max"] = r.rho_max;
    d["omega_min"] = r.omega_min;
    d["omega_max"] = r.omega_max;
    d["lr_min"] = r.lr_min;
    d["lr_max"] = r.lr_max;
    d["dissipation_residual"] = r.dissipation_residual;
    return d;
}

const Batch* batch_ptr(const std::optional<Batch>& b) { return b ? &*b : nullptr; }

}  // namespace

PYBIND11_MODULE(vavopt, m) {
    m.doc() = "Elementwise relaxed auxiliary-variable optimizer";

    // Later registrations are tried first, so SchemaError wins over ConfigError.
    auto config = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<SchemaError>(m, "SchemaError", config.ptr());
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<InvariantError>(m, "InvariantError", PyExc_RuntimeError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
    py::register_exception<OracleError>(m, "OracleError", PyExc_RuntimeError);

    // Building blocks
    m.def("sgd_step",
          [](const std::vector<double>& x, const std::vector<double>& g, double eta) {
              return sgd_step(ParamVector(x), ParamVector(g), eta).vec();
          },
          py::arg("x"), py::arg("grad"), py::arg("eta"));
    m.def("sav_tilde_r",
          [](double r, const std::vector<double>& g, double f, double c, double eta) {
              return sav_tilde_r(r, g, f, c, eta);
          },
          py::arg("r"), py::arg("grad"), py::arg("f_batch"), py::arg("c"), py::arg("eta"));
    m.def("vav_tilde_r",
          [](const std::vector<double>& r, const std::vector<double>& g, double f, double c, double eta) {
              return vav_tilde_r(r, g, f, c, eta);
          },
          py::arg("r"), py::arg("grad"), py::arg("f_batch"), py::arg("c"), py::arg("eta"));
    m.def("vav_position_update",
          [](const std::vector<double>& x, const std::vector<double>& g, const std::vector<double>& rt,
             double f, double c, double eta) {
              return vav_position_update(ParamVector(x), g, rt, f, c, eta).vec();
          },
          py::arg("x"), py::arg("grad"), py::arg("r_tilde"), py::arg("f_batch"), py::arg("c"), py::arg("eta"));
    m.def("solve_omega",
          [](double f_next, double r_tilde, double dx, double psi, double eta) {
              return solve_omega({f_next, r_tilde, dx, psi, eta});
          },
          py::arg("f_next"), py::arg("r_tilde"), py::arg("dx"), py::arg("psi"), py::arg("eta"),
          "Smallest feasible omega in [0, 1]; f_next includes the offset c.");
    m.def("relax_r",
          [](const std::vector<double>& rt, double f_next, double c, const std::vector<double>& w) {
              return relax_r(rt, f_next, c, w);
          },
          py::arg("r_tilde"), py::arg("f_next_loss"), py::arg("c"), py::arg("omega"));
    m.def("scheduler_effective_lr", &scheduler_effective_lr, py::arg("r"), py::arg("c"), py::arg("eta"));
    m.def("dissipation_residual", &dissipation_residual, py::arg("r"), py::arg("r_tilde"), py::arg("dx"),
          py::arg("lr"));

    // Problems
    py::class_<Batch>(m, "Batch")
        .def(py::init<std::vector<std::size_t>, std::size_t>(), py::arg("indices"), py::arg("dataset_size"))
        .def_property_readonly("indices",
                               [](const Batch& b) { return std::vector<std::size_t>(b.indices().begin(), b.indices().end()); });

    py::class_<Objective, std::shared_ptr<Objective>>(m, "Objective")
        .def_property_readonly("dim", &Objective::dim)
        .def_property_readonly("dataset_size", &Objective::dataset_size)
        .def("value",
             [](const Objective& o, const std::vector<double>& x, std::optional<Batch> b) {
                 return evaluate_value(o, ParamVector(x), batch_ptr(b));
             },
             py::arg("x"), py::arg("batch") = py::none())
        .def("value_and_gradient",
             [](const Objective& o, const std::vector<double>& x, std::optional<Batch> b) {
                 const Evaluation ev = evaluate(o, ParamVector(x), batch_ptr(b));
                 return py::make_tuple(ev.loss, ev.grad.vec());
             },
             py::arg("x"), py::arg("batch") = py::none())
        .def("finite_difference_gradient",
             [](const Objective& o, const std::vector<double>& x, double h, std::optional<Batch> b) {
                 return finite_difference_gradient(o, ParamVector(x), batch_ptr(b), h).vec();
             },
             py::arg("x"), py::arg("h") = 1e-6, py::arg("batch") = py::none());

    py::class_<RosenbrockProblem, Objective, std::shared_ptr<RosenbrockProblem>>(m, "Rosenbrock")
        .def(py::init<double, double, double>(), py::arg("a") = 1.0, py::arg("b") = 100.0, py::arg("scale") = 1.0);

    py::class_<QuadraticProblem, Objective, std::shared_ptr<QuadraticProblem>>(m, "Quadratic")
        .def(py::init([](const std::vector<double>& diag, double offset) {
                 return std::make_shared<QuadraticProblem>(QuadraticProblem::diagonal(diag, offset));
             }),
             py::arg("diag"), py::arg("offset") = 0.0);

    py::class_<RegressionProblem, Objective, std::shared_ptr<RegressionProblem>>(m, "SineRegression")
        .def(py::init([](std::size_t n, double noise, std::uint64_t seed, std::vector<std::size_t> widths) {
                 return std::make_shared<RegressionProblem>(make_sine_regression(n, noise, seed, std::move(widths)));
             }),
             py::arg("num_points") = 1024, py::arg("noise_sd") = 0.05, py::arg("seed") = 7,
             py::arg("widths") = std::vector<std::size_t>{1, 16, 16, 1})
        .def("init_params",
             [](const RegressionProblem& p, std::uint64_t seed) {
                 RngStream rng(seed);
                 return p.model().init_params(rng).vec();
             },
             py::arg("seed"))
        .def("export_csv", [](const RegressionProblem& p, const std::filesystem::path& path) {
            export_dataset_csv(p, path);
        });

    // Stateful optimizer
    py::class_<VavOptions>(m, "VavOptions")
        .def(py::init([](double eta, double psi, double c, bool scheduler) {
                 VavOptions o{eta, psi, c, scheduler};
                 o.validate();
                 return o;
             }),
             py::arg("eta") = 0.01, py::arg("psi") = 0.95, py::arg("c") = 0.0, py::arg("scheduler") = false)
        .def_readonly("eta", &VavOptions::eta)
        .def_readonly("psi", &VavOptions::psi)
        .def_readonly("c", &VavOptions::c)
        .def_readonly("scheduler", &VavOptions::scheduler_enabled);

    py::class_<VavState>(m, "VavState")
        .def(py::init([](const Objective& obj, const std::vector<double>& x0, const VavOptions& o,
                         std::optional<Batch> first) {
                 return init_vav_state(obj, ParamVector(x0), o, batch_ptr(first));
             }),
             py::arg("objective"), py::arg("x0"), py::arg("options"), py::arg("first_batch") = py::none())
        .def_property_readonly("x", [](const VavState& s) { return s.x.vec(); })
        .def_readonly("r", &VavState::r)
        .def_readonly("step", &VavState::step)
        .def("step_once",
             [](VavState& s, const Objective& obj, std::optional<Batch> batch, std::optional<Batch> next) {
                 return record_dict(vav_step(s, obj, batch_ptr(batch), batch_ptr(next)));
             },
             py::arg("objective"), py::arg("batch") = py::none(), py::arg("next_batch") = py::none(),
             "Advances one step in place and returns the step record.");

    // Harness
    m.def("parse_config", [](const py::object& cfg) { return json_to_py(to_json(parse_config(py_to_json(cfg)))); },
          py::arg("config"), "Validates a config (dict or JSON text) and returns it with defaults filled in.");
    m.def("run_experiment",
          [](const py::object& cfg, std::optional<std::filesystem::path> out_dir) {
              const ExperimentConfig parsed = parse_config(py_to_json(cfg));
              RunSummary s;
              {
                  py::gil_scoped_release release;
                  s = run_experiment(parsed, out_dir);
              }
              return json_to_py(to_json(s));
          },
          py::arg("config"), py::arg("out_dir") = py::none());
    m.def("run_config_file",
          [](const std::filesystem::path& path, std::optional<std::filesystem::path> out_dir) {
              const ExperimentConfig cfg = load_config(path);
              py::gil_scoped_release release;
              return to_json(run_experiment(cfg, out_dir)).dump();
          },
          py::arg("path"), py::arg("out_dir") = py::none(), "Runs a config file; returns the summary as JSON text.");
    m.def("compare_runs",
          [](const std::vector<std::filesystem::path>& paths, const std::filesystem::path& baseline,
             std::optional<double> threshold) { return json_to_py(compare_runs(paths, baseline, threshold).to_json()); },
          py::arg("paths"), py::arg("baseline"), py::arg("threshold") = py::none());

    m.attr("METRICS_HEADER") = kMetricsHeader;
    m.attr("OUTPUT_DIR_ENV") = kOutputDirEnv;
}
