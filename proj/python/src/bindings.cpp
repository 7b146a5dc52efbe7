// Python bindings. Structured configuration (suites, engine configs, session
// payloads) crosses the boundary as JSON text; the cospar package wraps it in
// dicts.

#include "cospar/engine.hpp"
#include "cospar/errors.hpp"
#include "cospar/experiments.hpp"
#include "cospar/objective.hpp"
#include "cospar/presets.hpp"
#include "cospar/probit.hpp"
#include "cospar/serialization.hpp"
#include "cospar/session.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

namespace py = pybind11;
using namespace cospar;

namespace {

Json parse_json(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
}

py::tuple posterior_tuple(const UtilityPosterior& p) { return py::make_tuple(p.mean, p.covariance); }

// Holds a service behind a pointer: SessionService owns mutexes and cannot move.
class PySessionService {
public:
    PySessionService(const std::filesystem::path& dir, const std::optional<std::filesystem::path>& presets_file)
        : service_(std::make_unique<SessionService>(
              dir, presets_file ? presets::load_session_presets(*presets_file) : presets::builtin_session_presets())) {}

    std::string create(const std::string& request) { return service_->create(parse_json(request)).dump(); }
    std::string get(const std::string& id) const { return service_->get(id).dump(); }
    std::string submit_feedback(const std::string& id, const std::string& payload) {
        return service_->submit_feedback(id, parse_json(payload)).dump();
    }
    std::string posterior(const std::string& id) const { return service_->posterior(id).dump(); }
    std::string history(const std::string& id) const { return service_->history(id).dump(); }
    std::string close(const std::string& id) { return service_->close(id).dump(); }
    std::string export_session(const std::string& id) const { return service_->export_session(id).dump(); }
    std::string import_session(const std::string& snapshot) {
        return service_->import_session(parse_json(snapshot)).dump();
    }
    std::string list_presets() const { return service_->list_presets().dump(); }
    std::vector<std::string> ids() const { return service_->ids(); }

private:
    std::unique_ptr<SessionService> service_;
};

}  // namespace

PYBIND11_MODULE(_cospar, m) {
    m.doc() = "Preference-based optimization with pairwise and coactive feedback";

    auto base = py::register_exception<std::runtime_error>(m, "CosparError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<NotFoundError>(m, "NotFoundError", base.ptr());
    py::register_exception<ConflictError>(m, "ConflictError", base.ptr());
    py::register_exception<UnsupportedVersionError>(m, "UnsupportedVersionError", base.ptr());

    py::class_<Dimension>(m, "Dimension")
        .def(py::init([](std::string name, double min, double max, std::size_t count, std::string unit) {
                 return Dimension{std::move(name), min, max, count, std::move(unit)};
             }),
             py::arg("name"), py::arg("min"), py::arg("max"), py::arg("count"), py::arg("unit") = "")
        .def_readonly("name", &Dimension::name)
        .def_readonly("min", &Dimension::min)
        .def_readonly("max", &Dimension::max)
        .def_readonly("count", &Dimension::count)
        .def_readonly("unit", &Dimension::unit)
        .def("value", &Dimension::value)
        .def("nearest", &Dimension::nearest);

    py::class_<ActionSpace>(m, "ActionSpace")
        .def(py::init(&build_action_grid), py::arg("dimensions"))
        .def("__len__", &ActionSpace::size)
        .def_property_readonly("dimensionality", &ActionSpace::dimensionality)
        .def_property_readonly("dimensions", &ActionSpace::dimensions)
        .def("coordinates", &ActionSpace::coordinates)
        .def("grid_position", &ActionSpace::grid_position)
        .def("flat_index", [](const ActionSpace& s, const std::vector<std::size_t>& p) { return s.flat_index(p); })
        .def("to_json", [](const ActionSpace& s) { return to_json(s).dump(); });

    py::class_<KernelParams>(m, "KernelParams")
        .def(py::init([](std::vector<double> lengthscales, double signal_variance, double noise_variance,
                         double preference_noise) {
                 return KernelParams{std::move(lengthscales), signal_variance, noise_variance, preference_noise};
             }),
             py::arg("lengthscales"), py::arg("signal_variance") = 1.0, py::arg("noise_variance") = 0.0,
             py::arg("preference_noise") = 1.0)
        .def_readwrite("lengthscales", &KernelParams::lengthscales)
        .def_readwrite("signal_variance", &KernelParams::signal_variance)
        .def_readwrite("noise_variance", &KernelParams::noise_variance)
        .def_readwrite("preference_noise", &KernelParams::preference_noise);

    py::enum_<FeedbackSource>(m, "FeedbackSource")
        .value("pairwise", FeedbackSource::pairwise)
        .value("coactive", FeedbackSource::coactive);

    py::class_<PreferenceRecord>(m, "PreferenceRecord")
        .def(py::init([](ActionIndex winner, ActionIndex loser, double weight, FeedbackSource source) {
                 return PreferenceRecord{winner, loser, weight, source};
             }),
             py::arg("winner"), py::arg("loser"), py::arg("weight") = 1.0,
             py::arg("source") = FeedbackSource::pairwise)
        .def_readonly("winner", &PreferenceRecord::winner)
        .def_readonly("loser", &PreferenceRecord::loser)
        .def_readonly("weight", &PreferenceRecord::weight)
        .def_readonly("source", &PreferenceRecord::source)
        .def("__eq__", &PreferenceRecord::operator==);

    py::class_<Rng>(m, "Rng").def(py::init<std::uint64_t>(), py::arg("seed"));

    m.def("normal_cdf", &probit::normal_cdf);
    m.def("log_normal_cdf", &probit::log_normal_cdf);
    m.def("pair_likelihood", &pair_likelihood, py::arg("f_winner"), py::arg("f_loser"), py::arg("sigma_k"));
    m.def("prior_covariance", &prior_covariance);
    m.def("negative_log_posterior", &negative_log_posterior);
    m.def("nlp_gradient", &nlp_gradient);
    m.def("nlp_hessian", &nlp_hessian);
    m.def("laplace_posterior",
          [](const PreferenceDataset& data, const ActionSpace& space, const KernelParams& kernel) {
              return posterior_tuple(laplace_posterior(data, space, kernel));
          });
    m.def("argmax", &argmax);

    py::class_<LaplaceFit>(m, "LaplaceFit")
        .def_readonly("support", &LaplaceFit::support)
        .def_readonly("mean", &LaplaceFit::mean)
        .def_readonly("newton_iterations", &LaplaceFit::newton_iterations)
        .def_readonly("gradient_norm", &LaplaceFit::gradient_norm);

    py::class_<PreferenceModel>(m, "PreferenceModel")
        .def(py::init<ActionSpace, KernelParams>(), py::arg("space"), py::arg("kernel"))
        .def("fit", &PreferenceModel::fit, py::call_guard<py::gil_scoped_release>())
        .def("posterior", [](const PreferenceModel& model, const LaplaceFit& fit) {
            return posterior_tuple(model.posterior(fit));
        })
        .def("posterior_stddev", &PreferenceModel::posterior_stddev)
        .def("sample", &PreferenceModel::sample);

    py::class_<EngineConfig>(m, "EngineConfig")
        .def_static("from_json", [](const std::string& text, std::size_t dimensionality) {
            return parse_engine_config(parse_json(text), dimensionality);
        })
        .def_static("simulation", &presets::simulation_engine, py::arg("n"), py::arg("b"), py::arg("kernel"),
                    py::arg("dimensionality"), py::arg("beta") = presets::kDefaultBeta)
        .def_readonly("n", &EngineConfig::n)
        .def_readonly("b", &EngineConfig::b)
        .def_readonly("beta", &EngineConfig::beta)
        .def_readonly("kernel", &EngineConfig::kernel)
        .def("to_json", [](const EngineConfig& c) { return to_json(c).dump(); });

    py::class_<FeedbackBundle>(m, "FeedbackBundle")
        .def_static("unset", &FeedbackBundle::unset, py::arg("n"), py::arg("b"))
        .def_readonly("rows", &FeedbackBundle::rows)
        .def_readonly("cols", &FeedbackBundle::cols)
        .def("set", [](FeedbackBundle& f, std::size_t row, std::size_t col,
                       std::optional<bool> row_wins) { f.at(row, col) = row_wins; })
        .def("get", [](const FeedbackBundle& f, std::size_t row, std::size_t col) { return f.at(row, col); })
        .def("set_coactive", [](FeedbackBundle& f, std::size_t j, std::optional<CoactiveLevels> levels) {
            f.coactive.at(j) = std::move(levels);
        });

    py::class_<RecordOutcome>(m, "RecordOutcome")
        .def_readonly("pairwise_records", &RecordOutcome::pairwise_records)
        .def_readonly("coactive_records", &RecordOutcome::coactive_records)
        .def_readonly("coactive_suggestions", &RecordOutcome::coactive_suggestions);

    py::class_<Engine>(m, "Engine")
        .def(py::init<EngineConfig, ActionSpace, std::uint64_t>(), py::arg("config"), py::arg("space"),
             py::arg("seed"))
        .def("propose", &Engine::propose)
        .def("record", &Engine::record)
        .def("posterior", [](const Engine& e) { return posterior_tuple(e.posterior()); })
        .def("posterior_stddev", [](const Engine& e) { return e.posterior_summary().stddev; })
        .def_property_readonly("posterior_mean", [](const Engine& e) { return e.fit().mean; })
        .def_property_readonly("iteration", &Engine::iteration)
        .def_property_readonly("dataset", &Engine::dataset)
        .def_property_readonly("buffer", &Engine::buffer)
        .def_property_readonly("pending", &Engine::pending)
        .def_property_readonly("space", &Engine::space)
        .def_property_readonly("config", &Engine::config)
        .def("snapshot", [](const Engine& e) { return engine_snapshot(e).dump(); })
        .def_static("restore", [](const std::string& text) { return restore_engine(parse_json(text)); })
        .def("__copy__", [](const Engine& e) { return Engine(e); });

    py::class_<ObjectiveTable>(m, "ObjectiveTable")
        .def(py::init([](ActionSpace space, Vector values) { return ObjectiveTable{std::move(space), std::move(values)}; }),
             py::arg("space"), py::arg("values"))
        .def_readonly("space", &ObjectiveTable::space)
        .def_readonly("values", &ObjectiveTable::values);
    m.def("load_objective_csv", &load_objective_csv);
    m.def("write_objective_csv",
          [](const ObjectiveTable& t, const std::filesystem::path& path, bool cost) {
              write_objective_csv(t, path, cost ? Orientation::cost : Orientation::utility);
          },
          py::arg("table"), py::arg("path"), py::arg("cost") = false);
    m.def("sample_gp_objective", &sample_gp_objective);
    m.def("normalize_objective", &normalize_objective);
    m.def("coactive_oracle", [](const ObjectiveTable& table, ActionIndex action) {
        const auto gradients = gradient_table(table);
        return coactive_oracle(gradients, action, coactive_oracle_config(gradients));
    });

    m.def("compass_gait_kernel", &presets::compass_gait_kernel);
    m.def("synthetic_2d_kernel", &presets::synthetic_2d_kernel);
    m.def("step_length_grid", &presets::step_length_grid);

    m.def("child_seed", &child_seed);
    m.def("default_synthetic_suite", [] { return to_json(default_synthetic_suite()).dump(); });
    m.def(
        "run_suite",
        [](const std::string& suite_json, std::uint64_t seed, std::size_t jobs) {
            const auto suite = parse_synthetic_suite(parse_json(suite_json));
            std::vector<std::tuple<std::string, std::vector<double>, std::vector<double>>> out;
            py::gil_scoped_release release;
            for (const auto& cfg : suite.experiments()) {
                const auto curve = run_experiment(cfg, seed, jobs);
                out.emplace_back(curve.config_id, curve.summary.mean, curve.summary.standard_error);
            }
            return out;
        },
        py::arg("suite"), py::arg("seed"), py::arg("jobs") = 1);
    m.def(
        "run_file_experiment",
        [](const std::filesystem::path& objective, const EngineConfig& engine, std::size_t trials,
           std::size_t repetitions, bool coactive, std::uint64_t seed) {
            ExperimentConfig cfg;
            cfg.id = "file";
            cfg.engine = engine;
            cfg.trials_total = trials;
            cfg.repetitions = repetitions;
            cfg.coactive_enabled = coactive;
            cfg.objective.kind = ObjectiveSource::Kind::file;
            cfg.objective.path = objective;
            py::gil_scoped_release release;
            const auto curve = run_experiment(cfg, seed);
            return std::make_pair(curve.summary.mean, curve.summary.standard_error);
        },
        py::arg("objective"), py::arg("engine"), py::arg("trials"), py::arg("repetitions"),
        py::arg("coactive") = false, py::arg("seed") = 0);

    py::class_<PySessionService>(m, "SessionService")
        .def(py::init<const std::filesystem::path&, const std::optional<std::filesystem::path>&>(),
             py::arg("snapshot_dir"), py::arg("presets_file") = std::nullopt)
        .def("create", &PySessionService::create)
        .def("get", &PySessionService::get)
        .def("submit_feedback", &PySessionService::submit_feedback)
        .def("posterior", &PySessionService::posterior)
        .def("history", &PySessionService::history)
        .def("close", &PySessionService::close)
        .def("export_session", &PySessionService::export_session)
        .def("import_session", &PySessionService::import_session)
        .def("list_presets", &PySessionService::list_presets)
        .def("ids", &PySessionService::ids);
}
