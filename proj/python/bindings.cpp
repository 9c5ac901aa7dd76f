#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gestura/adaptui.hpp"
#include "gestura/aggregation.hpp"
#include "gestura/config.hpp"
#include "gestura/errors.hpp"
#include "gestura/experiment.hpp"
#include "gestura/metrics.hpp"

namespace py = pybind11;
using namespace gestura;

namespace {

py::array_t<double> to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

py::array_t<double> to_array(std::span<const double> v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

ConfusionMatrix confusion(py::array_t<std::int64_t, py::array::c_style | py::array::forcecast> m) {
    if (m.ndim() != 2 || m.shape(0) != m.shape(1) || m.shape(0) == 0) {
        throw ShapeError("confusion matrix must be square and non-empty");
    }
    const auto n = static_cast<std::size_t>(m.shape(0));
    ConfusionMatrix cm(n);
    auto r = m.unchecked<2>();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (r(i, j) < 0) throw ValidationError("confusion counts must be non-negative");
            cm.add(i, j, static_cast<std::uint64_t>(r(i, j)));
        }
    }
    return cm;
}

py::array_t<double> q_array(const QTable& q) {
    py::array_t<double> out({static_cast<py::ssize_t>(q.states()), static_cast<py::ssize_t>(q.actions())});
    std::copy(q.values().begin(), q.values().end(), out.mutable_data());
    return out;
}

py::dict row_dict(const MetricsReport& r) {
    py::dict d;
    d["model"] = r.row;
    d["f1"] = r.f1 ? py::cast(*r.f1) : py::none();
    d["latency_ms"] = r.latency_ms;
    d["task_success_rate"] = r.task_success_rate;
    d["accessibility_score"] = r.accessibility_score;
    d["impaired_task_success_rate"] = r.impaired.task_success_rate;
    d["unimpaired_task_success_rate"] = r.unimpaired.task_success_rate;
    return d;
}

StageOptions stage(const std::filesystem::path& out, std::size_t threads) { return {out, threads, nullptr}; }

}  // namespace

PYBIND11_MODULE(_gestura, m) {
    m.doc() = "Multimodal gesture recognition, federated averaging, and interface adaptation";
    m.attr("__version__") = tool_version();

    static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
    static py::exception<IoError> io_error(m, "IoError", PyExc_OSError);
    static py::exception<NumericError> numeric_error(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            py::set_error(config_error, e.what());
        } catch (const IoError& e) {
            py::set_error(io_error, e.what());
        } catch (const NumericError& e) {
            py::set_error(numeric_error, e.what());
        } catch (const StateError& e) {
            py::set_error(PyExc_RuntimeError, e.what());
        }
    });

    // --- federated averaging ---
    m.def(
        "aggregate",
        [](const std::vector<std::vector<double>>& parameters, const std::vector<std::size_t>& counts) {
            if (parameters.size() != counts.size()) throw ShapeError("one sample count per parameter vector");
            std::vector<ClientUpdate> updates;
            for (std::size_t k = 0; k < parameters.size(); ++k) {
                auto layout = std::make_shared<ParamLayout>();
                layout->add("flat.values", {std::max<std::size_t>(1, parameters[k].size())}, InitKind::Zeros);
                if (parameters[k].empty()) throw ShapeError("parameter vectors must be non-empty");
                updates.push_back({k, {parameters[k], layout}, counts[k], {}});
            }
            return to_array(aggregate(updates).values);
        },
        py::arg("parameters"), py::arg("sample_counts"),
        "Sample-count weighted mean of client parameter vectors.");

    // --- metrics ---
    m.def("f1_macro", [](py::array_t<std::int64_t, py::array::c_style | py::array::forcecast> cm) {
        return f1_macro(confusion(cm));
    }, py::arg("confusion"));
    m.def("f1_micro", [](py::array_t<std::int64_t, py::array::c_style | py::array::forcecast> cm) {
        return f1_micro(confusion(cm));
    }, py::arg("confusion"));
    m.def("f1_per_class", [](py::array_t<std::int64_t, py::array::c_style | py::array::forcecast> cm) {
        return f1_per_class(confusion(cm));
    }, py::arg("confusion"));
    m.def(
        "task_success_rate",
        [](const std::vector<bool>& success, const std::vector<double>& times) {
            if (success.size() != times.size()) throw ShapeError("success and times differ in length");
            std::vector<TaskOutcome> o;
            for (std::size_t i = 0; i < success.size(); ++i) o.push_back({success[i], times[i]});
            return task_success_rate(o);
        },
        py::arg("success"), py::arg("times_s"));
    m.def("sus_score", &sus_score, py::arg("response"));
    m.def("accessibility_score",
          [](const std::vector<SusResponse>& r) { return accessibility_score(r); }, py::arg("responses"));
    m.def(
        "adjustment_latency",
        [](const std::vector<double>& v) {
            const auto s = adjustment_latency(v);
            return py::make_tuple(s.mean_ms, s.p95_ms);
        },
        py::arg("latencies_ms"), "(mean, nearest-rank p95) in milliseconds");

    // --- adaptation ---
    m.def(
        "compute_reward",
        [](double time_s, bool success, double feedback, double w_time, double w_feedback) {
            RLHyperparams p;
            p.w_time = w_time;
            p.w_feedback = w_feedback;
            return compute_reward(time_s, success, feedback, p);
        },
        py::arg("time_s"), py::arg("success"), py::arg("feedback"), py::arg("w_time") = 0.5,
        py::arg("w_feedback") = 0.5);
    m.def(
        "diagnostic_value_iteration",
        [](double discount) { return q_array(value_iteration(DiagnosticMdp::standard(), discount)); },
        py::arg("discount") = 0.9, "Optimal Q of the 3-state diagnostic MDP.");
    m.def(
        "diagnostic_q_learning",
        [](double learning_rate, double discount, std::size_t sweeps) {
            RLHyperparams p;
            p.learning_rate = learning_rate;
            p.discount = discount;
            return q_array(train_diagnostic(DiagnosticMdp::standard(), p, sweeps));
        },
        py::arg("learning_rate") = 0.5, py::arg("discount") = 0.9, py::arg("sweeps") = 2000);
    m.def("accessible_choice_rate",
          [](const std::filesystem::path& policy_json) { return accessible_choice_rate(load_policy_json(policy_json)); },
          py::arg("policy_json"));

    // --- data ---
    py::class_<Dataset>(m, "Dataset")
        .def("__len__", [](const Dataset& d) { return d.samples.size(); })
        .def_property_readonly("labels",
                               [](const Dataset& d) {
                                   std::vector<std::size_t> out;
                                   for (const auto& s : d.samples) out.push_back(s.label);
                                   return out;
                               })
        .def_property_readonly("impaired",
                               [](const Dataset& d) {
                                   std::vector<bool> out;
                                   for (const auto& p : d.participants) out.push_back(p.impaired);
                                   return out;
                               })
        .def("sample", [](const Dataset& d, std::size_t i) {
            const auto& s = d.samples.at(i);
            py::dict out;
            out["label"] = s.label;
            out["participant"] = s.participant;
            out["visual"] = to_array(s.input.visual.frame);
            out["accel"] = to_array(s.input.accel.series);
            out["emg"] = to_array(s.input.emg.series);
            out["lighting"] = s.input.context.lighting;
            out["fatigue"] = s.input.context.fatigue;
            return out;
        }, py::arg("index"));
    m.def(
        "generate_dataset",
        [](std::size_t sample_count, std::size_t participant_count, std::uint64_t seed, std::size_t threads) {
            DatasetSpec spec;
            spec.sample_count = sample_count;
            spec.participant_count = participant_count;
            spec.seed = seed;
            py::gil_scoped_release release;
            return generate_dataset(spec, threads);
        },
        py::arg("sample_count") = 1000, py::arg("participant_count") = 40, py::arg("seed") = 7, py::arg("threads") = 1);

    // --- config and pipeline stages ---
    m.def(
        "default_config",
        [](const std::string& scale) {
            if (scale != "desk" && scale != "paper") throw ConfigError("scale must be desk or paper");
            return to_toml(ExperimentConfig::for_scale(scale == "paper" ? Scale::Paper : Scale::Desk));
        },
        py::arg("scale") = "desk", "Preset configuration as TOML text.");
    m.def(
        "normalize_config", [](const std::string& text) { return to_toml(parse_config(text)); }, py::arg("toml"),
        "Parses TOML text and renders the complete effective configuration.");
    m.def(
        "gen_data",
        [](const std::string& toml, const std::filesystem::path& out, std::size_t threads) {
            const auto c = parse_config(toml);
            py::gil_scoped_release release;
            cmd_gen_data(c, stage(out, threads));
        },
        py::arg("config"), py::arg("out"), py::arg("threads") = 1);
    m.def(
        "train",
        [](const std::string& toml, const std::filesystem::path& out, std::size_t threads,
           std::optional<std::size_t> rounds) {
            const auto c = parse_config(toml);
            py::gil_scoped_release release;
            cmd_train(c, stage(out, threads), {rounds, false});
        },
        py::arg("config"), py::arg("out"), py::arg("threads") = 1, py::arg("rounds") = py::none());
    m.def(
        "adapt",
        [](const std::string& toml, const std::filesystem::path& out, std::size_t threads,
           std::optional<std::size_t> episodes) {
            const auto c = parse_config(toml);
            py::gil_scoped_release release;
            cmd_adapt(c, stage(out, threads), {episodes});
        },
        py::arg("config"), py::arg("out"), py::arg("threads") = 1, py::arg("episodes") = py::none());
    m.def(
        "evaluate",
        [](const std::string& toml, const std::filesystem::path& out, std::size_t threads) {
            const auto c = parse_config(toml);
            std::vector<MetricsReport> rows;
            {
                py::gil_scoped_release release;
                rows = cmd_evaluate(c, stage(out, threads));
            }
            py::list result;
            for (const auto& r : rows) result.append(row_dict(r));
            return result;
        },
        py::arg("config"), py::arg("out"), py::arg("threads") = 1);
}
