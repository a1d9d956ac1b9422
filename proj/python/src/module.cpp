#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "eegconn/commands.hpp"
#include "eegconn/connectivity.hpp"
#include "eegconn/errors.hpp"
#include "eegconn/eval.hpp"
#include "eegconn/ica.hpp"
#include "eegconn/pipeline.hpp"
#include "eegconn/preprocess.hpp"
#include "eegconn/spectral.hpp"

namespace py = pybind11;
using namespace eegconn;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

// JSON crosses the boundary as text; Python's json module does the rest.
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

PipelineConfig config_from(const py::object& o) {
  if (o.is_none()) return PipelineConfig{};
  return PipelineConfig::from_json(from_py(o));
}

SignalMatrix matrix_from(const Array& a) {
  if (a.ndim() != 2) throw DataError("expected a 2-D array (channels x samples)");
  SignalMatrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

Array array_from(const SignalMatrix& m) {
  Array out({m.channels(), m.samples()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

Array array_from(const std::vector<double>& v) {
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::span<const double> span_of(const Array& a) {
  if (a.ndim() != 1) throw DataError("expected a 1-D array");
  return {a.data(), static_cast<std::size_t>(a.size())};
}

py::dict metrics_dict(const MetricSet& m) {
  py::dict d;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["specificity"] = m.specificity;
  d["npv"] = m.npv;
  d["f1"] = m.f1;
  d["accuracy"] = m.accuracy;
  d["degenerate"] = m.degenerate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "EEG connectivity analysis and workload classification";
  m.attr("__version__") = EEGCONN_VERSION;

  auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  (void)config_error;
  (void)data_error;

  py::class_<Recording>(m, "Recording")
      .def_readonly("subject_id", &Recording::subject_id)
      .def_readonly("sampling_rate", &Recording::sampling_rate)
      .def_readonly("channels", &Recording::channels)
      .def_property_readonly("gender", [](const Recording& r) { return std::string(to_string(r.gender)); })
      .def_property_readonly("samples", [](const Recording& r) { return array_from(r.samples); })
      .def_property_readonly("duration_s", &Recording::duration_s)
      .def_property_readonly("annotations",
                             [](const Recording& r) {
                               py::list out;
                               for (const auto& a : r.annotations) {
                                 py::dict d;
                                 d["task"] = std::string(to_string(a.task));
                                 d["difficulty"] = a.difficulty;
                                 d["start_s"] = a.start_s;
                                 d["end_s"] = a.end_s;
                                 d["performance"] = a.performance;
                                 d["nasa_tlx"] = a.nasa_tlx;
                                 out.append(d);
                               }
                               return out;
                             })
      .def("__repr__", [](const Recording& r) {
        return "<Recording " + r.subject_id + " " + std::to_string(r.channels.size()) + "ch " +
               std::to_string(r.duration_s()) + " s>";
      });

  m.def("load_recording", [](const std::filesystem::path& p) { return load_recording(p); }, py::arg("csv"));
  m.def("save_recording", &save_recording, py::arg("recording"), py::arg("csv"));

  // config and commands
  m.def("default_config", [] { return to_py(PipelineConfig{}.to_json()); });
  m.def(
      "config_hash", [](const py::object& cfg) { return config_from(cfg).hash(); }, py::arg("config") = py::none());
  m.def(
      "run_command",
      [](const std::string& name, const std::filesystem::path& out, const py::object& cfg, bool stamp) {
        const auto c = config_from(cfg);
        py::gil_scoped_release release;
        run_command(name, c, RunContext{out, stamp, nullptr});
      },
      py::arg("command"), py::arg("out"), py::arg("config") = py::none(), py::arg("stamp") = true,
      "Run one pipeline command (synth, preprocess, connect, select, label, train, evaluate, report).");

  m.def(
      "generate_cohort",
      [](const py::object& cfg) {
        auto [recs, truth] = generate_cohort(cohort_spec(config_from(cfg)));
        return py::make_tuple(recs, to_py(truth.to_json()));
      },
      py::arg("config") = py::none(), "Synthetic cohort and its planted ground truth.");

  // signal operations
  m.def(
      "bandpass",
      [](const Array& x, double fs, double low, double high, int order) {
        const auto f = design_filter({FilterKind::bandpass, low, high, order, true}, fs);
        return array_from(apply_filter(f, span_of(x)));
      },
      py::arg("x"), py::arg("fs"), py::arg("low_hz"), py::arg("high_hz"), py::arg("order") = 6);
  m.def(
      "bandstop",
      [](const Array& x, double fs, double low, double high, int order) {
        const auto f = design_filter({FilterKind::bandstop, low, high, order, true}, fs);
        return array_from(apply_filter(f, span_of(x)));
      },
      py::arg("x"), py::arg("fs"), py::arg("low_hz"), py::arg("high_hz"), py::arg("order") = 6);
  m.def(
      "welch_psd",
      [](const Array& x, double fs, double segment_s, double overlap) {
        const auto p = welch_psd(span_of(x), fs, WelchParams{segment_s, overlap});
        return py::make_tuple(p.freqs_hz, p.power.front());
      },
      py::arg("x"), py::arg("fs"), py::arg("segment_s") = 2.0, py::arg("overlap") = 0.5,
      "(freqs_hz, psd) with Hann segments and density scaling.");
  m.def(
      "fast_ica",
      [](const Array& x, std::uint64_t seed, std::size_t max_iter, double tol) {
        const auto dec = fast_ica(matrix_from(x), IcaOptions{0, max_iter, tol, seed, 1});
        py::dict d;
        d["sources"] = array_from(dec.sources);
        d["converged"] = dec.converged;
        d["iterations"] = dec.iterations;
        return d;
      },
      py::arg("x"), py::arg("seed") = 0, py::arg("max_iter") = 200, py::arg("tol") = 1e-4);

  // connectivity
  m.def("pcc", [](const Array& x, const Array& y) { return pcc(span_of(x), span_of(y)); }, py::arg("x"), py::arg("y"));
  m.def(
      "connectivity_matrix",
      [](const Array& x) {
        const auto s = matrix_from(x);
        std::vector<std::string> names;
        for (std::size_t i = 0; i < s.channels(); ++i) names.push_back("c" + std::to_string(i));
        const auto cm = connectivity_matrix(s, names);
        Array out({s.channels(), s.channels()});
        std::copy(cm.values.begin(), cm.values.end(), out.mutable_data());
        return out;
      },
      py::arg("x"), "Pearson correlation between every pair of rows.");
  m.def(
      "difficulty_weights", [](const std::vector<double>& p) { return difficulty_weights(p); },
      py::arg("mean_performance"));

  // metrics
  m.def(
      "binary_metrics",
      [](std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
        return metrics_dict(binary_metrics(BinaryCounts{tp, fp, fn, tn}));
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"));
  m.def(
      "macro_metrics",
      [](const std::vector<int>& truth, const std::vector<int>& predicted, std::size_t classes) {
        if (truth.size() != predicted.size()) throw DataError("truth and predicted differ in length");
        ConfusionMatrix cm(classes);
        for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
        return metrics_dict(macro_metrics(cm));
      },
      py::arg("truth"), py::arg("predicted"), py::arg("classes") = 3);
}
