#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "trge/artifact.hpp"
#include "trge/error.hpp"

namespace py = pybind11;
using namespace trge;

namespace {

Vector to_vector(const std::vector<double>& v) { return Vector(v); }

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  py::list transfer;
  for (const auto& t : m.transfer) transfer.append(t ? py::cast(*t) : py::none());
  d["transfer"] = transfer;
  d["average"] = m.average;
  d["last"] = m.last;
  d["mean_transfer"] = m.mean_transfer;
  d["mean_average"] = m.mean_average;
  d["mean_last"] = m.mean_last;
  d["recognizer_accuracy"] = m.recognizer_accuracy;
  d["unseen_detection_accuracy"] =
      m.unseen_detection_accuracy ? py::cast(*m.unseen_detection_accuracy) : py::none();
  return d;
}

std::vector<std::vector<double>> matrix_rows(const AccuracyMatrix& a) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i <= a.tasks(); ++i) rows.push_back(a.row(i));
  return rows;
}

py::dict result_dict(const RunResult& r) {
  py::dict d;
  d["config"] = to_config_text(r.config);
  d["accuracy"] = matrix_rows(r.accuracy);
  d["metrics"] = metrics_dict(r.metrics);
  d["selection_frequency_csv"] = r.frequency.empty() ? "" : r.frequency.back().to_csv();
  std::vector<std::string> hashes;
  for (const ExpertGroup& g : r.adapter.groups()) hashes.push_back(parameter_hash(g));
  d["group_hashes"] = hashes;
  return d;
}

RunConfig make_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
  RunConfig cfg = parse_config(text);
  apply_overrides(cfg, overrides);
  validate(cfg);
  return cfg;
}

py::dict gate_dict(const InterGateDecision& d) {
  py::dict out;
  out["weights"] = d.weights.values();
  out["main"] = d.main ? py::cast(*d.main) : py::none();
  out["assistants"] = d.assistants;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Task-routed expert groups for continual learning";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ArtifactError>(m, "ArtifactError", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_RuntimeError);
  py::register_exception<GenerationInfeasible>(m, "GenerationInfeasible", PyExc_RuntimeError);

  m.def("default_config", []() { return to_config_text(RunConfig{}); },
        "Every configuration key with its default value.");
  m.def("config_keys", []() {
    std::vector<std::pair<std::string, std::string>> keys;
    for (const ConfigKey& k : config_schema()) keys.emplace_back(k.name, k.description);
    return keys;
  });
  m.def(
      "run",
      [](const std::string& config, const std::map<std::string, std::string>& overrides) {
        const RunConfig cfg = make_config(config, overrides);
        py::gil_scoped_release release;
        RunResult r = run_experiment(cfg);
        py::gil_scoped_acquire acquire;
        return result_dict(r);
      },
      py::arg("config") = "", py::arg("overrides") = std::map<std::string, std::string>{},
      "Runs a full continual experiment from config text plus key overrides.");
  m.def(
      "run_to_dir",
      [](const std::string& config, const std::filesystem::path& out,
         const std::map<std::string, std::string>& overrides) {
        const RunConfig cfg = make_config(config, overrides);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
          save_run(r, out);
        }
        return result_dict(r);
      },
      py::arg("config"), py::arg("out"),
      py::arg("overrides") = std::map<std::string, std::string>{});
  m.def("load_run", [](const std::filesystem::path& path) { return result_dict(load_run(path)); });
  m.def(
      "ablate",
      [](const std::string& config, const std::string& axis, const std::vector<std::string>& values,
         std::size_t seeds) {
        const RunConfig cfg = make_config(config, {});
        const AblationAxis a = parse_axis(axis);
        py::gil_scoped_release release;
        const AblationTable t = run_ablation(cfg, a, values, seeds);
        py::gil_scoped_acquire acquire;
        py::list rows;
        for (const AblationRow& r : t.rows) {
          py::dict row;
          row["value"] = r.value;
          row["transfer"] = r.transfer;
          row["average"] = r.average;
          row["last"] = r.last;
          rows.append(row);
        }
        return rows;
      },
      py::arg("config"), py::arg("axis"), py::arg("values"), py::arg("seeds") = 1);
  m.def("metrics", [](const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw InvalidArgument("metrics: no rows");
    AccuracyMatrix a(rows.size() - 1);
    for (std::size_t i = 0; i < rows.size(); ++i) a.set_row(i, rows[i]);
    return metrics_dict(metrics(a));
  }, "Transfer/Average/Last from rows 0..T of an accuracy matrix.");

  m.def("softmax", [](const std::vector<double>& v) { return softmax(to_vector(v)).values(); });
  m.def("relevance", [](const std::vector<std::vector<double>>& prototypes,
                        const std::vector<double>& x) {
    std::vector<Vector> p;
    for (const auto& row : prototypes) p.push_back(to_vector(row));
    return relevance(p, to_vector(x)).values();
  });
  m.def("scale_and_select", [](const std::vector<double>& raw, std::size_t main, double theta) {
    return gate_dict(scale_and_select(to_vector(raw), main, theta));
  });
  m.def("select_unseen", [](const std::vector<double>& raw, std::size_t k_groups) {
    return gate_dict(select_unseen(to_vector(raw), k_groups));
  });
  m.def("fuse", [](const std::vector<double>& y_pre, const std::vector<double>& y_m, bool seen,
                   std::size_t tasks_learned, double alpha) {
    const TaskId id = seen ? TaskId(1) : TaskId::unseen();
    return fuse(to_vector(y_pre), to_vector(y_m), id, FusionConfig{alpha, tasks_learned}).values();
  }, py::arg("y_pre"), py::arg("y_m"), py::arg("seen"), py::arg("tasks_learned"),
     py::arg("alpha") = 0.025);
}
