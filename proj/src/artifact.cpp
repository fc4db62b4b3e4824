#include "trge/artifact.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "trge/digest.hpp"
#include "trge/error.hpp"

namespace trge {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", m.values()}};
}

Matrix matrix_from(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("values").get<std::vector<double>>());
}

Vector vector_from(const json& j) { return Vector(j.get<std::vector<double>>()); }

json backbone_json(const FrozenBackbone& b) {
  json classes = json::array();
  for (const auto& [id, emb] : b.class_embeddings()) classes.push_back({id, emb.values()});
  return {{"projection", matrix_json(b.projection())},
          {"bias", b.bias().values()},
          {"class_embeddings", classes},
          {"seed", b.seed()}};
}

FrozenBackbone backbone_from(const json& j) {
  std::map<ClassId, Vector> classes;
  for (const json& entry : j.at("class_embeddings")) {
    classes.emplace(entry.at(0).get<ClassId>(), vector_from(entry.at(1)));
  }
  return FrozenBackbone::restore(matrix_from(j.at("projection")), vector_from(j.at("bias")),
                                 std::move(classes), j.at("seed").get<std::uint64_t>());
}

json group_json(const ExpertGroup& g) {
  json experts = json::array();
  for (const LowRankExpert& e : g.experts()) {
    experts.push_back({{"down", matrix_json(e.down)}, {"up", matrix_json(e.up)}, {"scale", e.scale}});
  }
  return {{"task", g.task_index()},
          {"frozen", g.frozen()},
          {"gate", matrix_json(g.gate())},
          {"experts", experts},
          {"parameter_hash", parameter_hash(g)}};
}

ExpertGroup group_from(const json& j) {
  std::vector<LowRankExpert> experts;
  for (const json& e : j.at("experts")) {
    experts.push_back(
        LowRankExpert{matrix_from(e.at("down")), matrix_from(e.at("up")), e.at("scale").get<double>()});
  }
  ExpertGroup g(std::move(experts), matrix_from(j.at("gate")), j.at("task").get<int>());
  if (j.at("frozen").get<bool>()) g.freeze();
  if (parameter_hash(g) != j.at("parameter_hash").get<std::string>()) {
    throw ArtifactError("expert group " + std::to_string(g.task_index()) +
                        " parameter hash mismatch");
  }
  return g;
}

json adapter_json(const TrgeAdapter& a) {
  const GroupShape& s = a.shape();
  json groups = json::array();
  for (const ExpertGroup& g : a.groups()) groups.push_back(group_json(g));
  json prototypes = json::array();
  for (std::size_t i = 0; i < a.prototypes().size(); ++i) {
    const DistanceStats& st = a.prototypes().stats()[i];
    prototypes.push_back({{"mean_feature", a.prototypes().prototypes()[i].values()},
                          {"distance_mean", st.mean},
                          {"distance_stddev", st.stddev}});
  }
  return {{"shape",
           {{"dim", s.dim},
            {"num_experts", s.num_experts},
            {"rank", s.rank},
            {"scale", s.scale},
            {"init_std", s.init_std}}},
          {"grouping", a.grouping()},
          {"groups", groups},
          {"prototypes", prototypes}};
}

TrgeAdapter adapter_from(const json& j) {
  const json& s = j.at("shape");
  GroupShape shape;
  shape.dim = s.at("dim").get<std::size_t>();
  shape.num_experts = s.at("num_experts").get<std::size_t>();
  shape.rank = s.at("rank").get<std::size_t>();
  shape.scale = s.at("scale").get<double>();
  shape.init_std = s.at("init_std").get<double>();
  TrgeAdapter a(shape, j.at("grouping").get<bool>());
  for (const json& g : j.at("groups")) a.push_group(group_from(g));
  for (const json& p : j.at("prototypes")) {
    a.mutable_prototypes().append(
        vector_from(p.at("mean_feature")),
        DistanceStats{p.at("distance_mean").get<double>(), p.at("distance_stddev").get<double>()});
  }
  return a;
}

json metrics_json(const MetricsReport& m) {
  json transfer = json::array();
  for (const auto& t : m.transfer) transfer.push_back(t ? json(*t) : json(nullptr));
  return {{"transfer", transfer},
          {"average", m.average},
          {"last", m.last},
          {"mean_transfer", m.mean_transfer},
          {"mean_average", m.mean_average},
          {"mean_last", m.mean_last},
          {"recognizer_accuracy", m.recognizer_accuracy},
          {"unseen_detection_accuracy",
           m.unseen_detection_accuracy ? json(*m.unseen_detection_accuracy) : json(nullptr)}};
}

MetricsReport metrics_from(const json& j) {
  MetricsReport m;
  for (const json& t : j.at("transfer")) {
    m.transfer.push_back(t.is_null() ? std::nullopt : std::optional<double>(t.get<double>()));
  }
  m.average = j.at("average").get<std::vector<double>>();
  m.last = j.at("last").get<std::vector<double>>();
  m.mean_transfer = j.at("mean_transfer").get<double>();
  m.mean_average = j.at("mean_average").get<double>();
  m.mean_last = j.at("mean_last").get<double>();
  m.recognizer_accuracy = j.at("recognizer_accuracy").get<std::vector<double>>();
  const json& u = j.at("unseen_detection_accuracy");
  if (!u.is_null()) m.unseen_detection_accuracy = u.get<double>();
  return m;
}

json frequency_json(const SelectionFrequency& f) {
  json rows = json::array();
  for (std::size_t t = 0; t < f.rows(); ++t) {
    json row = json::array();
    for (std::size_t g = 0; g < f.cols(); ++g) row.push_back(f.count(t, g));
    rows.push_back(row);
  }
  return rows;
}

SelectionFrequency frequency_from(const json& rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.at(0).size();
  SelectionFrequency f(n, m);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t g = 0; g < m; ++g) f.set(t, g, rows.at(t).at(g).get<std::uint64_t>());
  return f;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << content;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%6.2f", 100.0 * v);
  return buf;
}

}  // namespace

json to_json(const RunResult& r) {
  json accuracy = json::array();
  for (std::size_t i = 0; i <= r.accuracy.tasks() && r.accuracy.row_populated(i); ++i) {
    accuracy.push_back(r.accuracy.row(i));
  }
  json stages = json::array();
  for (const TrgeAdapter& s : r.stages) stages.push_back(adapter_json(s));
  json frequency = json::array();
  for (const SelectionFrequency& f : r.frequency) frequency.push_back(frequency_json(f));
  json reports = json::array();
  for (const TrainedTaskReport& rep : r.reports) {
    json log = json::array();
    for (const TrainLogRecord& l : rep.log) log.push_back({l.step, l.loss, l.train_acc});
    reports.push_back({{"task", rep.task},
                       {"final_loss", rep.final_loss},
                       {"train_accuracy", rep.train_accuracy},
                       {"parameters_added", rep.parameters_added},
                       {"log", log}});
  }
  json recognition = json::array();
  for (const RecognitionRecord& rec : r.recognition) {
    recognition.push_back({rec.after, rec.task, rec.truth.value(), rec.predicted.value()});
  }
  return {{"config", to_config_text(r.config)},
          {"backbone", backbone_json(r.backbone)},
          {"adapter", adapter_json(r.adapter)},
          {"stages", stages},
          {"accuracy", accuracy},
          {"metrics", metrics_json(r.metrics)},
          {"frequency", frequency},
          {"reports", reports},
          {"recognition", recognition}};
}

RunResult run_result_from_json(const json& p) {
  RunResult r;
  try {
    r.config = parse_config(p.at("config").get<std::string>());
    r.backbone = backbone_from(p.at("backbone"));
    r.adapter = adapter_from(p.at("adapter"));
    for (const json& s : p.at("stages")) r.stages.push_back(adapter_from(s));
    const json& acc = p.at("accuracy");
    if (acc.empty()) throw ArtifactError("artifact has no accuracy rows");
    r.accuracy = AccuracyMatrix(r.config.stream.tasks);
    if (acc.size() > r.config.stream.tasks + 1) throw ArtifactError("too many accuracy rows");
    for (std::size_t i = 0; i < acc.size(); ++i) {
      r.accuracy.set_row(i, acc.at(i).get<std::vector<double>>());
    }
    r.metrics = metrics_from(p.at("metrics"));
    for (const json& f : p.at("frequency")) r.frequency.push_back(frequency_from(f));
    for (const json& rep : p.at("reports")) {
      TrainedTaskReport t;
      t.task = rep.at("task").get<int>();
      t.final_loss = rep.at("final_loss").get<double>();
      t.train_accuracy = rep.at("train_accuracy").get<double>();
      t.parameters_added = rep.at("parameters_added").get<std::size_t>();
      for (const json& l : rep.at("log")) {
        t.log.push_back(TrainLogRecord{t.task, l.at(0).get<std::size_t>(), l.at(1).get<double>(),
                                       l.at(2).get<double>()});
      }
      r.reports.push_back(std::move(t));
    }
    for (const json& rec : p.at("recognition")) {
      r.recognition.push_back(RecognitionRecord{rec.at(0).get<std::size_t>(),
                                                rec.at(1).get<std::size_t>(),
                                                TaskId(rec.at(2).get<int>()),
                                                TaskId(rec.at(3).get<int>())});
    }
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed artifact: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ArtifactError(std::string("inconsistent artifact: ") + e.what());
  } catch (const ConfigError& e) {
    throw ArtifactError(std::string("artifact config: ") + e.what());
  }
  return r;
}

json make_envelope(const RunResult& result, bool partial) {
  json payload = to_json(result);
  return {{"format", kArtifactFormat},
          {"version", kArtifactVersion},
          {"partial", partial},
          {"checksum", sha256_hex(payload.dump())},
          {"payload", std::move(payload)}};
}

RunResult open_envelope(const json& envelope) {
  if (!envelope.is_object() || envelope.value("format", "") != kArtifactFormat) {
    throw ArtifactError("not a run artifact");
  }
  const int version = envelope.value("version", -1);
  if (version != kArtifactVersion) {
    throw ArtifactError("unsupported artifact version " + std::to_string(version) +
                        " (supported: " + std::to_string(kArtifactVersion) + ")");
  }
  if (envelope.value("partial", false)) throw ArtifactError("artifact is flagged partial");
  const json& payload = envelope.at("payload");
  if (sha256_hex(payload.dump()) != envelope.value("checksum", "")) {
    throw ArtifactError("artifact checksum mismatch (file modified or corrupted)");
  }
  return run_result_from_json(payload);
}

std::string render_metrics_table(const MetricsReport& m) {
  std::ostringstream out;
  out << "# Accuracy (%). Transfer averages rows 0..j-1 of column j, including the\n"
      << "# pre-training zero-shot row; Average is the column mean over rows 1..T.\n";
  out << std::left << std::setw(10) << "metric";
  for (std::size_t j = 1; j <= m.last.size(); ++j) out << std::right << std::setw(8) << ("T" + std::to_string(j));
  out << std::right << std::setw(8) << "mean" << '\n';

  out << std::left << std::setw(10) << "Transfer";
  for (const auto& t : m.transfer) out << std::right << std::setw(8) << (t ? percent(*t) : "-");
  out << std::right << std::setw(8) << percent(m.mean_transfer) << '\n';
  out << std::left << std::setw(10) << "Average";
  for (double v : m.average) out << std::right << std::setw(8) << percent(v);
  out << std::right << std::setw(8) << percent(m.mean_average) << '\n';
  out << std::left << std::setw(10) << "Last";
  for (double v : m.last) out << std::right << std::setw(8) << percent(v);
  out << std::right << std::setw(8) << percent(m.mean_last) << '\n';
  if (!m.recognizer_accuracy.empty()) {
    out << std::left << std::setw(10) << "TaskRec";
    double sum = 0.0;
    for (double v : m.recognizer_accuracy) {
      out << std::right << std::setw(8) << percent(v);
      sum += v;
    }
    out << std::right << std::setw(8) << percent(sum / static_cast<double>(m.recognizer_accuracy.size()))
        << '\n';
  }
  if (m.unseen_detection_accuracy) {
    out << "unseen detection accuracy: " << percent(*m.unseen_detection_accuracy) << '\n';
  }
  return out.str();
}

std::string metrics_records(const MetricsReport& m) {
  std::ostringstream out;
  for (std::size_t j = 0; j < m.last.size(); ++j) {
    json rec = {{"task", j + 1},
                {"transfer", m.transfer[j] ? json(*m.transfer[j]) : json(nullptr)},
                {"average", m.average[j]},
                {"last", m.last[j]}};
    if (j < m.recognizer_accuracy.size()) rec["recognizer_accuracy"] = m.recognizer_accuracy[j];
    out << rec.dump() << '\n';
  }
  json summary = {{"summary", true},
                  {"mean_transfer", m.mean_transfer},
                  {"mean_average", m.mean_average},
                  {"mean_last", m.mean_last},
                  {"transfer_includes_zero_shot_row", true},
                  {"unseen_detection_accuracy",
                   m.unseen_detection_accuracy ? json(*m.unseen_detection_accuracy) : json(nullptr)}};
  out << summary.dump() << '\n';
  return out.str();
}

std::string train_log_records(const RunResult& r) {
  std::ostringstream out;
  for (const TrainedTaskReport& rep : r.reports) {
    for (const TrainLogRecord& l : rep.log) {
      out << json{{"task", l.task}, {"step", l.step}, {"loss", l.loss}, {"train_acc", l.train_acc}}.dump()
          << '\n';
    }
  }
  return out.str();
}

void save_run(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / files::kArtifact, make_envelope(result).dump() + "\n");
  write_file(dir / files::kConfig, to_config_text(result.config));
  write_file(dir / files::kMetricsText, render_metrics_table(result.metrics));
  write_file(dir / files::kMetricsRecords, metrics_records(result.metrics));
  write_file(dir / files::kAccuracyCsv, result.accuracy.to_csv());
  if (!result.frequency.empty()) {
    write_file(dir / files::kFrequencyCsv, result.frequency.back().to_csv());
  }
  write_file(dir / files::kTrainLog, train_log_records(result));
}

void save_partial_run(const RunResult& result, const std::filesystem::path& dir,
                      const std::string& error) {
  std::filesystem::create_directories(dir);
  json envelope = make_envelope(result, true);
  envelope["error"] = error;
  write_file(dir / files::kArtifact, envelope.dump() + "\n");
  write_file(dir / files::kConfig, to_config_text(result.config));
  write_file(dir / files::kTrainLog, train_log_records(result));
}

RunResult load_run(const std::filesystem::path& path) {
  const std::filesystem::path file =
      std::filesystem::is_directory(path) ? path / files::kArtifact : path;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ArtifactError("cannot open artifact " + file.string());
  json envelope;
  try {
    envelope = json::parse(in);
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("artifact is not valid JSON: ") + e.what());
  }
  return open_envelope(envelope);
}

}  // namespace trge
