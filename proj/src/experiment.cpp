#include "trge/experiment.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>

#include "trge/error.hpp"

namespace trge {

TrgeAdapter RunResult::stage(std::size_t after) const {
  if (after == 0) return TrgeAdapter(adapter.shape(), adapter.grouping());
  if (adapter.grouping()) return adapter.prefix(after);
  if (after > stages.size()) throw InvalidArgument("no stored adapter stage " + std::to_string(after));
  return stages[after - 1];
}

std::unique_ptr<Recognizer> make_recognizer(const RunConfig& cfg, const TaskStream& stream,
                                            const TrgeAdapter& adapter, std::size_t after) {
  switch (cfg.recognizer) {
    case RecognizerKind::kOracle:
      return std::make_unique<OracleRecognizer>();
    case RecognizerKind::kPrototype:
      return std::make_unique<PrototypeRecognizer>(adapter.prototypes(), cfg.unseen_margin);
    case RecognizerKind::kSemantic: {
      std::vector<TaskDescription> descriptions;
      for (const TaskData& task : stream.tasks) {
        descriptions.push_back(describe_task(
            task.index, std::set<ClassId>(task.class_ids.begin(), task.class_ids.end()),
            stream.class_names));
      }
      return std::make_unique<SemanticRecognizer>(std::move(descriptions),
                                                  cfg.recognizer_error_rate,
                                                  mix_seed(cfg.seed, 100 + after));
    }
  }
  throw InvalidArgument("unknown recognizer kind");
}

namespace {

std::vector<double> evaluate_row(const RunConfig& cfg, const TaskStream& stream,
                                 const FrozenBackbone& backbone, const TrgeAdapter& adapter,
                                 std::size_t after, const EvaluationHooks& hooks) {
  auto recognizer = make_recognizer(cfg, stream, adapter, after);
  return evaluate(adapter, backbone, stream, after, *recognizer, cfg.routing, hooks);
}

}  // namespace

RunResult run_experiment(const RunConfig& config, const GeneratedBenchmark* benchmark) {
  RunResult result;
  run_experiment_into(config, result, benchmark);
  return result;
}

void run_experiment_into(const RunConfig& config, RunResult& result,
                         const GeneratedBenchmark* benchmark) {
  validate(config);
  const RunConfig cfg = config.with_derived_seeds();

  GeneratedBenchmark generated;
  if (benchmark == nullptr) {
    generated = generate_stream(cfg.stream);
    benchmark = &generated;
  }
  const TaskStream& stream = benchmark->stream;
  const std::size_t T = stream.tasks.size();

  result = RunResult{};
  result.config = config;
  result.backbone = benchmark->backbone;
  result.adapter = TrgeAdapter(cfg.group_shape(), cfg.routing.grouping);
  result.accuracy = AccuracyMatrix(T);

  EvaluationHooks zero_hooks;
  zero_hooks.recognition = &result.recognition;
  result.accuracy.set_row(
      0, evaluate_row(cfg, stream, result.backbone, result.adapter, 0, zero_hooks));

  for (std::size_t t = 1; t <= T; ++t) {
    const TaskData& task = stream.tasks[t - 1];
    const std::vector<ClassId> candidates = training_candidates(stream, t);
    result.reports.push_back(
        train_task(result.adapter, result.backbone, task, candidates, cfg.train, cfg.routing));
    if (!result.adapter.grouping()) result.stages.push_back(result.adapter);

    SelectionFrequency frequency(T, T);
    EvaluationHooks hooks;
    hooks.frequency = &frequency;
    hooks.recognition = &result.recognition;
    result.accuracy.set_row(
        t, evaluate_row(cfg, stream, result.backbone, result.adapter, t, hooks));
    result.frequency.push_back(std::move(frequency));
  }

  result.metrics = metrics(result.accuracy);
  fill_recognition_metrics(result.metrics, result.recognition, T);
}

AccuracyMatrix reevaluate(const RunResult& result) {
  const RunConfig cfg = result.config.with_derived_seeds();
  const GeneratedBenchmark benchmark = generate_stream(cfg.stream);
  const std::size_t T = benchmark.stream.tasks.size();
  AccuracyMatrix a(T);
  for (std::size_t after = 0; after <= T; ++after) {
    const TrgeAdapter adapter = result.stage(after);
    a.set_row(after, evaluate_row(cfg, benchmark.stream, result.backbone, adapter, after, {}));
  }
  return a;
}

AblationAxis parse_axis(const std::string& name) {
  if (name == "grouping") return AblationAxis::kGrouping;
  if (name == "inter_router") return AblationAxis::kInterRouter;
  if (name == "recognizer") return AblationAxis::kRecognizer;
  if (name == "fusion") return AblationAxis::kFusion;
  if (name == "N_e" || name == "num_experts") return AblationAxis::kNumExperts;
  if (name == "theta" || name == "θ") return AblationAxis::kTheta;
  if (name == "alpha" || name == "α") return AblationAxis::kAlpha;
  throw ConfigError("axis", "unknown ablation axis '" + name +
                                "' (grouping, inter_router, recognizer, fusion, N_e, theta, alpha)");
}

std::string to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::kGrouping:
      return "grouping";
    case AblationAxis::kInterRouter:
      return "inter_router";
    case AblationAxis::kRecognizer:
      return "recognizer";
    case AblationAxis::kFusion:
      return "fusion";
    case AblationAxis::kNumExperts:
      return "N_e";
    case AblationAxis::kTheta:
      return "theta";
    case AblationAxis::kAlpha:
      return "alpha";
  }
  return "?";
}

void apply_axis(RunConfig& cfg, AblationAxis axis, const std::string& value) {
  switch (axis) {
    case AblationAxis::kGrouping:
      apply_overrides(cfg, {{"grouping", value}, {"inter_router", "false"}});
      break;
    case AblationAxis::kInterRouter:
      apply_overrides(cfg, {{"grouping", "true"}, {"inter_router", value}});
      break;
    case AblationAxis::kRecognizer:
      apply_overrides(cfg, {{"recognizer", value}});
      break;
    case AblationAxis::kFusion:
      apply_overrides(cfg, {{"dynamic_fusion", value}});
      break;
    case AblationAxis::kNumExperts:
      apply_overrides(cfg, {{"num_experts", value}});
      break;
    case AblationAxis::kTheta:
      apply_overrides(cfg, {{"theta", value}});
      break;
    case AblationAxis::kAlpha:
      apply_overrides(cfg, {{"alpha", value}});
      break;
  }
  validate(cfg);
}

AblationTable run_ablation(const RunConfig& cfg, AblationAxis axis,
                           const std::vector<std::string>& values, std::size_t seeds) {
  if (values.empty()) throw ConfigError("values", "at least one value is required");
  if (seeds == 0) throw ConfigError("seeds", "must be positive");
  AblationTable table{axis, seeds, {}};
  for (const std::string& value : values) {
    AblationRow row{value};
    for (std::size_t s = 0; s < seeds; ++s) {
      RunConfig run = cfg;
      run.seed = cfg.seed + s;
      apply_axis(run, axis, value);
      const RunResult result = run_experiment(run);
      row.transfer += result.metrics.mean_transfer;
      row.average += result.metrics.mean_average;
      row.last += result.metrics.mean_last;
    }
    const double n = static_cast<double>(seeds);
    row.transfer /= n;
    row.average /= n;
    row.last /= n;
    table.rows.push_back(row);
  }
  return table;
}

namespace {

std::string fixed(double v, bool sign = false) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), sign ? "%+.2f" : "%.2f", v);
  return buf;
}

}  // namespace

std::string AblationTable::render() const {
  std::ostringstream out;
  out << "# axis " << to_string(axis) << ", mean over " << seeds << " seed(s), accuracy (%)\n";
  out << std::left << std::setw(14) << "value" << std::right << std::setw(10) << "Transfer"
      << std::setw(8) << "Δ" << std::setw(10) << "Average" << std::setw(8) << "Δ"
      << std::setw(10) << "Last" << std::setw(8) << "Δ" << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const AblationRow& r = rows[i];
    const AblationRow& base = rows.front();
    auto delta = [&](double v, double b) { return i == 0 ? std::string("") : fixed(100.0 * (v - b), true); };
    out << std::left << std::setw(14) << r.value << std::right << std::setw(10)
        << fixed(100.0 * r.transfer) << std::setw(8) << delta(r.transfer, base.transfer)
        << std::setw(10) << fixed(100.0 * r.average) << std::setw(8)
        << delta(r.average, base.average) << std::setw(10) << fixed(100.0 * r.last)
        << std::setw(8) << delta(r.last, base.last) << '\n';
  }
  return out.str();
}

std::string AblationTable::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "value,transfer,delta_transfer,average,delta_average,last,delta_last\n";
  for (const AblationRow& r : rows) {
    const AblationRow& b = rows.front();
    out << r.value << ',' << r.transfer << ',' << (r.transfer - b.transfer) << ',' << r.average
        << ',' << (r.average - b.average) << ',' << r.last << ',' << (r.last - b.last) << '\n';
  }
  return out.str();
}

}  // namespace trge
