#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "trge/adapter.hpp"
#include "trge/benchmark.hpp"
#include "trge/config.hpp"
#include "trge/training.hpp"

namespace trge {

struct RunResult {
  RunConfig config;
  FrozenBackbone backbone;
  TrgeAdapter adapter;
  // Shared mode only: the adapter after each task, since its single group
  // keeps changing. Grouping mode recovers earlier states with prefix().
  std::vector<TrgeAdapter> stages;
  AccuracyMatrix accuracy;
  MetricsReport metrics;
  // Selection counts per evaluation row 1..T; each is T × T.
  std::vector<SelectionFrequency> frequency;
  std::vector<TrainedTaskReport> reports;
  std::vector<RecognitionRecord> recognition;

  // Adapter state after `after` tasks.
  TrgeAdapter stage(std::size_t after) const;
};

std::unique_ptr<Recognizer> make_recognizer(const RunConfig& cfg, const TaskStream& stream,
                                            const TrgeAdapter& adapter, std::size_t after);

// The full continual pipeline: zero-shot row, then train + evaluate per task.
// `benchmark` may supply a pre-generated stream (it must match cfg.stream).
RunResult run_experiment(const RunConfig& cfg, const GeneratedBenchmark* benchmark = nullptr);
// Same, filling `result` as it goes so a failed run leaves its completed
// stages behind.
void run_experiment_into(const RunConfig& cfg, RunResult& result,
                         const GeneratedBenchmark* benchmark = nullptr);

// Recomputes every evaluation row from stored parameters. Needs the stream,
// which is regenerated from the stored configuration.
AccuracyMatrix reevaluate(const RunResult& result);

enum class AblationAxis { kGrouping, kInterRouter, kRecognizer, kFusion, kNumExperts, kTheta, kAlpha };

// Accepts grouping, inter_router, recognizer, fusion, N_e (num_experts),
// theta (θ), alpha (α).
AblationAxis parse_axis(const std::string& name);
std::string to_string(AblationAxis axis);

// Sets one axis value. Boolean axes take on/off; the grouping axis also
// disables the inter-group router so its two rows isolate grouping.
void apply_axis(RunConfig& cfg, AblationAxis axis, const std::string& value);

struct AblationRow {
  std::string value;
  double transfer = 0.0;
  double average = 0.0;
  double last = 0.0;
};

struct AblationTable {
  AblationAxis axis;
  std::size_t seeds = 1;
  std::vector<AblationRow> rows;  // means over seeds

  // Columns value, Transfer, ΔTransfer, Average, ΔAverage, Last, ΔLast with
  // deltas relative to the first row.
  std::string render() const;
  std::string to_csv() const;
};

// Paired runs: every value is run on seeds cfg.seed .. cfg.seed + seeds − 1,
// so all values share the same streams.
AblationTable run_ablation(const RunConfig& cfg, AblationAxis axis,
                           const std::vector<std::string>& values, std::size_t seeds = 1);

}  // namespace trge
