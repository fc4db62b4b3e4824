#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trge/adapter.hpp"
#include "trge/backbone.hpp"
#include "trge/recognition.hpp"
#include "trge/task.hpp"

namespace trge {

enum class StreamMode { kMtil, kMcil };

std::string to_string(StreamMode mode);
StreamMode parse_stream_mode(const std::string& text);

struct StreamConfig {
  StreamMode mode = StreamMode::kMtil;
  std::size_t tasks = 5;
  std::size_t classes_per_task = 4;
  double class_overlap = 0.25;  // MTIL: fraction of classes reused from the previous task
  std::size_t input_dim = 32;
  std::size_t feature_dim = 16;
  std::size_t train_samples = 200;
  std::size_t test_samples = 200;
  double shift_strength = 1.0;     // overall magnitude of every domain shift
  double shared_shift = 0.6;       // weight of the shift component common to all tasks
  double domain_separation = 1.0;  // weight of each domain family's own offset
  // Tasks t and t + F share a domain family when F > 0; 0 gives every task its
  // own family.
  std::size_t domain_families = 0;
  double task_jitter = 0.0;  // per-task deviation from its family's domain
  double rotation = 1.5;           // per-task rotation angle scale (radians at strength 1)
  double anchor_gain = 1.2;        // pre-activation norm of class anchors
  double noise = 0.4;              // isotropic input noise std
  std::size_t max_retries = 16;
  std::uint64_t seed = 0;

  friend bool operator==(const StreamConfig&, const StreamConfig&) = default;
};

struct TaskStream {
  StreamMode mode = StreamMode::kMtil;
  std::vector<TaskData> tasks;
  std::map<ClassId, std::string> class_names;
  // Sub-seed attempt that passed the quality checks.
  std::size_t attempts = 1;
};

struct GeneratedBenchmark {
  TaskStream stream;
  FrozenBackbone backbone;
};

// Synthetic multi-domain stream sharing class anchors with a frozen
// backbone. Every task is checked for zero-shot accuracy above chance and,
// for positive shift, below a nearest-class-mean fitted bound.
GeneratedBenchmark generate_stream(const StreamConfig& cfg);

// Zero-shot test accuracy of the frozen backbone on one task.
double zero_shot_accuracy(const FrozenBackbone& backbone, const TaskData& task);

// Classes the classifier chooses among when evaluating task `eval_task`
// (1-based) after `tasks_learned` tasks. MTIL: that task's classes. MCIL:
// the union of learned classes, plus the evaluated task's own classes when it
// is not learned yet.
std::vector<ClassId> evaluation_candidates(const TaskStream& stream, std::size_t eval_task,
                                           std::size_t tasks_learned);
// Classes the loss is computed over when training task `task`.
std::vector<ClassId> training_candidates(const TaskStream& stream, std::size_t task);

// Row 0 holds pre-training zero-shot accuracy; row i the accuracy after task i.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::size_t tasks)
      : tasks_(tasks), values_((tasks + 1) * tasks), filled_((tasks + 1) * tasks, false) {}

  std::size_t tasks() const noexcept { return tasks_; }
  // after: 0..T, task: 1..T
  double at(std::size_t after, std::size_t task) const;
  void set(std::size_t after, std::size_t task, double value);
  bool populated() const;
  bool row_populated(std::size_t after) const;
  void set_row(std::size_t after, const std::vector<double>& row);
  std::vector<double> row(std::size_t after) const;

  std::string to_csv() const;

  friend bool operator==(const AccuracyMatrix&, const AccuracyMatrix&) = default;

 private:
  std::size_t index(std::size_t after, std::size_t task) const;
  std::size_t tasks_ = 0;
  std::vector<double> values_;
  std::vector<bool> filled_;
};

struct MetricsReport {
  std::vector<std::optional<double>> transfer;  // empty for task 1
  std::vector<double> average;
  std::vector<double> last;
  double mean_transfer = 0.0;
  double mean_average = 0.0;
  double mean_last = 0.0;
  // Filled by the evaluation harness, not by metrics().
  std::vector<double> recognizer_accuracy;
  std::optional<double> unseen_detection_accuracy;
};

// Transfer_j: mean of rows 0..j−1 in column j (j ≥ 2). Average_j: mean of
// rows 1..T. Last_j: row T.
MetricsReport metrics(const AccuracyMatrix& a);

struct RecognitionRecord {
  std::size_t after = 0;  // evaluation row
  std::size_t task = 0;   // evaluated task, 1-based
  TaskId truth;
  TaskId predicted;
};

// Per-task recognition accuracy over the final row and unseen-detection
// accuracy over all rows where the evaluated task was not yet learned.
void fill_recognition_metrics(MetricsReport& report, const std::vector<RecognitionRecord>& log,
                              std::size_t tasks);

struct EvaluationHooks {
  SelectionFrequency* frequency = nullptr;          // rows: evaluated task
  std::vector<RecognitionRecord>* recognition = nullptr;
  // Called once per sample with the evaluated task (1-based) and its decision.
  std::function<void(std::size_t, const AdapterOutput&)> on_decision;
};

// Accuracy of `adapter` on every task's test set, recognising task identity
// with `recognizer`. `after` is the number of tasks the adapter has learned.
std::vector<double> evaluate(const TrgeAdapter& adapter, const FrozenBackbone& backbone,
                             const TaskStream& stream, std::size_t after, Recognizer& recognizer,
                             const RoutingConfig& routing, const EvaluationHooks& hooks = {});

}  // namespace trge
