#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trge/inter_router.hpp"
#include "trge/numerics.hpp"
#include "trge/task.hpp"

namespace trge {

inline constexpr std::size_t kMaxDescriptionTokens = 200;

struct TaskDescription {
  int task_index = 0;
  std::string text;
  std::set<ClassId> class_ids;
};

// "Task containing classes: <names sorted by class id>", truncated to
// kMaxDescriptionTokens whitespace-separated tokens. class_ids are kept whole.
TaskDescription describe_task(int task_index, const std::set<ClassId>& class_ids,
                              const std::map<ClassId, std::string>& names);

std::size_t count_tokens(std::string_view text);

// Ground truth: the sample's task if it has been learned, otherwise unseen.
TaskId recognize_oracle(const Sample& sample, std::size_t tasks_learned);

// Nearest prototype, or unseen when the distance exceeds
// mean + unseen_margin · stddev of that task's training distances.
TaskId recognize_by_prototype(const PrototypeStore& store, const Vector& feature,
                              double unseen_margin);

// Class-membership stand-in for multimodal task recognition. With probability
// error_rate the answer is replaced by a uniformly drawn wrong one from
// {-1, 1..t}. One coin is drawn per call whatever the outcome.
TaskId recognize_semantic(std::span<const TaskDescription> descriptions, const Sample& sample,
                          double error_rate, Rng& rng);

// Common interface used by the evaluation harness.
class Recognizer {
 public:
  virtual ~Recognizer() = default;
  // `feature` is the frozen backbone embedding of sample.x; `tasks_learned`
  // is the number of trained groups.
  virtual TaskId recognize(const Sample& sample, const Vector& feature,
                           std::size_t tasks_learned) = 0;
  virtual std::string name() const = 0;
};

class OracleRecognizer final : public Recognizer {
 public:
  TaskId recognize(const Sample& sample, const Vector& feature, std::size_t tasks_learned) override;
  std::string name() const override { return "oracle"; }
};

class PrototypeRecognizer final : public Recognizer {
 public:
  PrototypeRecognizer(const PrototypeStore& store, double unseen_margin)
      : store_(&store), unseen_margin_(unseen_margin) {}
  TaskId recognize(const Sample& sample, const Vector& feature, std::size_t tasks_learned) override;
  std::string name() const override { return "prototype"; }

 private:
  const PrototypeStore* store_;
  double unseen_margin_;
};

class SemanticRecognizer final : public Recognizer {
 public:
  SemanticRecognizer(std::vector<TaskDescription> descriptions, double error_rate,
                     std::uint64_t seed);
  TaskId recognize(const Sample& sample, const Vector& feature, std::size_t tasks_learned) override;
  std::string name() const override { return "semantic"; }

 private:
  std::vector<TaskDescription> descriptions_;
  double error_rate_;
  Rng rng_;
};

// Request payload for a multimodal model answering "which task does this
// image belong to".
nlohmann::json build_recognition_request(std::span<const TaskDescription> descriptions,
                                         std::string_view image_ref);

// The instruction string embedded in every request.
std::string_view recognition_instruction();

// Strict parse of the model reply: a single integer token that is -1 or a
// valid task index. Anything else is logged and read as unseen.
TaskId parse_recognition_response(std::string_view response, std::size_t task_count);

}  // namespace trge
