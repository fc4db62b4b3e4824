#include "trge/recognition.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

#include <spdlog/spdlog.h>

#include "trge/error.hpp"

namespace trge {

std::size_t count_tokens(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char ch : text) {
    const bool space = ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r';
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

TaskDescription describe_task(int task_index, const std::set<ClassId>& class_ids,
                              const std::map<ClassId, std::string>& names) {
  if (class_ids.empty()) throw InvalidArgument("describe_task: empty class set");
  std::string text = "Task containing classes:";
  std::size_t tokens = count_tokens(text);
  bool first = true;
  for (ClassId c : class_ids) {
    const auto it = names.find(c);
    if (it == names.end()) {
      throw InvalidArgument("describe_task: no name for class " + std::to_string(c));
    }
    if (tokens < kMaxDescriptionTokens) {
      // The separator comma attaches to the previous name, so only the name's
      // own tokens are added.
      const std::string word = (first ? " " : ", ") + it->second;
      const std::size_t added = count_tokens(it->second);
      if (tokens + added <= kMaxDescriptionTokens) {
        text += word;
        tokens += added;
      } else {
        tokens = kMaxDescriptionTokens;
      }
    }
    first = false;
  }
  return TaskDescription{task_index, std::move(text), class_ids};
}

TaskId recognize_oracle(const Sample& sample, std::size_t tasks_learned) {
  if (sample.task >= 1 && static_cast<std::size_t>(sample.task) <= tasks_learned) {
    return TaskId(sample.task);
  }
  return TaskId::unseen();
}

TaskId recognize_by_prototype(const PrototypeStore& store, const Vector& feature,
                              double unseen_margin) {
  if (store.empty()) throw InvalidArgument("recognize_by_prototype: empty prototype store");
  std::size_t nearest = 0;
  double nearest_distance = euclidean(feature, store.prototypes()[0]);
  for (std::size_t i = 1; i < store.size(); ++i) {
    const double dist = euclidean(feature, store.prototypes()[i]);
    if (dist < nearest_distance) {
      nearest = i;
      nearest_distance = dist;
    }
  }
  const DistanceStats& stats = store.stats()[nearest];
  if (nearest_distance > stats.mean + unseen_margin * stats.stddev) return TaskId::unseen();
  return TaskId(static_cast<int>(nearest) + 1);
}

TaskId recognize_semantic(std::span<const TaskDescription> descriptions, const Sample& sample,
                          double error_rate, Rng& rng) {
  if (!(error_rate >= 0.0 && error_rate < 1.0)) {
    throw InvalidArgument("recognize_semantic: error_rate must lie in [0, 1)");
  }
  TaskId answer = TaskId::unseen();
  for (const TaskDescription& d : descriptions) {
    if (!d.class_ids.contains(sample.label)) continue;
    if (d.task_index == sample.task) {
      answer = TaskId(d.task_index);
      break;
    }
    if (answer.is_unseen() || d.task_index < answer.value()) answer = TaskId(d.task_index);
  }

  const double coin = rng.uniform();
  if (coin < error_rate) {
    // Wrong answers: -1 and every described task except the correct one.
    std::vector<TaskId> wrong;
    if (!answer.is_unseen()) wrong.push_back(TaskId::unseen());
    for (const TaskDescription& d : descriptions)
      if (TaskId(d.task_index) != answer) wrong.push_back(TaskId(d.task_index));
    if (!wrong.empty()) answer = wrong[rng.uniform_index(wrong.size())];
  }
  return answer;
}

TaskId OracleRecognizer::recognize(const Sample& sample, const Vector&,
                                   std::size_t tasks_learned) {
  return recognize_oracle(sample, tasks_learned);
}

TaskId PrototypeRecognizer::recognize(const Sample&, const Vector& feature,
                                      std::size_t tasks_learned) {
  if (tasks_learned == 0) return TaskId::unseen();
  if (store_->size() != tasks_learned) {
    throw InvalidArgument("prototype recognizer: store size does not match tasks learned");
  }
  return recognize_by_prototype(*store_, feature, unseen_margin_);
}

SemanticRecognizer::SemanticRecognizer(std::vector<TaskDescription> descriptions,
                                       double error_rate, std::uint64_t seed)
    : descriptions_(std::move(descriptions)), error_rate_(error_rate), rng_(seed) {}

TaskId SemanticRecognizer::recognize(const Sample& sample, const Vector&,
                                     std::size_t tasks_learned) {
  const std::size_t visible = std::min(tasks_learned, descriptions_.size());
  return recognize_semantic(std::span(descriptions_).first(visible), sample, error_rate_, rng_);
}

std::string_view recognition_instruction() {
  return "You are given an image and descriptions of previously learned tasks. "
         "Reply with only the integer index of the task the image belongs to, "
         "or -1 if it belongs to none of them.";
}

nlohmann::json build_recognition_request(std::span<const TaskDescription> descriptions,
                                         std::string_view image_ref) {
  nlohmann::json request;
  request["descriptions"] = nlohmann::json::array();
  for (const TaskDescription& d : descriptions) {
    request["descriptions"].push_back({{"task", d.task_index}, {"text", d.text}});
  }
  request["image_ref"] = image_ref;
  request["instruction"] = recognition_instruction();
  return request;
}

TaskId parse_recognition_response(std::string_view response, std::size_t task_count) {
  auto trimmed = response;
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front())))
    trimmed.remove_prefix(1);
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
    trimmed.remove_suffix(1);

  int value = 0;
  const auto [end, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
  const bool parsed = ec == std::errc() && end == trimmed.data() + trimmed.size() &&
                      !trimmed.empty() && trimmed.front() != '+';
  if (parsed && (value == -1 || (value >= 1 && static_cast<std::size_t>(value) <= task_count))) {
    return TaskId(value);
  }
  spdlog::warn("unparseable task recognition response '{}', treating as unseen", response);
  return TaskId::unseen();
}

}  // namespace trge
