#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "trge/backbone.hpp"
#include "trge/numerics.hpp"

namespace trge {

// 1-based task identifier; -1 marks a sample from a task not yet learned.
class TaskId {
 public:
  constexpr TaskId() = default;
  constexpr explicit TaskId(int value) : value_(value) {}
  static constexpr TaskId unseen() { return TaskId(-1); }

  constexpr int value() const noexcept { return value_; }
  constexpr bool is_unseen() const noexcept { return value_ == -1; }
  // Zero-based group index for a seen task.
  std::size_t group_index() const;

  friend constexpr bool operator==(TaskId, TaskId) = default;

 private:
  int value_ = -1;
};

std::string to_string(TaskId id);

// Labelled raw input. `task` is the 1-based index of the task that generated it.
struct Sample {
  Vector x;
  ClassId label = 0;
  int task = 0;
};

// Affine input-space shift applied to every sample of a task.
struct DomainTransform {
  Matrix rotation;  // d_in × d_in, orthogonal
  double scale = 1.0;
  Vector bias;      // d_in
};

struct TaskData {
  int index = 0;                   // 1-based
  std::vector<ClassId> class_ids;  // ascending, unique
  DomainTransform domain;
  std::vector<Sample> train;
  std::vector<Sample> test;
};

}  // namespace trge
