#pragma once

#include <cstddef>

#include "trge/numerics.hpp"
#include "trge/task.hpp"

namespace trge {

struct FusionConfig {
  double alpha = 0.025;           // adapter weight growth per learned task
  std::size_t tasks_learned = 0;

  // Adapter weight on the unseen path.
  double unseen_weight() const noexcept { return static_cast<double>(tasks_learned) * alpha; }
};

// Adapter weight applied to y_m for the given recognition outcome.
double fusion_weight(TaskId id, const FusionConfig& cfg);

// Seen: y_pre + y_m. Unseen: y_pre + (t·α)·y_m.
Vector fuse(const Vector& y_pre, const Vector& y_m, TaskId id, const FusionConfig& cfg);

}  // namespace trge
