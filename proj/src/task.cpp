#include "trge/task.hpp"

#include "trge/error.hpp"

namespace trge {

std::size_t TaskId::group_index() const {
  if (value_ < 1) throw InvalidArgument("task id " + std::to_string(value_) + " has no group");
  return static_cast<std::size_t>(value_ - 1);
}

std::string to_string(TaskId id) { return std::to_string(id.value()); }

}  // namespace trge
