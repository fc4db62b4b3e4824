#include "trge/fusion.hpp"

#include <atomic>

#include <spdlog/spdlog.h>

#include "trge/error.hpp"

namespace trge {

double fusion_weight(TaskId id, const FusionConfig& cfg) {
  if (!id.is_unseen()) return 1.0;
  const double w = cfg.unseen_weight();
  if (w > 1.0) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      spdlog::warn("unseen-path adapter weight t*alpha = {} exceeds 1 (uncapped)", w);
    }
  }
  return w;
}

Vector fuse(const Vector& y_pre, const Vector& y_m, TaskId id, const FusionConfig& cfg) {
  if (y_pre.size() != y_m.size()) throw InvalidArgument("fuse: dimension mismatch");
  const double w = fusion_weight(id, cfg);
  Vector out = y_pre;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * y_m[i];
  return out;
}

}  // namespace trge
