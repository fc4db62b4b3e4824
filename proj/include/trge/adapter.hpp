#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "trge/backbone.hpp"
#include "trge/fusion.hpp"
#include "trge/inter_router.hpp"
#include "trge/moe.hpp"
#include "trge/task.hpp"

namespace trge {

struct RoutingConfig {
  std::size_t top_k = 2;       // experts per group
  double theta = 0.3;          // assistant relevance threshold
  std::size_t k_groups = 2;    // groups kept for unseen samples
  double alpha = 0.025;        // unseen-path growth factor
  bool grouping = true;        // false: one shared group trained on every task
  bool inter_router = true;    // false: seen samples use the main group only
  bool dynamic_fusion = true;  // false: unseen samples use the frozen output only
  bool train_with_assistants = true;

  friend bool operator==(const RoutingConfig&, const RoutingConfig&) = default;
};

struct AdapterOutput {
  Vector y_m;
  Vector y_out;
  InterGateDecision decision;  // empty weights when no group exists
  double fusion_weight = 0.0;
  std::size_t groups_evaluated = 0;
};

// Ordered expert groups plus the prototype store. In grouping mode there is
// one group and one prototype per learned task; in shared mode a single group
// is retrained on every task.
class TrgeAdapter {
 public:
  TrgeAdapter() = default;
  TrgeAdapter(GroupShape shape, bool grouping) : shape_(shape), grouping_(grouping) {}

  const GroupShape& shape() const noexcept { return shape_; }
  bool grouping() const noexcept { return grouping_; }
  std::size_t tasks_learned() const noexcept { return prototypes_.size(); }

  const std::vector<ExpertGroup>& groups() const noexcept { return groups_; }
  ExpertGroup& mutable_group(std::size_t i) { return groups_.at(i); }
  const PrototypeStore& prototypes() const noexcept { return prototypes_; }
  PrototypeStore& mutable_prototypes() noexcept { return prototypes_; }

  // Grouping mode: appends a fresh group for task `task_index`. Shared mode:
  // creates the single group on first use and returns it afterwards.
  ExpertGroup& group_for_new_task(int task_index, Rng& rng);
  void push_group(ExpertGroup g) { groups_.push_back(std::move(g)); }

  // The adapter as it stood after `tasks` tasks (grouping mode only).
  TrgeAdapter prefix(std::size_t tasks) const;

  std::size_t trainable_parameters_per_task() const;

  // Inter-group decision for a recognised task id, routing over `prototypes`
  // (normally the stored rows).
  InterGateDecision route(std::span<const Vector> prototypes, const Vector& y_pre, TaskId id,
                          const RoutingConfig& cfg) const;

  // Full inference path: route, combine, fuse.
  AdapterOutput forward(const Vector& y_pre, TaskId id, const RoutingConfig& cfg) const;

  friend bool operator==(const TrgeAdapter&, const TrgeAdapter&) = default;

 private:
  GroupShape shape_;
  bool grouping_ = true;
  std::vector<ExpertGroup> groups_;
  PrototypeStore prototypes_;
};

struct HeadResult {
  double loss = 0.0;
  bool correct = false;
  Vector output_grad;  // d(loss)/d(fused output)
};

// Label-smoothed cross-entropy over temperature-scaled cosine logits of the
// fused output, with its gradient with respect to that output.
HeadResult classification_head(const FrozenBackbone& backbone, const Vector& y_out,
                               ClassId target, std::span<const ClassId> candidates,
                               double label_smoothing, double temperature);

// Loss of one sample through route → combine → fuse → head, accumulating the
// gradient for group `trainable` into `grad`.
double sample_loss_and_gradient(const TrgeAdapter& adapter, const FrozenBackbone& backbone,
                                const Vector& y_pre, const InterGateDecision& decision,
                                double fusion_weight, ClassId target,
                                std::span<const ClassId> candidates, const RoutingConfig& routing,
                                double label_smoothing, double temperature,
                                std::size_t trainable, GroupGradient& grad);

}  // namespace trge
