#include "trge/adapter.hpp"

#include <algorithm>
#include <string>

#include "trge/error.hpp"
#include "trge/training.hpp"

namespace trge {

ExpertGroup& TrgeAdapter::group_for_new_task(int task_index, Rng& rng) {
  if (grouping_ || groups_.empty()) {
    groups_.push_back(ExpertGroup::initialise(shape_, task_index, rng));
  }
  return groups_.back();
}

TrgeAdapter TrgeAdapter::prefix(std::size_t tasks) const {
  if (!grouping_) throw InvalidArgument("prefix: shared adapters keep no per-task history");
  if (tasks > groups_.size() || tasks > prototypes_.size()) {
    throw InvalidArgument("prefix: only " + std::to_string(groups_.size()) + " tasks learned");
  }
  TrgeAdapter out(shape_, grouping_);
  out.groups_.assign(groups_.begin(), groups_.begin() + static_cast<std::ptrdiff_t>(tasks));
  for (std::size_t i = 0; i < tasks; ++i) {
    out.prototypes_.append(prototypes_.prototypes()[i], prototypes_.stats()[i]);
  }
  return out;
}

std::size_t TrgeAdapter::trainable_parameters_per_task() const {
  return shape_.num_experts * (2 * shape_.rank * shape_.dim) + shape_.dim * shape_.num_experts;
}

InterGateDecision TrgeAdapter::route(std::span<const Vector> prototypes, const Vector& y_pre,
                                     TaskId id, const RoutingConfig& cfg) const {
  if (groups_.empty()) throw InvalidArgument("route: adapter has no groups");
  if (!grouping_) return main_only(1, 0);

  if (prototypes.size() != groups_.size()) {
    throw InvalidArgument("route: " + std::to_string(prototypes.size()) + " prototypes for " +
                          std::to_string(groups_.size()) + " groups");
  }
  if (id.is_unseen()) {
    const Vector raw = relevance(prototypes, y_pre);
    return select_unseen(raw, std::min(cfg.k_groups, groups_.size()));
  }
  const std::size_t main = id.group_index();
  if (main >= groups_.size()) {
    throw InvalidArgument("route: task " + to_string(id) + " has no trained group");
  }
  if (!cfg.inter_router) return main_only(groups_.size(), main);
  return scale_and_select(relevance(prototypes, y_pre), main, cfg.theta);
}

AdapterOutput TrgeAdapter::forward(const Vector& y_pre, TaskId id,
                                   const RoutingConfig& cfg) const {
  AdapterOutput out;
  out.y_m = Vector(y_pre.size());
  if (tasks_learned() == 0 || groups_.empty()) {
    out.y_out = y_pre;
    return out;
  }
  if (!id.is_unseen() && static_cast<std::size_t>(id.value()) > tasks_learned()) {
    throw InvalidArgument("forward: task " + to_string(id) + " not learned yet");
  }
  out.decision = route(prototypes_.prototypes(), y_pre, id, cfg);
  if (id.is_unseen() && !cfg.dynamic_fusion) {
    out.fusion_weight = 0.0;
  } else {
    out.fusion_weight = fusion_weight(id, FusionConfig{cfg.alpha, tasks_learned()});
  }
  out.y_m = combine(groups_, out.decision, y_pre, std::min(cfg.top_k, shape_.num_experts),
                    &out.groups_evaluated);
  out.y_out = y_pre;
  for (std::size_t i = 0; i < out.y_out.size(); ++i) out.y_out[i] += out.fusion_weight * out.y_m[i];
  return out;
}

HeadResult classification_head(const FrozenBackbone& backbone, const Vector& y_out,
                               ClassId target, std::span<const ClassId> candidates,
                               double label_smoothing, double temperature) {
  const Logits logits = backbone.classify(y_out, candidates);
  const LossResult ce = smoothed_cross_entropy(logits, target, label_smoothing, temperature);

  HeadResult head;
  head.loss = ce.loss;
  head.correct = logits.prediction() == target;

  // cos_c = e_c·y/|y|, so d cos_c/dy = e_c/|y| − cos_c·y/|y|².
  const double y_norm = norm(y_out);
  head.output_grad = Vector(y_out.size());
  double radial = 0.0;
  for (std::size_t c = 0; c < logits.classes.size(); ++c) {
    const double g = temperature * ce.grad[c];
    if (g == 0.0) continue;
    const Vector& e = backbone.class_embedding(logits.classes[c]);
    for (std::size_t a = 0; a < y_out.size(); ++a) head.output_grad[a] += g * e[a] / y_norm;
    radial += g * logits.scores[c];
  }
  for (std::size_t a = 0; a < y_out.size(); ++a) {
    head.output_grad[a] -= radial * y_out[a] / (y_norm * y_norm);
  }
  return head;
}

double sample_loss_and_gradient(const TrgeAdapter& adapter, const FrozenBackbone& backbone,
                                const Vector& y_pre, const InterGateDecision& decision,
                                double fusion_weight, ClassId target,
                                std::span<const ClassId> candidates, const RoutingConfig& routing,
                                double label_smoothing, double temperature,
                                std::size_t trainable, GroupGradient& grad) {
  const std::size_t k = std::min(routing.top_k, adapter.shape().num_experts);
  const Vector y_m = combine(adapter.groups(), decision, y_pre, k);
  Vector y_out = y_pre;
  for (std::size_t i = 0; i < y_out.size(); ++i) y_out[i] += fusion_weight * y_m[i];

  HeadResult head =
      classification_head(backbone, y_out, target, candidates, label_smoothing, temperature);
  const double coeff = fusion_weight * decision.weights[trainable];
  if (coeff != 0.0) {
    head.output_grad *= coeff;
    group_backward(adapter.groups()[trainable], y_pre, k, head.output_grad, grad);
  }
  return head.loss;
}

}  // namespace trge
