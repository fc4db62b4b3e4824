#include "trge/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "trge/error.hpp"

namespace trge {

LossResult smoothed_cross_entropy(const Logits& logits, ClassId target, double label_smoothing,
                                  double temperature) {
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw InvalidArgument("label smoothing must lie in [0, 1)");
  }
  const auto it = std::lower_bound(logits.classes.begin(), logits.classes.end(), target);
  if (it == logits.classes.end() || *it != target) {
    throw InvalidArgument("target class " + std::to_string(target) + " not among candidates");
  }
  const std::size_t target_pos = static_cast<std::size_t>(it - logits.classes.begin());
  const std::size_t n = logits.classes.size();

  Vector scaled = logits.scores;
  scaled *= temperature;
  double max_logit = scaled[0];
  for (double s : scaled) max_logit = std::max(max_logit, s);
  double total = 0.0;
  for (double s : scaled) total += std::exp(s - max_logit);
  const double log_total = std::log(total) + max_logit;

  LossResult out;
  out.grad = Vector(n);
  const double off_target = label_smoothing / static_cast<double>(n);
  for (std::size_t c = 0; c < n; ++c) {
    const double q = (c == target_pos ? 1.0 - label_smoothing : 0.0) + off_target;
    const double log_p = scaled[c] - log_total;
    if (q > 0.0) out.loss -= q * log_p;
    out.grad[c] = std::exp(log_p) - q;
  }
  return out;
}

AdamW::AdamW(std::size_t parameter_count, double beta1, double beta2, double epsilon)
    : beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon),
      first_(parameter_count, 0.0),
      second_(parameter_count, 0.0) {}

void AdamW::step(std::span<const std::span<double>> params,
                 std::span<const std::span<const double>> grads, double lr,
                 double weight_decay) {
  if (params.size() != grads.size()) throw InvalidArgument("AdamW: block count mismatch");
  std::size_t total = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) throw InvalidArgument("AdamW: block shape mismatch");
    if (!all_finite(grads[b])) throw NumericalFailure("AdamW: non-finite gradient");
    total += params[b].size();
  }
  if (total != first_.size()) throw InvalidArgument("AdamW: parameter count mismatch");

  ++step_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  const double decay = 1.0 - lr * weight_decay;
  std::size_t flat = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i, ++flat) {
      const double g = grads[b][i];
      first_[flat] = beta1_ * first_[flat] + (1.0 - beta1_) * g;
      second_[flat] = beta2_ * second_[flat] + (1.0 - beta2_) * g * g;
      const double m_hat = first_[flat] / correction1;
      const double v_hat = second_[flat] / correction2;
      double& p = params[b][i];
      p *= decay;
      p -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

void optimizer_step(AdamW& state, ExpertGroup& group, const GroupGradient& grad, double lr,
                    double weight_decay) {
  const auto params = group.mutable_parameter_blocks();
  const auto grads = grad.blocks();
  state.step(params, grads, lr, weight_decay);
}

namespace {

// Per-sample quantities that stay fixed while one group trains.
struct SampleContext {
  Vector y_pre;
  Vector y_fixed;  // y_pre plus the frozen groups' share of the adapter output
  double coeff = 0.0;
  ClassId label = 0;
};

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (!(cfg.weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be non-negative");
  if (!(cfg.label_smoothing >= 0.0 && cfg.label_smoothing < 1.0)) {
    throw InvalidArgument("label_smoothing must lie in [0, 1)");
  }
}

}  // namespace

TrainedTaskReport train_task(TrgeAdapter& adapter, const FrozenBackbone& backbone,
                             const TaskData& task, std::span<const ClassId> candidates,
                             const TrainConfig& cfg, const RoutingConfig& routing) {
  validate(cfg);
  if (task.train.empty()) throw InvalidArgument("train_task: task has no training samples");
  const std::size_t learned = adapter.tasks_learned();
  if (static_cast<std::size_t>(task.index) != learned + 1) {
    throw InvalidArgument("train_task: expected task " + std::to_string(learned + 1) + ", got " +
                          std::to_string(task.index));
  }
  if (adapter.grouping()) {
    if (adapter.groups().size() != learned) {
      throw InvalidArgument("train_task: group count does not match learned tasks");
    }
    for (const ExpertGroup& g : adapter.groups()) {
      if (!g.frozen()) throw FrozenViolation("train_task: an earlier group was left unfrozen");
    }
  }

  Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(task.index)));

  std::vector<Vector> features;
  features.reserve(task.train.size());
  for (const Sample& s : task.train) features.push_back(backbone.embed(s.x));

  const std::size_t before = adapter.groups().size();
  adapter.group_for_new_task(task.index, rng);
  const std::size_t trainable = adapter.groups().size() - 1;
  const std::size_t parameters_added =
      adapter.groups().size() > before ? adapter.groups()[trainable].parameter_count() : 0;

  // Routing during training sees the stored prototypes plus this task's own,
  // which depends only on frozen features.
  std::vector<Vector> rows = adapter.prototypes().prototypes();
  if (adapter.grouping()) rows.push_back(mean_feature(features));
  const bool assistants = routing.train_with_assistants && routing.inter_router;
  const std::size_t k = std::min(routing.top_k, adapter.shape().num_experts);
  const TaskId id(task.index);

  std::vector<SampleContext> contexts;
  contexts.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    SampleContext ctx;
    ctx.y_pre = features[i];
    ctx.label = task.train[i].label;
    InterGateDecision decision = assistants
                                     ? adapter.route(rows, ctx.y_pre, id, routing)
                                     : main_only(adapter.groups().size(), trainable);
    ctx.coeff = decision.weights[trainable];
    decision.weights[trainable] = 0.0;
    ctx.y_fixed = ctx.y_pre + combine(adapter.groups(), decision, ctx.y_pre, k);
    contexts.push_back(std::move(ctx));
  }

  ExpertGroup& group = adapter.mutable_group(trainable);
  GroupGradient grad(group);
  AdamW optimiser(group.parameter_count(), cfg.beta1, cfg.beta2, cfg.adam_epsilon);

  auto output_of = [&](const SampleContext& ctx) {
    Vector y = group_forward(group, ctx.y_pre, k);
    y *= ctx.coeff;
    y += ctx.y_fixed;
    return y;
  };

  TrainedTaskReport report;
  report.task = task.index;
  report.parameters_added = parameters_added;

  for (std::size_t step = 1; step <= cfg.iterations; ++step) {
    grad.zero();
    double batch_loss = 0.0;
    std::size_t batch_correct = 0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const SampleContext& ctx = contexts[rng.uniform_index(contexts.size())];
      HeadResult head = classification_head(backbone, output_of(ctx), ctx.label, candidates,
                                             cfg.label_smoothing, cfg.temperature);
      batch_loss += head.loss;
      batch_correct += head.correct ? 1 : 0;
      if (ctx.coeff != 0.0) {
        head.output_grad *= ctx.coeff;
        group_backward(group, ctx.y_pre, k, head.output_grad, grad);
      }
    }
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
    batch_loss *= inv_batch;
    if (!std::isfinite(batch_loss)) {
      std::ostringstream msg;
      msg << "non-finite loss at task " << task.index << " step " << step;
      throw NumericalFailure(msg.str());
    }
    grad.scale(inv_batch);
    optimizer_step(optimiser, group, grad, cfg.learning_rate, cfg.weight_decay);

    if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step == cfg.iterations)) {
      report.log.push_back(TrainLogRecord{task.index, step, batch_loss,
                                          static_cast<double>(batch_correct) * inv_batch});
    }
  }

  double total_loss = 0.0;
  std::size_t correct = 0;
  for (const SampleContext& ctx : contexts) {
    const HeadResult head = classification_head(backbone, output_of(ctx), ctx.label, candidates,
                                                cfg.label_smoothing, cfg.temperature);
    total_loss += head.loss;
    correct += head.correct ? 1 : 0;
  }
  const double n = static_cast<double>(contexts.size());
  report.final_loss = total_loss / n;
  report.train_accuracy = static_cast<double>(correct) / n;
  if (!std::isfinite(report.final_loss)) {
    throw NumericalFailure("non-finite final loss at task " + std::to_string(task.index));
  }

  if (adapter.grouping()) group.freeze();
  adapter.mutable_prototypes().add_prototype(features);
  return report;
}

}  // namespace trge
