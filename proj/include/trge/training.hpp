#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "trge/adapter.hpp"
#include "trge/backbone.hpp"
#include "trge/task.hpp"

namespace trge {

struct TrainConfig {
  std::size_t iterations = 1000;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  double label_smoothing = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double temperature = 1.0 / 0.07;
  std::size_t log_every = 100;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LossResult {
  double loss = 0.0;
  Vector grad;  // d(loss)/d(temperature-scaled logit), aligned with Logits::classes
};

// −Σ q_c log p_c with q = (1−ε)·onehot(target) + ε/|C| and p the softmax of
// temperature·scores. The gradient is p − q.
LossResult smoothed_cross_entropy(const Logits& logits, ClassId target, double label_smoothing,
                                  double temperature = 1.0);

// AdamW moments for one flat parameter list.
class AdamW {
 public:
  AdamW(std::size_t parameter_count, double beta1 = 0.9, double beta2 = 0.999,
        double epsilon = 1e-8);

  std::size_t step_count() const noexcept { return step_; }
  std::size_t parameter_count() const noexcept { return first_.size(); }

  // Decoupled decay p ← p·(1 − lr·wd), then the bias-corrected adaptive step.
  // Blocks are consumed in order and must add up to parameter_count().
  void step(std::span<const std::span<double>> params,
            std::span<const std::span<const double>> grads, double lr, double weight_decay);

 private:
  double beta1_;
  double beta2_;
  double epsilon_;
  std::size_t step_ = 0;
  std::vector<double> first_;
  std::vector<double> second_;
};

// Applies one AdamW update to the group. Throws FrozenViolation for frozen
// groups and NumericalFailure for non-finite gradients.
void optimizer_step(AdamW& state, ExpertGroup& group, const GroupGradient& grad, double lr,
                    double weight_decay);

struct TrainLogRecord {
  int task = 0;
  std::size_t step = 0;
  double loss = 0.0;
  double train_acc = 0.0;
};

struct TrainedTaskReport {
  int task = 0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  std::size_t parameters_added = 0;
  std::vector<TrainLogRecord> log;
};

// Trains the group for `task` on the seen path with main = task.index, then
// freezes it (grouping mode) and registers the task prototype.
// `candidates` is the class set the loss is computed over.
TrainedTaskReport train_task(TrgeAdapter& adapter, const FrozenBackbone& backbone,
                             const TaskData& task, std::span<const ClassId> candidates,
                             const TrainConfig& cfg, const RoutingConfig& routing);

}  // namespace trge
