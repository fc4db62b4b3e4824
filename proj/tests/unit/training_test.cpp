#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"
#include "trge/error.hpp"
#include "trge/training.hpp"

namespace trge {
namespace {

Logits make_logits(std::vector<ClassId> classes, Vector scores) {
  return Logits{std::move(classes), std::move(scores)};
}

TEST(SmoothedCrossEntropy, PerfectPredictionHasZeroLoss) {
  const LossResult r = smoothed_cross_entropy(make_logits({0, 1}, Vector{1000, 0}), 0, 0.0);
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
}

TEST(SmoothedCrossEntropy, UniformLogitsGiveLogN) {
  const LossResult r = smoothed_cross_entropy(make_logits({0, 1, 2, 3, 4}, Vector(5, 0.3)), 2, 0.0);
  EXPECT_NEAR(r.loss, std::log(5.0), 1e-12);
}

TEST(SmoothedCrossEntropy, MatchesDirectFormula) {
  const Vector s{0.2, -0.4, 0.9, 0.1};
  const double eps = 0.1, temp = 1.0 / 0.07;
  const LossResult r = smoothed_cross_entropy(make_logits({3, 5, 8, 9}, s), 8, eps, temp);
  std::vector<double> z;
  for (double v : s) z.push_back(temp * v);
  const auto p = testing::naive_softmax(z);
  double loss = 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    const double q = (c == 2 ? 1.0 - eps : 0.0) + eps / 4.0;
    loss -= q * std::log(p[c]);
    EXPECT_NEAR(r.grad[c], p[c] - q, 1e-12);
  }
  EXPECT_NEAR(r.loss, loss, 1e-9);
  EXPECT_THROW(smoothed_cross_entropy(make_logits({3, 5}, Vector{0, 0}), 4, eps), InvalidArgument);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  std::vector<double> p{0.0};
  const std::vector<double> g{1.0};
  AdamW opt(1, 0.9, 0.999, 1e-8);
  const std::span<double> pb[] = {p};
  const std::span<const double> gb[] = {g};
  opt.step(pb, gb, 0.1, 0.0);
  // m̂ = 1, v̂ = 1, so Δ = −lr · 1 / (1 + ε).
  EXPECT_NEAR(p[0], -0.1, 1e-8);
  EXPECT_EQ(opt.step_count(), 1u);
}

TEST(AdamW, ZeroGradientWithoutDecayIsNoop) {
  std::vector<double> p{0.7, -1.3};
  const std::vector<double> g{0.0, 0.0};
  AdamW opt(2);
  const std::span<double> pb[] = {p};
  const std::span<const double> gb[] = {g};
  opt.step(pb, gb, 0.1, 0.0);
  EXPECT_EQ(p, (std::vector<double>{0.7, -1.3}));
}

TEST(AdamW, ZeroGradientWithDecayIsPureDecay) {
  std::vector<double> p{0.7, -1.3};
  const std::vector<double> g{0.0, 0.0};
  AdamW opt(2);
  const std::span<double> pb[] = {p};
  const std::span<const double> gb[] = {g};
  opt.step(pb, gb, 0.1, 0.5);
  EXPECT_EQ(p[0], 0.7 * (1.0 - 0.1 * 0.5));
  EXPECT_EQ(p[1], -1.3 * (1.0 - 0.1 * 0.5));
}

TEST(AdamW, RejectsNonFiniteGradient) {
  std::vector<double> p{0.0};
  const std::vector<double> g{std::nan("")};
  AdamW opt(1);
  const std::span<double> pb[] = {p};
  const std::span<const double> gb[] = {g};
  EXPECT_THROW(opt.step(pb, gb, 0.1, 0.0), NumericalFailure);
}

// Two classes whose embeddings point the wrong way for the data: the frozen
// classifier gets every sample wrong, but the features are linearly separable.
struct SwappedTask {
  FrozenBackbone backbone;
  TaskData task;
  std::vector<ClassId> candidates{0, 1};
};

SwappedTask swapped_task() {
  SwappedTask s;
  std::map<ClassId, Vector> emb{{0, Vector{1, 0, 0, 0}}, {1, Vector{0, 1, 0, 0}}};
  s.backbone = FrozenBackbone(Matrix::identity(4), Vector(4), emb);
  s.task.index = 1;
  s.task.class_ids = {0, 1};
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const ClassId y = i % 2;
    Vector x = testing::random_vector(4, rng, 0.1);
    x[y == 0 ? 1 : 0] += 0.8;
    x[2] += 0.3;
    s.task.train.push_back(Sample{x, y, 1});
  }
  s.task.test = s.task.train;
  return s;
}

// Plain logistic regression on the frozen features: confirms the task is
// learnable to the required accuracy by an independent model.
double logistic_regression_accuracy(const SwappedTask& s) {
  std::vector<Vector> f;
  for (const Sample& x : s.task.train) f.push_back(s.backbone.embed(x.x));
  Vector w(4);
  double b = 0.0;
  for (int it = 0; it < 2000; ++it) {
    Vector gw(4);
    double gb = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-(dot(w, f[i]) + b)));
      const double e = p - static_cast<double>(s.task.train[i].label);
      for (std::size_t j = 0; j < 4; ++j) gw[j] += e * f[i][j];
      gb += e;
    }
    for (std::size_t j = 0; j < 4; ++j) w[j] -= 0.5 * gw[j] / f.size();
    b -= 0.5 * gb / f.size();
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < f.size(); ++i)
    correct += ((dot(w, f[i]) + b) > 0.0) == (s.task.train[i].label == 1);
  return static_cast<double>(correct) / f.size();
}

TEST(TrainTask, LearnsSeparableTaskTheFrozenModelGetsWrong) {
  const SwappedTask s = swapped_task();
  ASSERT_GE(logistic_regression_accuracy(s), 0.95);
  TrgeAdapter adapter(GroupShape{4, 3, 2, 0.5, 0.1}, true);
  TrainConfig cfg;
  cfg.seed = 3;
  const TrainedTaskReport report =
      train_task(adapter, s.backbone, s.task, s.candidates, cfg, RoutingConfig{});
  EXPECT_GE(report.train_accuracy, 0.95);
  EXPECT_TRUE(adapter.groups()[0].frozen());
  EXPECT_EQ(adapter.tasks_learned(), 1u);
  EXPECT_EQ(report.parameters_added, adapter.trainable_parameters_per_task());
  ASSERT_FALSE(report.log.empty());
  EXPECT_EQ(report.log.back().step, cfg.iterations);
  for (const TrainLogRecord& r : report.log) EXPECT_TRUE(std::isfinite(r.loss));
}

TEST(TrainTask, ZeroIterationsLeavesPredictionsUnchanged) {
  const SwappedTask s = swapped_task();
  TrgeAdapter adapter(GroupShape{4, 3, 2, 0.5, 0.1}, true);
  TrainConfig cfg;
  cfg.iterations = 0;
  train_task(adapter, s.backbone, s.task, s.candidates, cfg, RoutingConfig{});
  ASSERT_EQ(adapter.groups().size(), 1u);
  for (const Sample& x : s.task.test) {
    const Vector y_pre = s.backbone.embed(x.x);
    ASSERT_EQ(adapter.forward(y_pre, TaskId(1), RoutingConfig{}).y_out, y_pre);
  }
}

TEST(TrainTask, EarlierGroupHashUnchangedAndOrderEnforced) {
  SwappedTask s = swapped_task();
  TrgeAdapter adapter(GroupShape{4, 2, 1, 1.0, 0.1}, true);
  TrainConfig cfg;
  cfg.iterations = 50;
  train_task(adapter, s.backbone, s.task, s.candidates, cfg, RoutingConfig{});
  const std::string h1 = parameter_hash(adapter.groups()[0]);

  TaskData second = s.task;
  EXPECT_THROW(train_task(adapter, s.backbone, second, s.candidates, cfg, RoutingConfig{}),
               InvalidArgument);
  second.index = 2;
  for (Sample& x : second.train) x.task = 2;
  train_task(adapter, s.backbone, second, s.candidates, cfg, RoutingConfig{});
  EXPECT_EQ(parameter_hash(adapter.groups()[0]), h1);
  EXPECT_EQ(adapter.groups().size(), 2u);
}

TEST(TrainTask, ParameterCountConstantAcrossTasks) {
  const TrgeAdapter adapter(GroupShape{16, 3, 4, 0.25, 0.1}, true);
  EXPECT_EQ(adapter.trainable_parameters_per_task(), 3u * 2 * 4 * 16 + 16u * 3);
}

}  // namespace
}  // namespace trge
