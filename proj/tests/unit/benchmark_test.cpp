#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "trge/benchmark.hpp"
#include "trge/error.hpp"

namespace trge {
namespace {

AccuracyMatrix hand_matrix() {
  AccuracyMatrix a(2);
  a.set_row(0, {0.6, 0.5});
  a.set_row(1, {0.9, 0.5});
  a.set_row(2, {0.8, 0.95});
  return a;
}

TEST(Metrics, HandExample) {
  const MetricsReport r = metrics(hand_matrix());
  ASSERT_EQ(r.transfer.size(), 2u);
  EXPECT_FALSE(r.transfer[0].has_value());
  ASSERT_TRUE(r.transfer[1].has_value());
  EXPECT_DOUBLE_EQ(*r.transfer[1], 0.5);
  EXPECT_EQ(r.last, (std::vector<double>{0.8, 0.95}));
  EXPECT_DOUBLE_EQ(r.average[0], 0.85);
  EXPECT_DOUBLE_EQ(r.average[1], 0.725);
  EXPECT_DOUBLE_EQ(r.mean_transfer, 0.5);
  EXPECT_DOUBLE_EQ(r.mean_last, 0.875);
  EXPECT_DOUBLE_EQ(r.mean_average, 0.7875);
}

TEST(Metrics, ConstantMatrixGivesConstantMetrics) {
  AccuracyMatrix a(4);
  for (std::size_t i = 0; i <= 4; ++i) a.set_row(i, std::vector<double>(4, 0.625));
  const MetricsReport r = metrics(a);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(r.average[j], 0.625);
    EXPECT_EQ(r.last[j], 0.625);
    if (j > 0) {
      EXPECT_EQ(*r.transfer[j], 0.625);
    }
  }
  EXPECT_EQ(r.mean_transfer, 0.625);
}

TEST(Metrics, RejectsUnpopulatedMatrix) {
  AccuracyMatrix a(2);
  a.set_row(0, {0.1, 0.2});
  EXPECT_FALSE(a.populated());
  EXPECT_TRUE(a.row_populated(0));
  EXPECT_FALSE(a.row_populated(1));
  EXPECT_THROW(metrics(a), InvalidArgument);
}

TEST(Metrics, PermutingTasksPermutesMetrics) {
  // Swapping two tasks of a 3-task matrix leaves Last and Average of the
  // moved columns intact when the row order is unchanged.
  Rng rng(5);
  AccuracyMatrix a(3), b(3);
  const std::size_t perm[] = {0, 2, 1};
  for (std::size_t i = 0; i <= 3; ++i)
    for (std::size_t j = 1; j <= 3; ++j) a.set(i, j, rng.uniform());
  for (std::size_t i = 0; i <= 3; ++i)
    for (std::size_t j = 1; j <= 3; ++j) b.set(i, perm[j - 1] + 1, a.at(i, j));
  const MetricsReport ra = metrics(a), rb = metrics(b);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(ra.last[j], rb.last[perm[j]]);
    EXPECT_EQ(ra.average[j], rb.average[perm[j]]);
  }
}

TEST(AccuracyMatrix, CsvLayout) {
  EXPECT_EQ(hand_matrix().to_csv(), "after,task1,task2\n0,0.6,0.5\n1,0.9,0.5\n2,0.8,0.95\n");
}

StreamConfig small_stream(StreamMode mode) {
  StreamConfig c;
  c.mode = mode;
  c.train_samples = 60;
  c.test_samples = 60;
  c.seed = 11;
  return c;
}

TEST(GenerateStream, McilClassesAreDisjoint) {
  const GeneratedBenchmark b = generate_stream(small_stream(StreamMode::kMcil));
  std::set<ClassId> all;
  std::size_t total = 0;
  for (const TaskData& t : b.stream.tasks) {
    all.insert(t.class_ids.begin(), t.class_ids.end());
    total += t.class_ids.size();
  }
  EXPECT_EQ(total, 20u);
  EXPECT_EQ(all.size(), 20u);
}

TEST(GenerateStream, MtilAllowsOverlapAndLabelsBelongToTask) {
  const GeneratedBenchmark b = generate_stream(small_stream(StreamMode::kMtil));
  ASSERT_EQ(b.stream.tasks.size(), 5u);
  for (std::size_t t = 0; t < 5; ++t) {
    const TaskData& task = b.stream.tasks[t];
    EXPECT_EQ(task.index, static_cast<int>(t + 1));
    EXPECT_TRUE(std::is_sorted(task.class_ids.begin(), task.class_ids.end()));
    for (const auto* set : {&task.train, &task.test})
      for (const Sample& s : *set) {
        EXPECT_TRUE(std::binary_search(task.class_ids.begin(), task.class_ids.end(), s.label));
        EXPECT_EQ(s.task, task.index);
      }
  }
  std::vector<ClassId> shared;
  const auto& c1 = b.stream.tasks[0].class_ids;
  const auto& c2 = b.stream.tasks[1].class_ids;
  std::set_intersection(c1.begin(), c1.end(), c2.begin(), c2.end(), std::back_inserter(shared));
  EXPECT_EQ(shared.size(), 1u);
}

TEST(GenerateStream, SameSeedIsBitIdentical) {
  const GeneratedBenchmark a = generate_stream(small_stream(StreamMode::kMtil));
  const GeneratedBenchmark b = generate_stream(small_stream(StreamMode::kMtil));
  EXPECT_EQ(a.backbone, b.backbone);
  ASSERT_EQ(a.stream.tasks.size(), b.stream.tasks.size());
  for (std::size_t t = 0; t < a.stream.tasks.size(); ++t) {
    ASSERT_EQ(a.stream.tasks[t].train.size(), b.stream.tasks[t].train.size());
    for (std::size_t i = 0; i < a.stream.tasks[t].train.size(); ++i)
      EXPECT_EQ(a.stream.tasks[t].train[i].x, b.stream.tasks[t].train[i].x);
  }
  StreamConfig other = small_stream(StreamMode::kMtil);
  other.seed = 12;
  EXPECT_NE(generate_stream(other).stream.tasks[0].train[0].x, a.stream.tasks[0].train[0].x);
}

TEST(GenerateStream, ZeroShotIsAboveChance) {
  const GeneratedBenchmark b = generate_stream(small_stream(StreamMode::kMtil));
  for (const TaskData& t : b.stream.tasks)
    EXPECT_GT(zero_shot_accuracy(b.backbone, t), 1.0 / static_cast<double>(t.class_ids.size()));
}

// Nearest-class-mean classifier fitted on the training features.
double ncm_accuracy(const FrozenBackbone& backbone, const TaskData& task) {
  std::map<ClassId, Vector> sums;
  std::map<ClassId, double> counts;
  for (const Sample& s : task.train) {
    const Vector f = backbone.embed(s.x);
    auto [it, fresh] = sums.try_emplace(s.label, f.size());
    it->second += f;
    counts[s.label] += 1.0;
  }
  std::size_t correct = 0;
  for (const Sample& s : task.test) {
    const Vector f = backbone.embed(s.x);
    ClassId best = -1;
    double best_d = 0.0;
    for (auto& [c, sum] : sums) {
      const double d = euclidean(f, (1.0 / counts[c]) * sum);
      if (best < 0 || d < best_d) {
        best = c;
        best_d = d;
      }
    }
    correct += best == s.label;
  }
  return static_cast<double>(correct) / task.test.size();
}

TEST(GenerateStream, NoShiftMakesZeroShotMatchFittedClassifier) {
  StreamConfig c = small_stream(StreamMode::kMtil);
  c.shift_strength = 0.0;
  c.test_samples = 400;
  const GeneratedBenchmark b = generate_stream(c);
  for (const TaskData& t : b.stream.tasks)
    EXPECT_NEAR(zero_shot_accuracy(b.backbone, t), ncm_accuracy(b.backbone, t), 0.05);
}

TEST(GenerateStream, RejectsBadConfigAndExhaustedRetries) {
  StreamConfig c = small_stream(StreamMode::kMtil);
  c.tasks = 0;
  EXPECT_THROW(generate_stream(c), InvalidArgument);
  c = small_stream(StreamMode::kMtil);
  c.shift_strength = -1.0;
  EXPECT_THROW(generate_stream(c), InvalidArgument);
  c = small_stream(StreamMode::kMtil);
  c.noise = 50.0;
  c.max_retries = 2;
  EXPECT_THROW(generate_stream(c), GenerationInfeasible);
}

TEST(EvaluationCandidates, McilUsesUnionOfLearnedClasses) {
  const GeneratedBenchmark b = generate_stream(small_stream(StreamMode::kMcil));
  const TaskStream& s = b.stream;
  for (std::size_t after = 1; after <= 5; ++after) {
    std::set<ClassId> learned;
    for (std::size_t j = 0; j < after; ++j)
      learned.insert(s.tasks[j].class_ids.begin(), s.tasks[j].class_ids.end());
    EXPECT_EQ(evaluation_candidates(s, 1, after), std::vector<ClassId>(learned.begin(), learned.end()));
  }
  const std::vector<ClassId> unseen = evaluation_candidates(s, 3, 1);
  EXPECT_EQ(unseen.size(), 8u);
  EXPECT_EQ(evaluation_candidates(b.stream, 2, 0), s.tasks[1].class_ids);
}

TEST(Evaluate, UntrainedRowEqualsZeroShot) {
  const GeneratedBenchmark b = generate_stream(small_stream(StreamMode::kMtil));
  const TrgeAdapter adapter(GroupShape{16, 3, 4, 0.25, 0.1}, true);
  OracleRecognizer oracle;
  const std::vector<double> row = evaluate(adapter, b.backbone, b.stream, 0, oracle, RoutingConfig{});
  for (std::size_t j = 0; j < 5; ++j)
    EXPECT_EQ(row[j], zero_shot_accuracy(b.backbone, b.stream.tasks[j]));
}

TEST(FillRecognitionMetrics, RecountsLog) {
  std::vector<RecognitionRecord> log{
      {2, 1, TaskId(1), TaskId(1)}, {2, 1, TaskId(1), TaskId(2)}, {2, 2, TaskId(2), TaskId(2)},
      {1, 2, TaskId::unseen(), TaskId::unseen()}, {1, 2, TaskId::unseen(), TaskId(1)},
      {0, 1, TaskId::unseen(), TaskId(1)}};
  MetricsReport r;
  fill_recognition_metrics(r, log, 2);
  EXPECT_EQ(r.recognizer_accuracy, (std::vector<double>{0.5, 1.0}));
  ASSERT_TRUE(r.unseen_detection_accuracy.has_value());
  EXPECT_EQ(*r.unseen_detection_accuracy, 0.5);
}

}  // namespace
}  // namespace trge
