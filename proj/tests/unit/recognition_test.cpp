#include <gtest/gtest.h>

#include "support.hpp"
#include "trge/error.hpp"
#include "trge/recognition.hpp"

namespace trge {
namespace {

std::map<ClassId, std::string> numbered_names(int n) {
  std::map<ClassId, std::string> names;
  for (int c = 0; c < n; ++c) names.emplace(c, "class_" + std::to_string(c));
  return names;
}

TEST(DescribeTask, TemplateSortsByClassId) {
  const TaskDescription d = describe_task(1, {3, 1}, {{1, "oak"}, {3, "pine"}});
  EXPECT_EQ(d.text, "Task containing classes: oak, pine");
  EXPECT_EQ(d.class_ids, (std::set<ClassId>{1, 3}));
  EXPECT_EQ(describe_task(2, {7}, {{7, "fern"}}).text, "Task containing classes: fern");
}

TEST(DescribeTask, RejectsUnknownClassAndEmptySet) {
  EXPECT_THROW(describe_task(1, {4}, {{1, "oak"}}), InvalidArgument);
  EXPECT_THROW(describe_task(1, {}, {}), InvalidArgument);
}

TEST(DescribeTask, LongSetTruncatedToTokenBudget) {
  std::set<ClassId> ids;
  for (int c = 0; c < 300; ++c) ids.insert(c);
  const TaskDescription d = describe_task(1, ids, numbered_names(300));
  // Header is 3 tokens and each name one more, so 197 names fit.
  std::size_t tokens = 0;
  bool in_token = false;
  for (char ch : d.text) {
    const bool space = ch == ' ';
    if (!space && !in_token) ++tokens;
    in_token = !space;
  }
  EXPECT_EQ(tokens, kMaxDescriptionTokens);
  EXPECT_EQ(count_tokens(d.text), kMaxDescriptionTokens);
  EXPECT_NE(d.text.find("class_196"), std::string::npos);
  EXPECT_EQ(d.text.find("class_197"), std::string::npos);
  EXPECT_EQ(d.class_ids.size(), 300u);
}

TEST(RecognizeOracle, ReturnsTruthOrUnseen) {
  const Sample s{Vector{}, 0, 3};
  EXPECT_EQ(recognize_oracle(s, 3), TaskId(3));
  EXPECT_EQ(recognize_oracle(s, 2), TaskId::unseen());
  EXPECT_EQ(recognize_oracle(Sample{Vector{}, 0, 1}, 1), TaskId(1));
}

TEST(RecognizeByPrototype, NearestAndFarRejection) {
  PrototypeStore store;
  store.add_prototype(std::vector<Vector>{Vector{0, 0}, Vector{0.2, 0}});
  store.add_prototype(std::vector<Vector>{Vector{5, 5}, Vector{5.2, 5}});
  EXPECT_EQ(recognize_by_prototype(store, store.prototypes()[1], 2.0), TaskId(2));
  EXPECT_EQ(recognize_by_prototype(store, Vector{100, -100}, 2.0), TaskId::unseen());
  EXPECT_THROW(recognize_by_prototype(PrototypeStore{}, Vector{0, 0}, 2.0), InvalidArgument);
}

TEST(RecognizeByPrototype, MatchesNearestMeanOracleOnClusters) {
  Rng rng(1);
  PrototypeStore store;
  std::vector<Vector> centres;
  for (int t = 0; t < 4; ++t) centres.push_back(testing::random_vector(3, rng, 3.0));
  for (const Vector& c : centres) {
    std::vector<Vector> feats;
    for (int i = 0; i < 50; ++i) feats.push_back(c + testing::random_vector(3, rng, 0.5));
    store.add_prototype(feats);
  }
  // An unbounded margin turns the recogniser into a plain nearest-mean rule.
  for (int i = 0; i < 500; ++i) {
    const Vector x = centres[rng.uniform_index(4)] + testing::random_vector(3, rng, 0.8);
    std::size_t best = 0;
    for (std::size_t t = 1; t < 4; ++t)
      if (euclidean(x, store.prototypes()[t]) < euclidean(x, store.prototypes()[best])) best = t;
    ASSERT_EQ(recognize_by_prototype(store, x, 1e300), TaskId(static_cast<int>(best) + 1));
  }
}

std::vector<TaskDescription> disjoint_descriptions() {
  const auto names = numbered_names(12);
  return {describe_task(1, {0, 1, 2, 3}, names), describe_task(2, {4, 5, 6, 7}, names),
          describe_task(3, {8, 9, 10, 11}, names)};
}

TEST(RecognizeSemantic, ExactWithoutErrors) {
  const auto desc = disjoint_descriptions();
  Rng rng(2);
  for (ClassId c = 0; c < 12; ++c) {
    const int task = c / 4 + 1;
    EXPECT_EQ(recognize_semantic(desc, Sample{Vector{}, c, task}, 0.0, rng), TaskId(task));
  }
  EXPECT_EQ(recognize_semantic(desc, Sample{Vector{}, 40, 4}, 0.0, rng), TaskId::unseen());
  EXPECT_THROW(recognize_semantic(desc, Sample{Vector{}, 0, 1}, 1.0, rng), InvalidArgument);
}

TEST(RecognizeSemantic, OverlapPrefersTrueTaskThenLowestIndex) {
  const auto names = numbered_names(6);
  const std::vector<TaskDescription> desc{describe_task(1, {0, 1, 2}, names),
                                          describe_task(2, {2, 3, 4}, names),
                                          describe_task(3, {2, 5}, names)};
  Rng rng(3);
  EXPECT_EQ(recognize_semantic(desc, Sample{Vector{}, 2, 2}, 0.0, rng), TaskId(2));
  EXPECT_EQ(recognize_semantic(desc, Sample{Vector{}, 2, 3}, 0.0, rng), TaskId(3));
  // Task 4 is not described; class 2 falls back to the lowest matching task.
  EXPECT_EQ(recognize_semantic(desc, Sample{Vector{}, 2, 4}, 0.0, rng), TaskId(1));
}

TEST(RecognizeSemantic, MonteCarloErrorRate) {
  const auto desc = disjoint_descriptions();
  Rng rng(4);
  int wrong = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const ClassId c = static_cast<ClassId>(rng.uniform_index(12));
    const int task = c / 4 + 1;
    const TaskId got = recognize_semantic(desc, Sample{Vector{}, c, task}, 0.1, rng);
    ASSERT_TRUE(got.is_unseen() || (got.value() >= 1 && got.value() <= 3));
    wrong += got != TaskId(task);
  }
  EXPECT_NEAR(static_cast<double>(wrong) / n, 0.1, 0.01);
}

TEST(SemanticRecognizer, OnlySeesLearnedTasks) {
  SemanticRecognizer rec(disjoint_descriptions(), 0.0, 5);
  EXPECT_EQ(rec.recognize(Sample{Vector{}, 9, 3}, Vector{}, 2), TaskId::unseen());
  EXPECT_EQ(rec.recognize(Sample{Vector{}, 9, 3}, Vector{}, 3), TaskId(3));
}

TEST(RecognitionProtocol, RequestShape) {
  const auto desc = disjoint_descriptions();
  const nlohmann::json req = build_recognition_request(desc, "img/0001.png");
  ASSERT_EQ(req["descriptions"].size(), 3u);
  EXPECT_EQ(req["descriptions"][1]["task"], 2);
  EXPECT_EQ(req["descriptions"][1]["text"], desc[1].text);
  EXPECT_EQ(req["image_ref"], "img/0001.png");
  EXPECT_EQ(req["instruction"], std::string(recognition_instruction()));
}

TEST(RecognitionProtocol, StrictResponseParsing) {
  EXPECT_EQ(parse_recognition_response("2", 3), TaskId(2));
  EXPECT_EQ(parse_recognition_response(" -1\n", 3), TaskId::unseen());
  EXPECT_EQ(parse_recognition_response("4", 3), TaskId::unseen());
  EXPECT_EQ(parse_recognition_response("0", 3), TaskId::unseen());
  EXPECT_EQ(parse_recognition_response("task 2", 3), TaskId::unseen());
  EXPECT_EQ(parse_recognition_response("2.0", 3), TaskId::unseen());
  EXPECT_EQ(parse_recognition_response("+2", 3), TaskId::unseen());
  EXPECT_EQ(parse_recognition_response("", 3), TaskId::unseen());
}

}  // namespace
}  // namespace trge
