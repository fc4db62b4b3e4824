#include "trge/inter_router.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "trge/error.hpp"

namespace trge {

Vector mean_feature(std::span<const Vector> features) {
  if (features.empty()) throw InvalidArgument("prototype of an empty feature set");
  Vector mean(features.front().size());
  for (const Vector& f : features) mean += f;
  mean *= 1.0 / static_cast<double>(features.size());
  return mean;
}

void PrototypeStore::add_prototype(std::span<const Vector> features) {
  Vector prototype = mean_feature(features);
  if (!prototypes_.empty() && prototype.size() != prototypes_.front().size()) {
    throw InvalidArgument("prototype dimension differs from stored prototypes");
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const Vector& f : features) {
    const double dist = euclidean(f, prototype);
    sum += dist;
    sum_sq += dist * dist;
  }
  const double n = static_cast<double>(features.size());
  DistanceStats stats;
  stats.mean = sum / n;
  stats.stddev = std::sqrt(std::max(0.0, sum_sq / n - stats.mean * stats.mean));
  append(std::move(prototype), stats);
}

void PrototypeStore::append(Vector prototype, DistanceStats stats) {
  prototypes_.push_back(std::move(prototype));
  stats_.push_back(stats);
}

Vector relevance(std::span<const Vector> prototypes, const Vector& x) {
  if (prototypes.empty()) throw InvalidArgument("relevance: empty prototype store");
  Vector distances(prototypes.size());
  for (std::size_t i = 0; i < prototypes.size(); ++i) distances[i] = euclidean(x, prototypes[i]);
  const double d_max = *std::max_element(distances.begin(), distances.end());
  Vector closeness(prototypes.size());
  for (std::size_t i = 0; i < prototypes.size(); ++i) closeness[i] = d_max - distances[i];
  return softmax(closeness);
}

Vector PrototypeStore::relevance(const Vector& x) const { return trge::relevance(prototypes_, x); }

std::vector<std::size_t> InterGateDecision::active() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i] != 0.0) out.push_back(i);
  return out;
}

InterGateDecision scale_and_select(const Vector& raw, std::size_t main, double theta) {
  if (main >= raw.size()) {
    throw InvalidArgument("scale_and_select: main group " + std::to_string(main) +
                          " out of range for " + std::to_string(raw.size()) + " groups");
  }
  InterGateDecision decision;
  decision.main = main;
  decision.raw_relevance = raw;
  Vector scaled(raw.size(), kMasked);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (i == main) {
      scaled[i] = 1.0;
    } else if (raw[i] > theta) {
      scaled[i] = raw[i] - theta;
      decision.assistants.push_back(i);
    }
  }
  decision.weights = softmax(scaled);
  return decision;
}

InterGateDecision select_unseen(const Vector& raw, std::size_t k_groups) {
  if (k_groups < 1 || k_groups > raw.size()) {
    throw InvalidArgument("select_unseen: k_groups=" + std::to_string(k_groups) +
                          " outside [1, " + std::to_string(raw.size()) + "]");
  }
  InterGateDecision decision;
  decision.raw_relevance = raw;
  decision.assistants = topk_mask(raw, k_groups);
  Vector kept(raw.size(), kMasked);
  for (std::size_t i : decision.assistants) kept[i] = raw[i];
  decision.weights = softmax(kept);
  return decision;
}

InterGateDecision main_only(std::size_t group_count, std::size_t main) {
  if (main >= group_count) throw InvalidArgument("main_only: main group out of range");
  InterGateDecision decision;
  decision.main = main;
  decision.weights = Vector(group_count);
  decision.weights[main] = 1.0;
  return decision;
}

Vector combine(std::span<const ExpertGroup> groups, const InterGateDecision& decision,
               const Vector& x, std::size_t k, std::size_t* evaluated) {
  if (decision.weights.size() != groups.size()) {
    throw InvalidArgument("combine: decision covers " + std::to_string(decision.weights.size()) +
                          " groups, adapter has " + std::to_string(groups.size()));
  }
  Vector out(x.size());
  std::size_t calls = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double w = decision.weights[i];
    if (w == 0.0) continue;
    Vector y = group_forward(groups[i], x, k);
    ++calls;
    y *= w;
    out += y;
  }
  if (evaluated != nullptr) *evaluated = calls;
  return out;
}

void SelectionFrequency::record(const InterGateDecision& decision, std::size_t eval_task) {
  if (eval_task >= rows_) throw InvalidArgument("record_selection: evaluation task out of range");
  if (decision.weights.size() > cols_) {
    throw InvalidArgument("record_selection: decision has more groups than columns");
  }
  for (std::size_t g = 0; g < decision.weights.size(); ++g) {
    if (decision.weights[g] != 0.0) ++counts_[eval_task * cols_ + g];
  }
}

void SelectionFrequency::merge(const SelectionFrequency& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_) {
    throw InvalidArgument("selection frequency shapes differ");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::string SelectionFrequency::to_csv() const {
  std::ostringstream out;
  out << "task";
  for (std::size_t g = 0; g < cols_; ++g) out << ",g" << (g + 1);
  out << '\n';
  for (std::size_t t = 0; t < rows_; ++t) {
    out << (t + 1);
    for (std::size_t g = 0; g < cols_; ++g) out << ',' << count(t, g);
    out << '\n';
  }
  return out.str();
}

}  // namespace trge
