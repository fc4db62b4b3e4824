#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trge/moe.hpp"
#include "trge/numerics.hpp"

namespace trge {

// Spread of a task's training features around its prototype.
struct DistanceStats {
  double mean = 0.0;
  double stddev = 0.0;

  friend bool operator==(const DistanceStats&, const DistanceStats&) = default;
};

// Append-only per-task mean features. Row t (0-based) is the prototype of
// task t+1.
class PrototypeStore {
 public:
  std::size_t size() const noexcept { return prototypes_.size(); }
  bool empty() const noexcept { return prototypes_.empty(); }
  const std::vector<Vector>& prototypes() const noexcept { return prototypes_; }
  const std::vector<DistanceStats>& stats() const noexcept { return stats_; }

  // Appends the elementwise mean of `features` and its distance statistics.
  void add_prototype(std::span<const Vector> features);
  // Restores a stored row verbatim.
  void append(Vector prototype, DistanceStats stats);

  // Softmax of (d_max − d_i) over Euclidean distances to every prototype.
  Vector relevance(const Vector& x) const;

  friend bool operator==(const PrototypeStore&, const PrototypeStore&) = default;

 private:
  std::vector<Vector> prototypes_;
  std::vector<DistanceStats> stats_;
};

// Elementwise mean; throws on an empty set.
Vector mean_feature(std::span<const Vector> features);

// Relevance of x to the given prototype rows; see PrototypeStore::relevance.
Vector relevance(std::span<const Vector> prototypes, const Vector& x);

struct InterGateDecision {
  Vector weights;                       // over groups, simplex point
  std::optional<std::size_t> main;      // zero-based group index
  std::vector<std::size_t> assistants;  // ascending
  Vector raw_relevance;

  // Groups with nonzero weight, ascending.
  std::vector<std::size_t> active() const;
};

// Main group gets pre-softmax value 1, other groups above θ get raw − θ, the
// rest are masked out.
InterGateDecision scale_and_select(const Vector& raw, std::size_t main, double theta);

// No main group: keep the k_groups most relevant groups, softmax over their
// raw relevance.
InterGateDecision select_unseen(const Vector& raw, std::size_t k_groups);

// Main group alone at weight 1.
InterGateDecision main_only(std::size_t group_count, std::size_t main);

// Σ_i h_i · group_forward(G_i, x, k), skipping zero-weight groups. When
// `evaluated` is set it receives the number of group_forward calls made.
Vector combine(std::span<const ExpertGroup> groups, const InterGateDecision& decision,
               const Vector& x, std::size_t k, std::size_t* evaluated = nullptr);

// Selection counts: rows are evaluation tasks, columns are groups.
class SelectionFrequency {
 public:
  SelectionFrequency() = default;
  SelectionFrequency(std::size_t tasks, std::size_t groups)
      : rows_(tasks), cols_(groups), counts_(tasks * groups, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::uint64_t count(std::size_t task, std::size_t group) const {
    return counts_[task * cols_ + group];
  }

  // Increments count[eval_task][g] for every group with nonzero weight.
  // eval_task is zero-based.
  void record(const InterGateDecision& decision, std::size_t eval_task);
  void merge(const SelectionFrequency& other);
  void set(std::size_t task, std::size_t group, std::uint64_t value) {
    counts_[task * cols_ + group] = value;
  }

  // Header row "task,g1,...,gN" then one row per evaluation task.
  std::string to_csv() const;

  friend bool operator==(const SelectionFrequency&, const SelectionFrequency&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint64_t> counts_;
};

}  // namespace trge
