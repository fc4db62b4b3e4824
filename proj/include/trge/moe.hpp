#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "trge/numerics.hpp"

namespace trge {

// Low-rank expert: x ↦ scale · up · (down · x).
struct LowRankExpert {
  Matrix down;  // r × d
  Matrix up;    // d × r
  double scale = 1.0;

  std::size_t rank() const noexcept { return down.rows(); }
  std::size_t dim() const noexcept { return down.cols(); }

  friend bool operator==(const LowRankExpert&, const LowRankExpert&) = default;
};

Vector expert_forward(const LowRankExpert& e, const Vector& x);

struct IntraGateDecision {
  Vector weights;                      // length N_e, exactly k nonzero
  std::vector<std::size_t> selected;   // ascending expert indices
};

struct GroupShape {
  std::size_t dim = 16;
  std::size_t num_experts = 3;
  std::size_t rank = 4;
  double scale = 0.25;     // low-rank output scale, conventionally 1/rank
  double init_std = 0.1;   // std of down-projection and gate initialisation

  friend bool operator==(const GroupShape&, const GroupShape&) = default;
};

struct GroupGradient;

// Fixed-size set of experts owned by one task, with its own top-k gate.
class ExpertGroup {
 public:
  ExpertGroup() = default;
  ExpertGroup(std::vector<LowRankExpert> experts, Matrix gate, int task_index);

  // Gaussian down-projections and gate, zero up-projections: a fresh group is
  // the zero map.
  static ExpertGroup initialise(const GroupShape& shape, int task_index, Rng& rng);

  std::size_t num_experts() const noexcept { return experts_.size(); }
  std::size_t dim() const noexcept { return gate_.rows(); }
  int task_index() const noexcept { return task_index_; }
  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }

  const std::vector<LowRankExpert>& experts() const noexcept { return experts_; }
  const Matrix& gate() const noexcept { return gate_; }

  std::size_t parameter_count() const;

  // Parameter storage in a fixed order: gate, then (down, up) per expert.
  std::vector<std::span<const double>> parameter_blocks() const;
  // Mutable access for optimisers. Throws FrozenViolation on a frozen group.
  std::vector<std::span<double>> mutable_parameter_blocks();

  friend bool operator==(const ExpertGroup&, const ExpertGroup&) = default;

 private:
  std::vector<LowRankExpert> experts_;
  Matrix gate_;  // d × N_e
  int task_index_ = 0;
  bool frozen_ = false;
};

// Gradient buffer laid out like ExpertGroup::parameter_blocks().
struct GroupGradient {
  Matrix gate;
  std::vector<Matrix> down;
  std::vector<Matrix> up;

  explicit GroupGradient(const ExpertGroup& g);
  void zero();
  void scale(double s);
  std::vector<std::span<const double>> blocks() const;
};

IntraGateDecision intra_route(const ExpertGroup& g, const Vector& x, std::size_t k);

Vector group_forward(const ExpertGroup& g, const Vector& x, std::size_t k);

// Accumulates d(loss)/d(parameters) into `grad` given d(loss)/d(group output).
void group_backward(const ExpertGroup& g, const Vector& x, std::size_t k,
                    const Vector& output_grad, GroupGradient& grad);

// Lowercase hex SHA-256 over the raw parameter bytes.
std::string parameter_hash(const ExpertGroup& g);

}  // namespace trge
