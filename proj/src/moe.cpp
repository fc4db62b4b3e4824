#include "trge/moe.hpp"

#include <string>

#include "trge/digest.hpp"
#include "trge/error.hpp"

namespace trge {

Vector expert_forward(const LowRankExpert& e, const Vector& x) {
  if (x.size() != e.dim()) {
    throw InvalidArgument("expert_forward: input dimension " + std::to_string(x.size()) +
                          " != " + std::to_string(e.dim()));
  }
  Vector out = matvec(e.up, matvec(e.down, x));
  out *= e.scale;
  return out;
}

ExpertGroup::ExpertGroup(std::vector<LowRankExpert> experts, Matrix gate, int task_index)
    : experts_(std::move(experts)), gate_(std::move(gate)), task_index_(task_index) {
  if (experts_.empty()) throw InvalidArgument("expert group needs at least one expert");
  if (gate_.cols() != experts_.size()) {
    throw InvalidArgument("gate column count must equal expert count");
  }
  for (const auto& e : experts_) {
    if (e.dim() != gate_.rows() || e.up.rows() != gate_.rows() || e.up.cols() != e.rank()) {
      throw InvalidArgument("expert shape inconsistent with gate dimension");
    }
  }
}

ExpertGroup ExpertGroup::initialise(const GroupShape& shape, int task_index, Rng& rng) {
  if (shape.num_experts == 0 || shape.rank == 0 || shape.dim == 0) {
    throw InvalidArgument("group shape must be positive");
  }
  std::vector<LowRankExpert> experts;
  experts.reserve(shape.num_experts);
  for (std::size_t i = 0; i < shape.num_experts; ++i) {
    LowRankExpert e{Matrix(shape.rank, shape.dim), Matrix(shape.dim, shape.rank), shape.scale};
    for (double& v : e.down.span()) v = rng.normal(0.0, shape.init_std);
    experts.push_back(std::move(e));
  }
  Matrix gate(shape.dim, shape.num_experts);
  for (double& v : gate.span()) v = rng.normal(0.0, shape.init_std);
  return ExpertGroup(std::move(experts), std::move(gate), task_index);
}

std::size_t ExpertGroup::parameter_count() const {
  std::size_t n = gate_.values().size();
  for (const auto& e : experts_) n += e.down.values().size() + e.up.values().size();
  return n;
}

std::vector<std::span<const double>> ExpertGroup::parameter_blocks() const {
  std::vector<std::span<const double>> blocks{gate_.span()};
  for (const auto& e : experts_) {
    blocks.push_back(e.down.span());
    blocks.push_back(e.up.span());
  }
  return blocks;
}

std::vector<std::span<double>> ExpertGroup::mutable_parameter_blocks() {
  if (frozen_) {
    throw FrozenViolation("attempted update of frozen expert group for task " +
                          std::to_string(task_index_));
  }
  std::vector<std::span<double>> blocks{gate_.span()};
  for (auto& e : experts_) {
    blocks.push_back(e.down.span());
    blocks.push_back(e.up.span());
  }
  return blocks;
}

GroupGradient::GroupGradient(const ExpertGroup& g) : gate(g.dim(), g.num_experts()) {
  for (const auto& e : g.experts()) {
    down.emplace_back(e.down.rows(), e.down.cols());
    up.emplace_back(e.up.rows(), e.up.cols());
  }
}

void GroupGradient::zero() {
  for (double& v : gate.span()) v = 0.0;
  for (auto& m : down)
    for (double& v : m.span()) v = 0.0;
  for (auto& m : up)
    for (double& v : m.span()) v = 0.0;
}

void GroupGradient::scale(double s) {
  for (double& v : gate.span()) v *= s;
  for (auto& m : down)
    for (double& v : m.span()) v *= s;
  for (auto& m : up)
    for (double& v : m.span()) v *= s;
}

std::vector<std::span<const double>> GroupGradient::blocks() const {
  std::vector<std::span<const double>> out{gate.span()};
  for (std::size_t i = 0; i < down.size(); ++i) {
    out.push_back(down[i].span());
    out.push_back(up[i].span());
  }
  return out;
}

IntraGateDecision intra_route(const ExpertGroup& g, const Vector& x, std::size_t k) {
  if (k < 1 || k > g.num_experts()) {
    throw InvalidArgument("intra_route: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(g.num_experts()) + "]");
  }
  const Vector logits = matvec_transposed(g.gate(), x);
  IntraGateDecision decision;
  decision.selected = topk_mask(logits, k);
  Vector masked(logits.size(), kMasked);
  for (std::size_t i : decision.selected) masked[i] = logits[i];
  decision.weights = softmax(masked);
  return decision;
}

Vector group_forward(const ExpertGroup& g, const Vector& x, std::size_t k) {
  const IntraGateDecision decision = intra_route(g, x, k);
  Vector out(g.dim());
  for (std::size_t i : decision.selected) {
    Vector e = expert_forward(g.experts()[i], x);
    e *= decision.weights[i];
    out += e;
  }
  return out;
}

void group_backward(const ExpertGroup& g, const Vector& x, std::size_t k,
                    const Vector& output_grad, GroupGradient& grad) {
  const IntraGateDecision decision = intra_route(g, x, k);

  // d(loss)/d(h_i) = output_grad · E_i(x) for the selected experts.
  std::vector<double> weight_grad(g.num_experts(), 0.0);
  for (std::size_t i : decision.selected) {
    const LowRankExpert& e = g.experts()[i];
    const double h = decision.weights[i];
    const Vector hidden = matvec(e.down, x);                // r
    Vector out = matvec(e.up, hidden);                      // d
    out *= e.scale;
    weight_grad[i] = dot(output_grad, out);

    // Through the expert itself, weighted by h_i.
    const double coeff = h * e.scale;
    Matrix& gu = grad.up[i];
    for (std::size_t a = 0; a < gu.rows(); ++a) {
      const double ga = coeff * output_grad[a];
      for (std::size_t b = 0; b < gu.cols(); ++b) gu(a, b) += ga * hidden[b];
    }
    Vector hidden_grad = matvec_transposed(e.up, output_grad);
    hidden_grad *= coeff;
    Matrix& gd = grad.down[i];
    for (std::size_t a = 0; a < gd.rows(); ++a) {
      const double ha = hidden_grad[a];
      for (std::size_t b = 0; b < gd.cols(); ++b) gd(a, b) += ha * x[b];
    }
  }

  // Softmax over the kept logits; the top-k selection is piecewise constant.
  double mean_grad = 0.0;
  for (std::size_t i : decision.selected) mean_grad += decision.weights[i] * weight_grad[i];
  for (std::size_t i : decision.selected) {
    const double logit_grad = decision.weights[i] * (weight_grad[i] - mean_grad);
    for (std::size_t a = 0; a < g.dim(); ++a) grad.gate(a, i) += x[a] * logit_grad;
  }
}

std::string parameter_hash(const ExpertGroup& g) {
  Sha256 hasher;
  for (const auto block : g.parameter_blocks()) hasher.update(std::as_bytes(block));
  return hasher.hex_digest();
}

}  // namespace trge
