#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "trge/adapter.hpp"
#include "trge/backbone.hpp"
#include "trge/fusion.hpp"
#include "trge/moe.hpp"
#include "trge/numerics.hpp"

namespace trge::testing {

inline Vector random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& x : m.span()) x = scale * rng.normal();
  return m;
}

// Group with every parameter drawn at random, so no expert is the zero map.
inline ExpertGroup random_group(std::size_t d, std::size_t n_e, std::size_t r, Rng& rng,
                                int task = 1) {
  std::vector<LowRankExpert> experts;
  for (std::size_t i = 0; i < n_e; ++i) {
    experts.push_back(
        LowRankExpert{random_matrix(r, d, rng, 0.5), random_matrix(d, r, rng, 0.5), 1.0 / r});
  }
  return ExpertGroup(std::move(experts), random_matrix(d, n_e, rng), task);
}

// Plain softmax written out term by term, no max subtraction.
inline std::vector<double> naive_softmax(const std::vector<double>& v) {
  double z = 0.0;
  for (double x : v) z += std::exp(x);
  std::vector<double> out;
  for (double x : v) out.push_back(std::exp(x) / z);
  return out;
}

// One random small instance of the full training loss: several groups with
// prototypes, a routed decision and a fusion weight. Returns the relative
// error ||analytic − numeric|| / max(||analytic||, ||numeric||) of the
// gradient for one group, using central differences.
inline double gradient_check_instance(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = 2 + rng.uniform_index(7);
  const std::size_t r = 1 + rng.uniform_index(2);
  const std::size_t n_e = 1 + rng.uniform_index(3);
  const std::size_t groups = 1 + rng.uniform_index(3);
  const std::size_t classes = 2 + rng.uniform_index(3);

  std::map<ClassId, Vector> emb;
  for (std::size_t c = 0; c < classes; ++c) emb[static_cast<ClassId>(c)] = random_vector(d, rng);
  const FrozenBackbone backbone(Matrix::identity(d), Vector(d), emb);
  std::vector<ClassId> candidates;
  for (std::size_t c = 0; c < classes; ++c) candidates.push_back(static_cast<ClassId>(c));

  TrgeAdapter adapter(GroupShape{d, n_e, r, 1.0 / static_cast<double>(r), 0.1}, true);
  for (std::size_t g = 0; g < groups; ++g) {
    adapter.push_group(random_group(d, n_e, r, rng, static_cast<int>(g + 1)));
    adapter.mutable_prototypes().append(random_vector(d, rng, 0.5), DistanceStats{1.0, 0.1});
  }

  RoutingConfig routing;
  routing.top_k = 1 + rng.uniform_index(n_e);
  routing.theta = 0.05 + 0.3 * rng.uniform();
  routing.k_groups = 1 + rng.uniform_index(groups);
  const Vector y_pre = random_vector(d, rng, 0.7);
  const bool unseen = rng.uniform() < 0.3;
  const TaskId id = unseen ? TaskId::unseen() : TaskId(1 + static_cast<int>(rng.uniform_index(groups)));
  const InterGateDecision decision =
      adapter.route(adapter.prototypes().prototypes(), y_pre, id, routing);
  const double fusion =
      fusion_weight(id, FusionConfig{0.05 + 0.25 * rng.uniform(), groups});
  const std::size_t trainable = decision.active()[rng.uniform_index(decision.active().size())];
  const ClassId target = candidates[rng.uniform_index(classes)];
  const double eps_ls = 0.1, temperature = 1.0 + 4.0 * rng.uniform();

  auto loss_at = [&](GroupGradient& g) {
    return sample_loss_and_gradient(adapter, backbone, y_pre, decision, fusion, target, candidates,
                                    routing, eps_ls, temperature, trainable, g);
  };
  GroupGradient analytic(adapter.groups()[trainable]);
  analytic.zero();
  loss_at(analytic);

  std::vector<double> a, n;
  for (std::span<const double> b : analytic.blocks()) a.insert(a.end(), b.begin(), b.end());
  const double h = 1e-6;
  GroupGradient scratch(adapter.groups()[trainable]);
  for (std::span<double> block : adapter.mutable_group(trainable).mutable_parameter_blocks()) {
    for (double& p : block) {
      const double saved = p;
      p = saved + h;
      const double up = loss_at(scratch);
      p = saved - h;
      const double down = loss_at(scratch);
      p = saved;
      n.push_back((up - down) / (2.0 * h));
    }
  }
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

inline double naive_cosine(const Vector& a, const Vector& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace trge::testing
