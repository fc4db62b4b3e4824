#include "trge/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trge/error.hpp"

namespace trge {

ClassId Logits::prediction() const {
  if (classes.empty()) throw InvalidArgument("prediction on empty logits");
  return classes[argmax(scores)];
}

double Logits::score(ClassId c) const {
  const auto it = std::lower_bound(classes.begin(), classes.end(), c);
  if (it == classes.end() || *it != c) {
    throw InvalidArgument("class " + std::to_string(c) + " not among logits");
  }
  return scores[static_cast<std::size_t>(it - classes.begin())];
}

FrozenBackbone::FrozenBackbone(Matrix projection, Vector bias,
                               std::map<ClassId, Vector> class_embeddings, std::uint64_t seed)
    : projection_(std::move(projection)),
      bias_(std::move(bias)),
      class_embeddings_(std::move(class_embeddings)),
      seed_(seed) {
  if (bias_.size() != projection_.rows()) {
    throw InvalidArgument("backbone bias length must equal feature dimension");
  }
  for (auto& [id, emb] : class_embeddings_) {
    if (emb.size() != projection_.rows()) {
      throw InvalidArgument("class embedding " + std::to_string(id) + " has wrong dimension");
    }
    const double n = norm(emb);
    if (!(n > 0.0)) throw InvalidArgument("class embedding " + std::to_string(id) + " is zero");
    emb *= 1.0 / n;
  }
}

FrozenBackbone FrozenBackbone::restore(Matrix projection, Vector bias,
                                       std::map<ClassId, Vector> class_embeddings,
                                       std::uint64_t seed) {
  for (const auto& [id, emb] : class_embeddings) {
    if (std::abs(norm(emb) - 1.0) > 1e-9) {
      throw InvalidArgument("stored class embedding " + std::to_string(id) + " is not unit norm");
    }
  }
  FrozenBackbone b;
  b.projection_ = std::move(projection);
  b.bias_ = std::move(bias);
  b.class_embeddings_ = std::move(class_embeddings);
  b.seed_ = seed;
  if (b.bias_.size() != b.projection_.rows()) {
    throw InvalidArgument("backbone bias length must equal feature dimension");
  }
  return b;
}

FrozenBackbone FrozenBackbone::random(std::size_t d_in, std::size_t d, std::size_t num_classes,
                                      std::uint64_t seed) {
  if (d == 0 || d_in < d) throw InvalidArgument("backbone requires 0 < d <= d_in");
  Rng rng(seed);

  // Gram-Schmidt over Gaussian rows gives orthonormal rows, so P·Pᵀ = I.
  Matrix projection(d, d_in);
  for (std::size_t r = 0; r < d; ++r) {
    auto row = projection.row(r);
    for (double& v : row) v = rng.normal();
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t q = 0; q < r; ++q) {
        const auto prev = projection.row(q);
        double overlap = 0.0;
        for (std::size_t c = 0; c < d_in; ++c) overlap += row[c] * prev[c];
        for (std::size_t c = 0; c < d_in; ++c) row[c] -= overlap * prev[c];
      }
    }
    double n = 0.0;
    for (double v : row) n += v * v;
    n = std::sqrt(n);
    for (double& v : row) v /= n;
  }

  std::map<ClassId, Vector> embeddings;
  for (std::size_t c = 0; c < num_classes; ++c) {
    Vector e(d);
    for (double& v : e) v = rng.normal();
    embeddings.emplace(static_cast<ClassId>(c), std::move(e));
  }
  return FrozenBackbone(std::move(projection), Vector(d), std::move(embeddings), seed);
}

const Vector& FrozenBackbone::class_embedding(ClassId c) const {
  const auto it = class_embeddings_.find(c);
  if (it == class_embeddings_.end()) {
    throw InvalidArgument("unknown class id " + std::to_string(c));
  }
  return it->second;
}

Vector FrozenBackbone::embed(const Vector& x) const {
  if (x.size() != input_dim()) {
    throw InvalidArgument("embed: input dimension " + std::to_string(x.size()) +
                          " != " + std::to_string(input_dim()));
  }
  Vector y = matvec(projection_, x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i] + bias_[i]);
  return y;
}

Logits FrozenBackbone::classify(const Vector& feature, std::span<const ClassId> candidates) const {
  if (candidates.empty()) throw InvalidArgument("classify: empty candidate set");
  const double feature_norm = norm(feature);
  if (!(feature_norm > 0.0)) throw InvalidArgument("classify: zero-norm feature");

  Logits out;
  out.classes.assign(candidates.begin(), candidates.end());
  std::sort(out.classes.begin(), out.classes.end());
  out.classes.erase(std::unique(out.classes.begin(), out.classes.end()), out.classes.end());
  out.scores = Vector(out.classes.size());
  for (std::size_t i = 0; i < out.classes.size(); ++i) {
    out.scores[i] = dot(feature, class_embedding(out.classes[i])) / feature_norm;
  }
  return out;
}

}  // namespace trge
