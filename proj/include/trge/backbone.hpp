#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "trge/numerics.hpp"

namespace trge {

using ClassId = std::int32_t;

// Cosine scores for a candidate class set, ordered by ascending class id.
struct Logits {
  std::vector<ClassId> classes;
  Vector scores;

  // Highest-scoring class; lowest id on ties.
  ClassId prediction() const;
  double score(ClassId c) const;
};

// Frozen stand-in for a pretrained encoder pair: a fixed nonlinear embedder
// for inputs and a unit-norm embedding per class.
class FrozenBackbone {
 public:
  FrozenBackbone() = default;
  // projection is d × d_in, bias has length d. Class embeddings are
  // normalised on construction.
  FrozenBackbone(Matrix projection, Vector bias, std::map<ClassId, Vector> class_embeddings,
                 std::uint64_t seed = 0);

  // Rebuilds a stored backbone bit-exactly; embeddings must already be unit
  // norm (within 1e-9) and are not renormalised.
  static FrozenBackbone restore(Matrix projection, Vector bias,
                                std::map<ClassId, Vector> class_embeddings, std::uint64_t seed);

  // Random backbone: projection rows are orthonormal, zero bias, class
  // embeddings are isotropic unit vectors for ids [0, num_classes).
  static FrozenBackbone random(std::size_t d_in, std::size_t d, std::size_t num_classes,
                               std::uint64_t seed);

  std::size_t input_dim() const noexcept { return projection_.cols(); }
  std::size_t feature_dim() const noexcept { return projection_.rows(); }
  std::uint64_t seed() const noexcept { return seed_; }

  const Matrix& projection() const noexcept { return projection_; }
  const Vector& bias() const noexcept { return bias_; }
  const std::map<ClassId, Vector>& class_embeddings() const noexcept { return class_embeddings_; }
  const Vector& class_embedding(ClassId c) const;

  // tanh(projection · x + bias)
  Vector embed(const Vector& x) const;

  // Cosine similarity of `feature` against every candidate's embedding.
  Logits classify(const Vector& feature, std::span<const ClassId> candidates) const;

  friend bool operator==(const FrozenBackbone&, const FrozenBackbone&) = default;

 private:
  Matrix projection_;
  Vector bias_;
  std::map<ClassId, Vector> class_embeddings_;
  std::uint64_t seed_ = 0;
};

}  // namespace trge
