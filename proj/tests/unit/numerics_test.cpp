#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "support.hpp"
#include "trge/error.hpp"
#include "trge/numerics.hpp"

namespace trge {
namespace {

TEST(Matvec, IdentityAndHandArithmetic) {
  EXPECT_EQ(matvec(Matrix{{1, 0}, {0, 1}}, Vector{3, 4}), (Vector{3, 4}));
  EXPECT_EQ(matvec(Matrix{{1, 2}, {3, 4}}, Vector{1, 1}), (Vector{3, 7}));
}

TEST(Matvec, DimensionMismatchRejected) {
  EXPECT_THROW(matvec(Matrix(2, 3), Vector{1, 1}), InvalidArgument);
}

TEST(Matvec, TransposedAgreesWithExplicitTranspose) {
  Rng rng(3);
  const Matrix m = testing::random_matrix(4, 3, rng);
  const Vector v = testing::random_vector(4, rng);
  const Vector a = matvec_transposed(m, v);
  const Vector b = matvec(transpose(m), v);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(Softmax, SpecExamples) {
  const Vector even = softmax(Vector{0, 0});
  EXPECT_DOUBLE_EQ(even[0], 0.5);
  EXPECT_DOUBLE_EQ(even[1], 0.5);

  const Vector p = softmax(Vector{2, 1});
  EXPECT_NEAR(p[0], 0.731059, 1e-6);
  EXPECT_NEAR(p[1], 0.268941, 1e-6);
  const auto oracle = testing::naive_softmax({2, 1});
  EXPECT_NEAR(p[0], oracle[0], 1e-15);

  const Vector masked = softmax(Vector{1, kMasked});
  EXPECT_EQ(masked[0], 1.0);
  EXPECT_EQ(masked[1], 0.0);
}

TEST(Softmax, RejectsFullyMaskedAndEmpty) {
  EXPECT_THROW(softmax(Vector{kMasked, kMasked}), InvalidArgument);
  EXPECT_THROW(softmax(Vector{}), InvalidArgument);
  EXPECT_THROW(softmax(Vector{1.0, std::nan("")}), InvalidArgument);
}

TEST(Softmax, LargeLogitsStayFinite) {
  const Vector p = softmax(Vector{1000, 999});
  EXPECT_TRUE(all_finite(p.span()));
  EXPECT_NEAR(p[0], 0.731059, 1e-6);
}

TEST(SoftmaxProperty, SimplexAndShiftInvariance) {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(8);
    Vector v = testing::random_vector(n, rng, 5.0);
    if (n > 1 && rng.uniform() < 0.3) v[rng.uniform_index(n)] = kMasked;
    const Vector p = softmax(v);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_GE(p[i], 0.0);
      if (is_masked(v[i])) {
        ASSERT_EQ(p[i], 0.0);
      }
      sum += p[i];
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);

    const double c = rng.uniform(-50.0, 50.0);
    Vector shifted = v;
    for (double& x : shifted)
      if (!is_masked(x)) x += c;
    const Vector q = softmax(shifted);
    for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(p[i], q[i], 1e-9);
  }
}

TEST(TopK, SpecExamples) {
  EXPECT_EQ(topk_mask(Vector{2.0, 1.0, 0.5}, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(topk_mask(Vector{1.0, 1.0, 0.2}, 1), (std::vector<std::size_t>{0}));
  EXPECT_EQ(topk_mask(Vector{0.3, -1.0, 7.0}, 3), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(topk_mask(Vector{1.0}, 0), InvalidArgument);
  EXPECT_THROW(topk_mask(Vector{1.0}, 2), InvalidArgument);
}

// Reference: stable sort of indices by descending value keeps lower indices
// first among equals.
std::vector<std::size_t> topk_oracle(const Vector& v, std::size_t k) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

TEST(TopKProperty, MatchesStableSortAndIsNested) {
  Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(7);
    Vector v(n);
    // Coarse values so ties are frequent.
    for (double& x : v) x = static_cast<double>(rng.uniform_index(3));
    for (std::size_t k = 1; k <= n; ++k) {
      const auto got = topk_mask(v, k);
      ASSERT_EQ(got, topk_oracle(v, k));
      if (k < n) {
        const auto bigger = topk_mask(v, k + 1);
        ASSERT_TRUE(std::includes(bigger.begin(), bigger.end(), got.begin(), got.end()));
      }
    }
  }
}

TEST(Argmax, LowestIndexOnTies) {
  EXPECT_EQ(argmax(Vector{1, 3, 3}), 1u);
  EXPECT_EQ(argmax(Vector{-2}), 0u);
}

TEST(Euclidean, SpecExamples) {
  EXPECT_DOUBLE_EQ(euclidean(Vector{0, 0}, Vector{3, 4}), 5.0);
  EXPECT_DOUBLE_EQ(euclidean(Vector{1, 2}, Vector{1, 2}), 0.0);
  EXPECT_NEAR(euclidean(Vector{1, 1}, Vector{2, 2}), 1.414214, 1e-6);
  EXPECT_THROW(euclidean(Vector{1}, Vector{1, 2}), InvalidArgument);
}

TEST(Rng, ReproducibleAndForksIndependent) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  Rng c(42);
  Rng f1 = c.fork(1), f2 = c.fork(2);
  EXPECT_NE(f1.next_u64(), f2.next_u64());
  Rng d(42);
  EXPECT_EQ(c.next_u64(), d.next_u64());
}

TEST(Rng, FirstOutputIsTheStandardMt19937_64Value) {
  // The standard fixes the 10000th output of a default-seeded mt19937_64.
  Rng rng(5489u);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = rng.next_u64();
  EXPECT_EQ(x, 9981545732273789042ull);
}

TEST(Rng, UniformIndexCoversRangeEvenly) {
  Rng rng(9);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[rng.uniform_index(5)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

TEST(Rng, NormalMoments) {
  Rng rng(10);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

}  // namespace
}  // namespace trge
