#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace trge {

// Marker for a logit excluded from a softmax. Entries equal to kMasked map to
// exactly zero probability.
inline constexpr double kMasked = -std::numeric_limits<double>::infinity();

inline bool is_masked(double v) { return v == kMasked; }

// Dense real vector. Thin value wrapper so dimension checks live in one place.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  Vector(std::initializer_list<double> init) : values_(init) {}
  explicit Vector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  Vector& operator+=(const Vector& other);
  Vector& operator-=(const Vector& other);
  Vector& operator*=(double s);

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> values_;
};

Vector operator+(Vector a, const Vector& b);
Vector operator-(Vector a, const Vector& b);
Vector operator*(double s, Vector v);

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  // Rows given as nested lists; all rows must have equal length.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  static Matrix identity(std::size_t n);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// m · v
Vector matvec(const Matrix& m, const Vector& v);
// mᵀ · v, i.e. the row vector vᵀ·m written as a column.
Vector matvec_transposed(const Matrix& m, const Vector& v);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

double dot(const Vector& a, const Vector& b);
double norm(const Vector& v);
double euclidean(const Vector& a, const Vector& b);

// Max-subtracted softmax. Entries equal to kMasked receive exactly 0.
Vector softmax(const Vector& v);

// Indices of the k largest entries in ascending index order. Ties resolve to
// the lowest index.
std::vector<std::size_t> topk_mask(const Vector& v, std::size_t k);

// Index of the largest entry, lowest index on ties.
std::size_t argmax(const Vector& v);

bool all_finite(std::span<const double> values);

// Seeded pseudo-random source: 64-bit Mersenne Twister (std::mt19937_64, whose
// output sequence is fixed by the C++ standard) with portable uniform and
// Box-Muller normal conversions, so streams are identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n).
  std::size_t uniform_index(std::size_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent child generator keyed by `tag`; does not advance this one.
  Rng fork(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Deterministic 64-bit mix used to derive sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace trge
