#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace wgcn {

using Scalar = double;
using Index = Eigen::Index;
using Shape = std::vector<Index>;

using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

Index numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense row-major n-d array. Rank 0 (empty shape) holds one element.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = 0.0);
  Tensor(Shape shape, Vector data);
  Tensor(Shape shape, std::initializer_list<Scalar> values);

  static Tensor scalar(Scalar v) { return Tensor(Shape{}, Vector::Constant(1, v)); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }
  static Tensor identity(Index n);
  static Tensor from_matrix(const RowMatrix& m);

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0 && shape_.empty(); }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }
  Scalar* ptr() { return data_.data(); }
  const Scalar* ptr() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }
  Scalar& at(std::initializer_list<Index> idx);
  Scalar at(std::initializer_list<Index> idx) const;
  Scalar item() const;

  // Views a rank-2 tensor (or any tensor folded to rows x cols) as a matrix.
  MatrixMap matrix(Index rows, Index cols);
  ConstMatrixMap matrix(Index rows, Index cols) const;
  MatrixMap matrix();
  ConstMatrixMap matrix() const;

  Tensor reshaped(Shape new_shape) const;
  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Index offset(std::initializer_list<Index> idx) const;

  Shape shape_;
  Vector data_;
};

// xoshiro256** seeded through splitmix64. Draws are bitwise identical across
// standard libraries, unlike the std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double normal();
  std::uint64_t below(std::uint64_t n);    // [0, n)

 private:
  std::uint64_t s_[4];
};

Tensor random_uniform(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0);
Tensor random_normal(Shape shape, Rng& rng);

}  // namespace wgcn
