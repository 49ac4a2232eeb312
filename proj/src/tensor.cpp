#include "wgcn/tensor.hpp"

#include "wgcn/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace wgcn {

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

static void check_shape(const Shape& shape) {
  for (Index d : shape)
    if (d <= 0) throw DimensionError("tensor shape must be positive, got " + to_string(shape));
}

Tensor::Tensor(Shape shape, Scalar fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_ = Vector::Constant(numel(shape_), fill);
}

Tensor::Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (numel(shape_) != data_.size())
    throw DimensionError("shape " + to_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
}

Tensor::Tensor(Shape shape, std::initializer_list<Scalar> values) : shape_(std::move(shape)) {
  check_shape(shape_);
  if (numel(shape_) != static_cast<Index>(values.size()))
    throw DimensionError("shape " + to_string(shape_) + " does not match " +
                         std::to_string(values.size()) + " values");
  data_.resize(static_cast<Index>(values.size()));
  Index i = 0;
  for (Scalar v : values) data_[i++] = v;
}

Tensor Tensor::identity(Index n) {
  Tensor t({n, n});
  for (Index i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
  return t;
}

Tensor Tensor::from_matrix(const RowMatrix& m) {
  Tensor t({m.rows(), m.cols()});
  t.matrix() = m;
  return t;
}

Index Tensor::offset(std::initializer_list<Index> idx) const {
  if (static_cast<std::size_t>(idx.size()) != shape_.size())
    throw DimensionError("index rank does not match tensor rank " + to_string(shape_));
  Index off = 0;
  std::size_t a = 0;
  for (Index i : idx) {
    if (i < 0 || i >= shape_[a]) throw DimensionError("index out of range for " + to_string(shape_));
    off = off * shape_[a] + i;
    ++a;
  }
  return off;
}

Scalar& Tensor::at(std::initializer_list<Index> idx) { return data_[offset(idx)]; }
Scalar Tensor::at(std::initializer_list<Index> idx) const { return data_[offset(idx)]; }

Scalar Tensor::item() const {
  if (data_.size() != 1) throw DimensionError("item() on tensor of shape " + to_string(shape_));
  return data_[0];
}

MatrixMap Tensor::matrix(Index rows, Index cols) {
  if (rows * cols != data_.size()) throw DimensionError("matrix view does not cover " + to_string(shape_));
  return MatrixMap(data_.data(), rows, cols);
}

ConstMatrixMap Tensor::matrix(Index rows, Index cols) const {
  if (rows * cols != data_.size()) throw DimensionError("matrix view does not cover " + to_string(shape_));
  return ConstMatrixMap(data_.data(), rows, cols);
}

MatrixMap Tensor::matrix() {
  if (rank() != 2) throw DimensionError("matrix() needs a rank-2 tensor, got " + to_string(shape_));
  return matrix(shape_[0], shape_[1]);
}

ConstMatrixMap Tensor::matrix() const {
  if (rank() != 2) throw DimensionError("matrix() needs a rank-2 tensor, got " + to_string(shape_));
  return matrix(shape_[0], shape_[1]);
}

Tensor Tensor::reshaped(Shape new_shape) const {
  if (numel(new_shape) != data_.size())
    throw DimensionError("cannot reshape " + to_string(shape_) + " to " + to_string(new_shape));
  return Tensor(std::move(new_shape), data_);
}

// --- Rng ---------------------------------------------------------------------

static std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

Rng::Rng(std::uint64_t seed) {
  for (auto& s : s_) s = splitmix64(seed);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller; one draw discarded to stay stateless.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

Tensor random_uniform(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

Tensor random_normal(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

}  // namespace wgcn
