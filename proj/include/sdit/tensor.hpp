#ifndef SDIT_TENSOR_HPP
#define SDIT_TENSOR_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <ostream>
#include <string>

#include "sdit/errors.hpp"

namespace sdit {

using Index = Eigen::Index;

/// NHWC extent of a batched feature map. Vectors are stored as (n, 1, 1, c).
struct Shape {
  Index n = 0;
  Index h = 0;
  Index w = 0;
  Index c = 0;

  Index rows() const { return n * h * w; }
  Index size() const { return n * h * w * c; }
  bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.h) + "," + std::to_string(s.w) +
         "," + std::to_string(s.c) + ")";
}

inline std::ostream& operator<<(std::ostream& os, const Shape& s) { return os << to_string(s); }

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense batched tensor in NHWC order. `data` has one row per pixel and one
/// column per channel, so a row-major buffer is exactly the NHWC layout.
template <typename Scalar>
struct Tensor {
  Shape shape;
  RowMatrix<Scalar> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), data(RowMatrix<Scalar>::Zero(s.rows(), s.c)) {}
  Tensor(Shape s, RowMatrix<Scalar> d) : shape(s), data(std::move(d)) {
    if (data.rows() != s.rows() || data.cols() != s.c) {
      throw DomainError("tensor buffer does not match shape " + to_string(s));
    }
  }

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor constant(Shape s, Scalar v) {
    Tensor t(s);
    t.data.setConstant(v);
    return t;
  }

  bool empty() const { return shape.size() == 0; }
  Index size() const { return shape.size(); }
  Scalar* ptr() { return data.data(); }
  const Scalar* ptr() const { return data.data(); }

  Scalar& at(Index n, Index y, Index x, Index c) {
    return data((n * shape.h + y) * shape.w + x, c);
  }
  Scalar at(Index n, Index y, Index x, Index c) const {
    return data((n * shape.h + y) * shape.w + x, c);
  }

  /// Flat view over all elements in NHWC order.
  Eigen::Map<Vector<Scalar>> flat() { return {data.data(), size()}; }
  Eigen::Map<const Vector<Scalar>> flat() const { return {data.data(), size()}; }

  /// Rows belonging to batch element `i`.
  auto sample_rows(Index i) { return data.middleRows(i * shape.h * shape.w, shape.h * shape.w); }
  auto sample_rows(Index i) const {
    return data.middleRows(i * shape.h * shape.w, shape.h * shape.w);
  }

  /// Copies samples [first, first + count) into a new tensor.
  Tensor slice_batch(Index first, Index count) const {
    const Index per = shape.h * shape.w;
    Shape s{count, shape.h, shape.w, shape.c};
    return Tensor(s, data.middleRows(first * per, count * per));
  }

  bool all_finite() const { return data.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape, data.template cast<Other>());
  }
};

/// Concatenates tensors along the batch axis.
template <typename Scalar, typename Range>
Tensor<Scalar> stack_batch(const Range& parts) {
  Shape s{};
  bool first = true;
  for (const Tensor<Scalar>& p : parts) {
    if (first) {
      s = p.shape;
      s.n = 0;
      first = false;
    } else if (p.shape.h != s.h || p.shape.w != s.w || p.shape.c != s.c) {
      throw DomainError("stack_batch: inconsistent shapes");
    }
    s.n += p.shape.n;
  }
  Tensor<Scalar> out(s);
  Index row = 0;
  for (const Tensor<Scalar>& p : parts) {
    out.data.middleRows(row, p.data.rows()) = p.data;
    row += p.data.rows();
  }
  return out;
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw DomainError(std::string(what) + ": shape mismatch " + to_string(a) + " vs " +
                      to_string(b));
  }
}

}  // namespace sdit

#endif  // SDIT_TENSOR_HPP
