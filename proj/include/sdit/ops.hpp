#ifndef SDIT_OPS_HPP
#define SDIT_OPS_HPP

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <type_traits>
#include <utility>

#include "sdit/autodiff.hpp"

// Differentiable tensor operations recorded on a Graph. Every op takes and
// returns Var handles; gradients flow only into operands that require them.

namespace sdit {

struct ConvGeometry {
  Index kernel = 3;
  Index stride = 1;
  Index pad = 1;
};

inline Index conv_output_extent(Index in, const ConvGeometry& g) {
  return (in + 2 * g.pad - g.kernel) / g.stride + 1;
}

inline Index conv_transpose_output_extent(Index in, const ConvGeometry& g) {
  return (in - 1) * g.stride - 2 * g.pad + g.kernel;
}

namespace detail {

template <typename Scalar>
void check_same_graph(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.graph != b.graph) throw DomainError("operands live on different graphs");
}

template <typename Scalar>
void accumulate(Graph<Scalar>& g, const Var<Scalar>& v, const RowMatrix<Scalar>& delta) {
  if (!v.requires_grad()) return;
  g.grad(v.id).data += delta;
}

}  // namespace detail

/// Patch matrix of `x` for a convolution evaluated on an (out_h, out_w) grid.
/// Row r = output pixel, columns = (ky, kx, channel), zero outside the image.
template <typename Scalar>
RowMatrix<Scalar> im2col(const Tensor<Scalar>& x, const ConvGeometry& g, Index out_h,
                         Index out_w) {
  const Shape& s = x.shape;
  const Index k = g.kernel;
  const Index patch = k * k * s.c;
  RowMatrix<Scalar> cols(s.n * out_h * out_w, patch);
  Scalar* dst = cols.data();
  const Scalar* src = x.ptr();
  for (Index n = 0; n < s.n; ++n) {
    for (Index oy = 0; oy < out_h; ++oy) {
      for (Index ox = 0; ox < out_w; ++ox) {
        for (Index ky = 0; ky < k; ++ky) {
          const Index iy = oy * g.stride - g.pad + ky;
          for (Index kx = 0; kx < k; ++kx) {
            const Index ix = ox * g.stride - g.pad + kx;
            if (iy < 0 || iy >= s.h || ix < 0 || ix >= s.w) {
              std::fill(dst, dst + s.c, Scalar(0));
            } else {
              std::memcpy(dst, src + ((n * s.h + iy) * s.w + ix) * s.c, sizeof(Scalar) * s.c);
            }
            dst += s.c;
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatters patch rows back onto an image of `image` shape.
template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& cols, const ConvGeometry& g, Index out_h, Index out_w,
                Tensor<Scalar>& image) {
  const Shape& s = image.shape;
  const Index k = g.kernel;
  const Scalar* src = cols.data();
  Scalar* dst = image.ptr();
  for (Index n = 0; n < s.n; ++n) {
    for (Index oy = 0; oy < out_h; ++oy) {
      for (Index ox = 0; ox < out_w; ++ox) {
        for (Index ky = 0; ky < k; ++ky) {
          const Index iy = oy * g.stride - g.pad + ky;
          for (Index kx = 0; kx < k; ++kx) {
            const Index ix = ox * g.stride - g.pad + kx;
            if (iy >= 0 && iy < s.h && ix >= 0 && ix < s.w) {
              Scalar* px = dst + ((n * s.h + iy) * s.w + ix) * s.c;
              for (Index c = 0; c < s.c; ++c) px[c] += src[c];
            }
            src += s.c;
          }
        }
      }
    }
  }
}

/// 2-D convolution. `weight` is (1, 1, k*k*in, out); `bias`, when given, is
/// (1, 1, 1, out).
template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> weight, std::type_identity_t<std::optional<Var<Scalar>>> bias,
                   const ConvGeometry& geom) {
  Graph<Scalar>& g = *x.graph;
  const Shape in = x.shape();
  const RowMatrix<Scalar>& w = weight.value().data;
  if (w.rows() != geom.kernel * geom.kernel * in.c) {
    throw DomainError("conv2d: weight expects " + std::to_string(w.rows()) +
                      " patch values, input has " + std::to_string(in.c) + " channels");
  }
  const Index oh = conv_output_extent(in.h, geom);
  const Index ow = conv_output_extent(in.w, geom);
  if (oh <= 0 || ow <= 0) throw DomainError("conv2d: input too small for kernel");

  RowMatrix<Scalar> cols = im2col(x.value(), geom, oh, ow);
  Tensor<Scalar> out(Shape{in.n, oh, ow, w.cols()});
  out.data.noalias() = cols * w;
  if (bias) out.data.rowwise() += bias->value().data.row(0);

  const bool needs = x.requires_grad() || weight.requires_grad() ||
                     (bias && bias->requires_grad());
  return g.op(std::move(out), needs,
              [&g, x, weight, bias, geom, oh, ow, cols = std::move(cols)](const Tensor<Scalar>& dy) {
                if (weight.requires_grad()) g.grad(weight.id).data.noalias() += cols.transpose() * dy.data;
                if (bias && bias->requires_grad()) {
                  g.grad(bias->id).data.row(0) += dy.data.colwise().sum();
                }
                if (x.requires_grad()) {
                  RowMatrix<Scalar> dcols = dy.data * weight.value().data.transpose();
                  col2im_add(dcols, geom, oh, ow, g.grad(x.id));
                }
              });
}

/// Fractionally strided convolution, the adjoint of conv2d with the same
/// geometry. `weight` is (1, 1, in, k*k*out).
template <typename Scalar>
Var<Scalar> conv_transpose2d(Var<Scalar> x, Var<Scalar> weight, std::type_identity_t<std::optional<Var<Scalar>>> bias,
                             const ConvGeometry& geom) {
  Graph<Scalar>& g = *x.graph;
  const Shape in = x.shape();
  const RowMatrix<Scalar>& w = weight.value().data;
  if (w.rows() != in.c || w.cols() % (geom.kernel * geom.kernel) != 0) {
    throw DomainError("conv_transpose2d: weight shape does not match input channels");
  }
  const Index out_c = w.cols() / (geom.kernel * geom.kernel);
  const Shape os{in.n, conv_transpose_output_extent(in.h, geom),
                 conv_transpose_output_extent(in.w, geom), out_c};
  if (conv_output_extent(os.h, geom) != in.h || conv_output_extent(os.w, geom) != in.w) {
    throw DomainError("conv_transpose2d: geometry is not invertible for this input");
  }
  Tensor<Scalar> out(os);
  {
    RowMatrix<Scalar> cols = x.value().data * w;
    col2im_add(cols, geom, in.h, in.w, out);
  }
  if (bias) out.data.rowwise() += bias->value().data.row(0);

  const bool needs = x.requires_grad() || weight.requires_grad() ||
                     (bias && bias->requires_grad());
  return g.op(std::move(out), needs, [&g, x, weight, bias, geom, in](const Tensor<Scalar>& dy) {
    if (bias && bias->requires_grad()) g.grad(bias->id).data.row(0) += dy.data.colwise().sum();
    RowMatrix<Scalar> dcols = im2col(dy, geom, in.h, in.w);
    if (weight.requires_grad()) {
      g.grad(weight.id).data.noalias() += x.value().data.transpose() * dcols;
    }
    if (x.requires_grad()) {
      g.grad(x.id).data.noalias() += dcols * weight.value().data.transpose();
    }
  });
}

/// Fully connected layer on (n, 1, 1, in) inputs. `weight` is (1, 1, in, out).
template <typename Scalar>
Var<Scalar> linear(Var<Scalar> x, Var<Scalar> weight,
                   std::type_identity_t<std::optional<Var<Scalar>>> bias) {
  Graph<Scalar>& g = *x.graph;
  const Shape in = x.shape();
  if (in.h != 1 || in.w != 1) throw DomainError("linear: input must be (n,1,1,c)");
  const RowMatrix<Scalar>& w = weight.value().data;
  if (w.rows() != in.c) throw DomainError("linear: weight rows != input features");
  Tensor<Scalar> out(Shape{in.n, 1, 1, w.cols()});
  out.data.noalias() = x.value().data * w;
  if (bias) out.data.rowwise() += bias->value().data.row(0);
  const bool needs = x.requires_grad() || weight.requires_grad() ||
                     (bias && bias->requires_grad());
  return g.op(std::move(out), needs, [&g, x, weight, bias](const Tensor<Scalar>& dy) {
    if (weight.requires_grad()) {
      g.grad(weight.id).data.noalias() += x.value().data.transpose() * dy.data;
    }
    if (bias && bias->requires_grad()) g.grad(bias->id).data.row(0) += dy.data.colwise().sum();
    if (x.requires_grad()) g.grad(x.id).data.noalias() += dy.data * weight.value().data.transpose();
  });
}

/// Per-sample, per-channel normalization with biased variance:
/// (x - mean) / sqrt(var + eps).
template <typename Scalar>
Var<Scalar> instance_norm(Var<Scalar> x, Scalar eps = Scalar(1e-5)) {
  Graph<Scalar>& g = *x.graph;
  const Shape s = x.shape();
  const Index hw = s.h * s.w;
  Tensor<Scalar> out(s);
  RowMatrix<Scalar> inv_std(s.n, s.c);
  for (Index i = 0; i < s.n; ++i) {
    auto block = x.value().sample_rows(i);
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean = block.colwise().mean();
    auto centered = out.sample_rows(i);
    centered = block.rowwise() - mean;
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> var =
        centered.array().square().colwise().sum() / Scalar(hw);
    inv_std.row(i) = (var + eps).rsqrt().matrix();
    centered.array().rowwise() *= inv_std.row(i).array();
  }
  const bool needs = x.requires_grad();
  Var<Scalar> result = g.op(std::move(out), needs, {});
  if (needs) {
    // The closure reads the normalized output back from the tape.
    const std::size_t self = result.id;
    g.op_backward(self, [&g, x, self, inv_std = std::move(inv_std), hw](const Tensor<Scalar>& dy) {
      const Tensor<Scalar>& xhat = g.value(self);
      Tensor<Scalar>& dx = g.grad(x.id);
      for (Index i = 0; i < xhat.shape.n; ++i) {
        auto d = dy.sample_rows(i).array();
        auto xh = xhat.sample_rows(i).array();
        const Eigen::Array<Scalar, 1, Eigen::Dynamic> m1 = d.colwise().sum() / Scalar(hw);
        const Eigen::Array<Scalar, 1, Eigen::Dynamic> m2 = (d * xh).colwise().sum() / Scalar(hw);
        dx.sample_rows(i).array() +=
            ((d.rowwise() - m1) - xh.rowwise() * m2).rowwise() * inv_std.row(i).array();
      }
    });
  }
  return result;
}

/// out[n,:,:,c] = gamma[n,c] * x[n,:,:,c] + beta[n,c], with gamma and beta of
/// shape (n, 1, 1, c).
template <typename Scalar>
Var<Scalar> channel_affine(Var<Scalar> x, Var<Scalar> gamma, Var<Scalar> beta) {
  Graph<Scalar>& g = *x.graph;
  const Shape s = x.shape();
  const Shape ps{s.n, 1, 1, s.c};
  require_same_shape(gamma.shape(), ps, "channel_affine gamma");
  require_same_shape(beta.shape(), ps, "channel_affine beta");
  Tensor<Scalar> out(s);
  for (Index i = 0; i < s.n; ++i) {
    out.sample_rows(i).array() =
        (x.value().sample_rows(i).array().rowwise() * gamma.value().data.row(i).array())
            .rowwise() +
        beta.value().data.row(i).array();
  }
  const bool needs = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  return g.op(std::move(out), needs, [&g, x, gamma, beta](const Tensor<Scalar>& dy) {
    const Index n = dy.shape.n;
    for (Index i = 0; i < n; ++i) {
      auto d = dy.sample_rows(i).array();
      if (gamma.requires_grad()) {
        g.grad(gamma.id).data.row(i).array() +=
            (d * x.value().sample_rows(i).array()).colwise().sum();
      }
      if (beta.requires_grad()) g.grad(beta.id).data.row(i).array() += d.colwise().sum();
      if (x.requires_grad()) {
        g.grad(x.id).sample_rows(i).array() += d.rowwise() * gamma.value().data.row(i).array();
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> x) {
  Graph<Scalar>& g = *x.graph;
  Tensor<Scalar> out(x.shape(), x.value().data.cwiseMax(Scalar(0)));
  return g.op(std::move(out), x.requires_grad(), [&g, x](const Tensor<Scalar>& dy) {
    g.grad(x.id).data.array() +=
        (x.value().data.array() > Scalar(0)).select(dy.data.array(), Scalar(0));
  });
}

template <typename Scalar>
Var<Scalar> leaky_relu(Var<Scalar> x, Scalar slope) {
  Graph<Scalar>& g = *x.graph;
  const auto& xv = x.value().data.array();
  Tensor<Scalar> out(x.shape(), (xv > Scalar(0)).select(xv, xv * slope).matrix());
  return g.op(std::move(out), x.requires_grad(), [&g, x, slope](const Tensor<Scalar>& dy) {
    g.grad(x.id).data.array() +=
        (x.value().data.array() > Scalar(0)).select(dy.data.array(), dy.data.array() * slope);
  });
}

/// Logistic function with outputs kept inside the open interval (0, 1).
template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> x) {
  Graph<Scalar>& g = *x.graph;
  constexpr Scalar lo = std::numeric_limits<Scalar>::min();
  const Scalar hi = std::nextafter(Scalar(1), Scalar(0));
  Tensor<Scalar> out(x.shape());
  out.data = x.value().data.unaryExpr([lo, hi](Scalar v) {
    const Scalar y = v >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-v))
                                    : std::exp(v) / (Scalar(1) + std::exp(v));
    return std::clamp(y, lo, hi);
  });
  Var<Scalar> result = g.op(std::move(out), x.requires_grad(), {});
  if (x.requires_grad()) {
    const std::size_t self = result.id;
    g.op_backward(self, [&g, x, self](const Tensor<Scalar>& dy) {
      const auto y = g.value(self).data.array();
      g.grad(x.id).data.array() += dy.data.array() * y * (Scalar(1) - y);
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> x) {
  Graph<Scalar>& g = *x.graph;
  Tensor<Scalar> out(x.shape(), x.value().data.array().tanh().matrix());
  Var<Scalar> result = g.op(std::move(out), x.requires_grad(), {});
  if (x.requires_grad()) {
    const std::size_t self = result.id;
    g.op_backward(self, [&g, x, self](const Tensor<Scalar>& dy) {
      const auto y = g.value(self).data.array();
      g.grad(x.id).data.array() += dy.data.array() * (Scalar(1) - y.square());
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_graph(a, b);
  require_same_shape(a.shape(), b.shape(), "add");
  Graph<Scalar>& g = *a.graph;
  Tensor<Scalar> out(a.shape(), a.value().data + b.value().data);
  return g.op(std::move(out), a.requires_grad() || b.requires_grad(),
              [&g, a, b](const Tensor<Scalar>& dy) {
                detail::accumulate(g, a, dy.data);
                detail::accumulate(g, b, dy.data);
              });
}

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_graph(a, b);
  require_same_shape(a.shape(), b.shape(), "sub");
  Graph<Scalar>& g = *a.graph;
  Tensor<Scalar> out(a.shape(), a.value().data - b.value().data);
  return g.op(std::move(out), a.requires_grad() || b.requires_grad(),
              [&g, a, b](const Tensor<Scalar>& dy) {
                detail::accumulate(g, a, dy.data);
                if (b.requires_grad()) g.grad(b.id).data -= dy.data;
              });
}

/// Elementwise product.
template <typename Scalar>
Var<Scalar> operator*(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_graph(a, b);
  require_same_shape(a.shape(), b.shape(), "mul");
  Graph<Scalar>& g = *a.graph;
  Tensor<Scalar> out(a.shape(), a.value().data.cwiseProduct(b.value().data));
  return g.op(std::move(out), a.requires_grad() || b.requires_grad(),
              [&g, a, b](const Tensor<Scalar>& dy) {
                if (a.requires_grad()) g.grad(a.id).data += dy.data.cwiseProduct(b.value().data);
                if (b.requires_grad()) g.grad(b.id).data += dy.data.cwiseProduct(a.value().data);
              });
}

template <typename Scalar>
Var<Scalar> operator*(Var<Scalar> a, Scalar k) {
  Graph<Scalar>& g = *a.graph;
  Tensor<Scalar> out(a.shape(), a.value().data * k);
  return g.op(std::move(out), a.requires_grad(),
              [&g, a, k](const Tensor<Scalar>& dy) { g.grad(a.id).data += dy.data * k; });
}

template <typename Scalar>
Var<Scalar> operator*(Scalar k, Var<Scalar> a) {
  return a * k;
}

/// h = (1 - a) * e + a * f, elementwise.
template <typename Scalar>
Var<Scalar> blend(Var<Scalar> e, Var<Scalar> a, Var<Scalar> f) {
  detail::check_same_graph(e, a);
  detail::check_same_graph(e, f);
  require_same_shape(e.shape(), a.shape(), "blend attention");
  require_same_shape(e.shape(), f.shape(), "blend edited features");
  Graph<Scalar>& g = *e.graph;
  const auto av = a.value().data.array();
  Tensor<Scalar> out(e.shape(),
                     ((Scalar(1) - av) * e.value().data.array() + av * f.value().data.array())
                         .matrix());
  const bool needs = e.requires_grad() || a.requires_grad() || f.requires_grad();
  return g.op(std::move(out), needs, [&g, e, a, f](const Tensor<Scalar>& dy) {
    const auto av = a.value().data.array();
    const auto d = dy.data.array();
    if (e.requires_grad()) g.grad(e.id).data.array() += (Scalar(1) - av) * d;
    if (f.requires_grad()) g.grad(f.id).data.array() += av * d;
    if (a.requires_grad()) {
      g.grad(a.id).data.array() += (f.value().data.array() - e.value().data.array()) * d;
    }
  });
}

/// Channel concatenation of two maps with equal (n, h, w).
template <typename Scalar>
Var<Scalar> concat_channels(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_graph(a, b);
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw DomainError("concat_channels: spatial mismatch " + to_string(sa) + " vs " +
                      to_string(sb));
  }
  Graph<Scalar>& g = *a.graph;
  Tensor<Scalar> out(Shape{sa.n, sa.h, sa.w, sa.c + sb.c});
  out.data.leftCols(sa.c) = a.value().data;
  out.data.rightCols(sb.c) = b.value().data;
  return g.op(std::move(out), a.requires_grad() || b.requires_grad(),
              [&g, a, b, ca = sa.c, cb = sb.c](const Tensor<Scalar>& dy) {
                detail::accumulate<Scalar>(g, a, dy.data.leftCols(ca));
                detail::accumulate<Scalar>(g, b, dy.data.rightCols(cb));
              });
}

template <typename Scalar>
Var<Scalar> slice_channels(Var<Scalar> x, Index offset, Index count) {
  const Shape s = x.shape();
  if (offset < 0 || count < 0 || offset + count > s.c) {
    throw DomainError("slice_channels: range outside channel extent");
  }
  Graph<Scalar>& g = *x.graph;
  Tensor<Scalar> out(Shape{s.n, s.h, s.w, count}, x.value().data.middleCols(offset, count));
  return g.op(std::move(out), x.requires_grad(),
              [&g, x, offset, count](const Tensor<Scalar>& dy) {
                g.grad(x.id).data.middleCols(offset, count) += dy.data;
              });
}

/// (n, h, w, c) -> (n, 1, 1, h*w*c), preserving NHWC element order.
template <typename Scalar>
Var<Scalar> flatten(Var<Scalar> x) {
  const Shape s = x.shape();
  Graph<Scalar>& g = *x.graph;
  Tensor<Scalar> out(Shape{s.n, 1, 1, s.h * s.w * s.c});
  out.flat() = x.value().flat();
  return g.op(std::move(out), x.requires_grad(), [&g, x](const Tensor<Scalar>& dy) {
    g.grad(x.id).flat() += dy.flat();
  });
}

/// Spatial average: (n, h, w, c) -> (n, 1, 1, c).
template <typename Scalar>
Var<Scalar> mean_spatial(Var<Scalar> x) {
  const Shape s = x.shape();
  Graph<Scalar>& g = *x.graph;
  const Index hw = s.h * s.w;
  Tensor<Scalar> out(Shape{s.n, 1, 1, s.c});
  for (Index i = 0; i < s.n; ++i) out.data.row(i) = x.value().sample_rows(i).colwise().mean();
  return g.op(std::move(out), x.requires_grad(), [&g, x, hw](const Tensor<Scalar>& dy) {
    Tensor<Scalar>& dx = g.grad(x.id);
    for (Index i = 0; i < dy.shape.n; ++i) {
      dx.sample_rows(i).rowwise() += dy.data.row(i) / Scalar(hw);
    }
  });
}

/// Mean over every element, producing a (1, 1, 1, 1) scalar.
template <typename Scalar>
Var<Scalar> mean_all(Var<Scalar> x) {
  Graph<Scalar>& g = *x.graph;
  const Index count = x.value().size();
  Tensor<Scalar> out = Tensor<Scalar>::constant(Shape{1, 1, 1, 1}, x.value().data.mean());
  return g.op(std::move(out), x.requires_grad(), [&g, x, count](const Tensor<Scalar>& dy) {
    g.grad(x.id).data.array() += dy.data(0, 0) / Scalar(count);
  });
}

template <typename Scalar>
Scalar scalar_value(const Var<Scalar>& v) {
  if (v.value().size() != 1) throw DomainError("scalar_value: not a scalar");
  return v.value().data(0, 0);
}

}  // namespace sdit

#endif  // SDIT_OPS_HPP
