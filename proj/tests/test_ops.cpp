#include <doctest.h>

#include <functional>
#include <random>
#include <vector>

#include "sdit/ops.hpp"
#include "support/finite_difference.hpp"

using namespace sdit;
using sdit::testing::numeric_gradient;
using sdit::testing::random_tensor;
using sdit::testing::relative_error;

namespace {

using Build = std::function<Var<double>(std::vector<Var<double>>&)>;

// Projects the op output onto a fixed random direction and compares tape
// gradients with central differences for every input.
void check_op_gradients(std::vector<Tensor<double>> inputs, const Build& build,
                        double tol = 1e-6) {
  std::mt19937_64 rng(99);
  Tensor<double> direction;
  auto loss = [&](bool with_grad, std::vector<Tensor<double>>* grads) {
    Graph<double> g;
    std::vector<Var<double>> vars;
    for (auto& t : inputs) vars.push_back(g.input(t, with_grad));
    Var<double> out = build(vars);
    if (direction.empty()) direction = random_tensor(out.shape(), rng);
    Var<double> l = mean_all(out * g.constant(direction));
    if (with_grad) {
      g.backward(l);
      for (auto& v : vars) grads->push_back(g.grad(v.id));
    }
    return scalar_value(l);
  };
  std::vector<Tensor<double>> analytic;
  loss(true, &analytic);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor<double> numeric = numeric_gradient(inputs[i], [&] { return loss(false, nullptr); });
    CHECK(relative_error(analytic[i], numeric) < tol);
  }
}

}  // namespace

TEST_CASE("im2col and col2im are adjoint") {
  std::mt19937_64 rng(3);
  Tensor<double> x = random_tensor(Shape{2, 5, 6, 3}, rng);
  const ConvGeometry geom{4, 2, 1};
  const Index oh = conv_output_extent(5, geom), ow = conv_output_extent(6, geom);
  RowMatrix<double> cols = im2col(x, geom, oh, ow);
  RowMatrix<double> r = random_tensor(Shape{1, 1, cols.rows(), cols.cols()}, rng).data;
  Tensor<double> back(x.shape);
  col2im_add(r, geom, oh, ow, back);
  // <im2col(x), r> == <x, col2im(r)>
  CHECK(cols.cwiseProduct(r).sum() == doctest::Approx(x.data.cwiseProduct(back.data).sum()));
}

TEST_CASE("conv2d matches a direct convolution") {
  std::mt19937_64 rng(4);
  Tensor<double> x = random_tensor(Shape{1, 4, 4, 2}, rng);
  const ConvGeometry geom{3, 1, 1};
  Tensor<double> w = random_tensor(Shape{1, 1, 9 * 2, 3}, rng);
  Graph<double> g;
  Var<double> y = conv2d(g.constant(x), g.constant(w), std::nullopt, geom);
  REQUIRE(y.shape() == Shape{1, 4, 4, 3});
  // Direct sum at an interior and a border pixel.
  for (auto [oy, ox] : {std::pair<Index, Index>{1, 2}, {0, 0}}) {
    for (Index co = 0; co < 3; ++co) {
      double ref = 0;
      for (Index ky = 0; ky < 3; ++ky) {
        for (Index kx = 0; kx < 3; ++kx) {
          const Index iy = oy - 1 + ky, ix = ox - 1 + kx;
          if (iy < 0 || iy >= 4 || ix < 0 || ix >= 4) continue;
          for (Index ci = 0; ci < 2; ++ci) ref += x.at(0, iy, ix, ci) * w.data((ky * 3 + kx) * 2 + ci, co);
        }
      }
      CHECK(y.value().at(0, oy, ox, co) == doctest::Approx(ref));
    }
  }
}

TEST_CASE("transposed convolution doubles resolution") {
  Graph<double> g;
  Tensor<double> x(Shape{2, 4, 4, 3});
  Tensor<double> w(Shape{1, 1, 3, 16 * 5});
  Var<double> y = conv_transpose2d(g.constant(x), g.constant(w), std::nullopt, ConvGeometry{4, 2, 1});
  CHECK(y.shape() == Shape{2, 8, 8, 5});
}

TEST_CASE("operation gradients match central differences") {
  std::mt19937_64 rng(5);
  const Shape s{2, 3, 4, 3};

  SUBCASE("conv2d") {
    check_op_gradients({random_tensor(s, rng), random_tensor(Shape{1, 1, 16 * 3, 2}, rng),
                        random_tensor(Shape{1, 1, 1, 2}, rng)},
                       [](auto& v) { return conv2d(v[0], v[1], v[2], ConvGeometry{4, 2, 1}); });
  }
  SUBCASE("conv_transpose2d") {
    check_op_gradients(
        {random_tensor(s, rng), random_tensor(Shape{1, 1, 3, 16 * 2}, rng),
         random_tensor(Shape{1, 1, 1, 2}, rng)},
        [](auto& v) { return conv_transpose2d(v[0], v[1], v[2], ConvGeometry{4, 2, 1}); });
  }
  SUBCASE("linear") {
    check_op_gradients({random_tensor(Shape{3, 1, 1, 4}, rng), random_tensor(Shape{1, 1, 4, 2}, rng),
                        random_tensor(Shape{1, 1, 1, 2}, rng)},
                       [](auto& v) { return linear(v[0], v[1], v[2]); });
  }
  SUBCASE("instance_norm") {
    check_op_gradients({random_tensor(s, rng)}, [](auto& v) { return instance_norm(v[0]); });
  }
  SUBCASE("channel_affine") {
    check_op_gradients({random_tensor(s, rng), random_tensor(Shape{2, 1, 1, 3}, rng),
                        random_tensor(Shape{2, 1, 1, 3}, rng)},
                       [](auto& v) { return channel_affine(v[0], v[1], v[2]); });
  }
  SUBCASE("pointwise nonlinearities") {
    check_op_gradients({random_tensor(s, rng)}, [](auto& v) { return relu(v[0]); });
    check_op_gradients({random_tensor(s, rng)}, [](auto& v) { return leaky_relu(v[0], 0.01); });
    check_op_gradients({random_tensor(s, rng)}, [](auto& v) { return sigmoid(v[0]); });
    check_op_gradients({random_tensor(s, rng)}, [](auto& v) { return sdit::tanh(v[0]); });
  }
  SUBCASE("arithmetic and blend") {
    check_op_gradients({random_tensor(s, rng), random_tensor(s, rng)},
                       [](auto& v) { return v[0] * v[1] + v[0] - v[1] * 3.0; });
    check_op_gradients({random_tensor(s, rng), random_tensor(s, rng), random_tensor(s, rng)},
                       [](auto& v) { return blend(v[0], v[1], v[2]); });
  }
  SUBCASE("shape ops") {
    check_op_gradients({random_tensor(s, rng), random_tensor(Shape{2, 3, 4, 2}, rng)},
                       [](auto& v) { return slice_channels(concat_channels(v[0], v[1]), 1, 3); });
    check_op_gradients({random_tensor(s, rng)}, [](auto& v) { return flatten(v[0]); });
    check_op_gradients({random_tensor(s, rng)}, [](auto& v) { return mean_spatial(v[0]); });
  }
}

TEST_CASE("gradients are skipped for operands that do not require them") {
  Graph<double> g;
  Var<double> a = g.constant(Tensor<double>::constant(Shape{1, 2, 2, 1}, 2.0));
  Var<double> b = g.input(Tensor<double>::constant(Shape{1, 2, 2, 1}, 3.0), true);
  Var<double> l = mean_all(a * b);
  g.backward(l);
  CHECK_FALSE(g.has_grad(a.id));
  CHECK(g.grad(b.id).data.sum() == doctest::Approx(2.0));
}

TEST_CASE("shape mismatches are domain errors") {
  Graph<double> g;
  Var<double> a = g.constant(Tensor<double>(Shape{1, 2, 2, 1}));
  Var<double> b = g.constant(Tensor<double>(Shape{1, 2, 3, 1}));
  CHECK_THROWS_AS(a + b, DomainError);
  CHECK_THROWS_AS(blend(a, a, b), DomainError);
}

TEST_CASE("sigmoid stays strictly inside (0, 1) in single precision") {
  Graph<float> g;
  Tensor<float> x(Shape{1, 1, 1, 4});
  x.data << -200.f, -30.f, 30.f, 200.f;
  Var<float> y = sigmoid(g.constant(x));
  CHECK((y.value().data.array() > 0.f).all());
  CHECK((y.value().data.array() < 1.f).all());
}
