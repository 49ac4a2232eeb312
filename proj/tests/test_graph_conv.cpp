#include "wgcn/errors.hpp"
#include "wgcn/graph_conv.hpp"
#include "wgcn/selftest.hpp"

#include <doctest.h>

#include <cmath>

using namespace wgcn;

namespace {

Tensor mat(Index r, Index c, std::initializer_list<Scalar> v) { return Tensor(Shape{r, c}, v); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  return (a.data() - b.data()).cwiseAbs().maxCoeff();
}

Tensor transform_of(const Tensor& a, std::optional<Scalar> gamma = std::nullopt) {
  return transformed_matrix(LearnableAdjacency::from_matrix(a, gamma, "t"));
}

}  // namespace

TEST_SUITE("graph-conv") {
  TEST_CASE("self loop") {
    CHECK(add_self_loop(constant(Tensor(Shape{3, 3}))).value() == Tensor::identity(3));
    CHECK(add_self_loop(constant(Tensor(Shape{2, 2})), constant(Tensor::scalar(0.5))).value() ==
          mat(2, 2, {0.5, 0, 0, 0.5}));
    CHECK(add_self_loop(constant(Tensor(Shape{2, 2}, 1.0))).value() == mat(2, 2, {2, 1, 1, 2}));
    CHECK_THROWS_AS(add_self_loop(constant(Tensor(Shape{2, 3}))), DimensionError);
  }

  TEST_CASE("min-max scaling") {
    CHECK(minmax_scale(constant(mat(2, 2, {2, 1, 1, 2}))).value() == mat(2, 2, {1, 0, 0, 1}));
    CHECK(minmax_scale(constant(Tensor::identity(3))).value() == Tensor::identity(3));
    CHECK(minmax_scale(constant(Tensor(Shape{3, 3}, 4.2))).value() == Tensor(Shape{3, 3}));
  }

  TEST_CASE("degree") {
    CHECK(degree(constant(Tensor::identity(3))).value() == Tensor(Shape{3}, 1.0));
    CHECK(degree(constant(mat(2, 2, {1, 1, 0, 1}))).value() == Tensor(Shape{2}, {2.0, 1.0}));
    CHECK(degree(constant(mat(2, 2, {0, 0, 0.5, 1}))).value() == Tensor(Shape{2}, {0.0, 1.5}));
  }

  TEST_CASE("symmetric normalization") {
    const Var id = constant(Tensor::identity(3));
    CHECK(sym_normalize(id, degree(id)).value() == Tensor::identity(3));

    const Var a = constant(mat(2, 2, {1, 1, 0, 1}));
    const Tensor s = sym_normalize(a, constant(Tensor(Shape{2}, {2.0, 1.0}))).value();
    CHECK(max_abs_diff(s, mat(2, 2, {0.5, 1.0 / std::sqrt(2.0), 0, 1})) < 1e-15);

    const Var z = constant(mat(2, 2, {0, 0, 0.5, 1}));
    const Tensor sz = sym_normalize(z, degree(z)).value();
    CHECK(sz.at({0, 0}) == 0.0);
    CHECK(sz.at({0, 1}) == 0.0);
    CHECK(sz.all_finite());
  }

  TEST_CASE("transform pipeline") {
    CHECK(transform_of(Tensor(Shape{3, 3})) == Tensor::identity(3));
    CHECK(max_abs_diff(transform_of(Tensor(Shape{2, 2}, 1.0)), Tensor::identity(2)) < 1e-15);
    CHECK(max_abs_diff(transform_of(mat(2, 2, {0, 1, 0, 0})), mat(2, 2, {0.5, 0.70710678118654752, 0, 1})) < 1e-9);
    CHECK(transform_of(Tensor(Shape{3, 3}), 1.0) == Tensor::identity(3));
  }

  TEST_CASE("transformed entries are nonnegative and finite") {
    Rng rng(21);
    for (int k = 0; k < 50; ++k) {
      const Tensor a = random_normal({5, 5}, rng);
      const Tensor m = transform_of(a, k % 2 ? std::optional<Scalar>(rng.uniform(-2.0, 2.0)) : std::nullopt);
      CHECK(m.all_finite());
      CHECK(m.data().minCoeff() >= 0.0);
    }
  }

  TEST_CASE("transform is not symmetric in general") {
    const Tensor m = transform_of(mat(3, 3, {0, 1, 0, 0, 0, 0, 0.5, 0, 0}));
    CHECK(m.at({0, 1}) != m.at({1, 0}));
  }

  TEST_CASE("propagation matches a nested-loop oracle") {
    Rng rng(3);
    const Tensor x = random_normal({2, 3, 4, 3}, rng);
    const Tensor m = random_uniform({3, 3}, rng);
    const Tensor got = propagate_vertices(constant(x), constant(m)).value();
    Tensor want(x.shape());
    for (Index n = 0; n < 2; ++n)
      for (Index c = 0; c < 3; ++c)
        for (Index t = 0; t < 4; ++t)
          for (Index u = 0; u < 3; ++u) {
            Scalar s = 0;
            for (Index v = 0; v < 3; ++v) s += x.at({n, c, t, v}) * m.at({v, u});
            want.at({n, c, t, u}) = s;
          }
    CHECK(max_abs_diff(got, want) < 1e-12);
  }

  TEST_CASE("spatial graph conv") {
    Rng rng(4);
    const Tensor x = random_normal({2, 3, 4, 3}, rng);
    const Var ident = constant(Tensor::identity(3).reshaped({3, 3, 1, 1}));
    const Var zero_bias = constant(Tensor(Shape{3}));

    SUBCASE("double identity") {
      const auto adj = LearnableAdjacency::from_matrix(Tensor(Shape{3, 3}), std::nullopt, "a");
      CHECK(spatial_graph_conv(constant(x), adj, ident, zero_bias).value() == x);
    }

    SUBCASE("equals propagation through the transformed matrix then 1x1 conv") {
      const auto adj = LearnableAdjacency::from_matrix(random_uniform({3, 3}, rng), std::nullopt, "a");
      const Tensor m = transformed_matrix(adj);
      const Tensor w = random_normal({2, 3, 1, 1}, rng);
      const Tensor b = random_normal({2}, rng);
      const Tensor got = spatial_graph_conv(constant(x), adj, constant(w), constant(b)).value();
      for (Index n = 0; n < 2; ++n)
        for (Index o = 0; o < 2; ++o)
          for (Index t = 0; t < 4; ++t)
            for (Index u = 0; u < 3; ++u) {
              Scalar s = b[o];
              for (Index c = 0; c < 3; ++c)
                for (Index v = 0; v < 3; ++v) s += w[o * 3 + c] * x.at({n, c, t, v}) * m.at({v, u});
              CHECK(got.at({n, o, t, u}) == doctest::Approx(s).epsilon(1e-12));
            }
    }

    SUBCASE("sensitivity probe on the two-vertex example") {
      const auto adj = LearnableAdjacency::from_matrix(mat(2, 2, {0, 1, 0, 0}), std::nullopt, "a");
      const Tensor m = transformed_matrix(adj);
      const Tensor x2(Shape{1, 1, 1, 2}, {0.3, -0.7});
      const Var w = constant(Tensor(Shape{1, 1, 1, 1}, 1.0));
      const Var b = constant(Tensor(Shape{1}));
      const Tensor y0 = spatial_graph_conv(constant(x2), adj, w, b).value();
      for (Index v = 0; v < 2; ++v) {
        Tensor xp = x2;
        xp[v] += 1e-3;
        const Tensor y1 = spatial_graph_conv(constant(xp), adj, w, b).value();
        for (Index u = 0; u < 2; ++u) {
          const double sens = (y1[u] - y0[u]) / 1e-3;
          CHECK((std::abs(sens) > 1e-9) == (m.at({v, u}) != 0.0));
          CHECK(sens == doctest::Approx(m.at({v, u})).epsilon(1e-9));
        }
      }
    }
  }

  TEST_CASE("gradient of the transform reaches A and gamma") {
    Rng rng(9);
    auto adj = LearnableAdjacency::from_matrix(random_uniform({4, 4}, rng), 0.8, "a");
    const auto r = check_gradients(
        [&] { return random_projection(transform_adjacency(adj).matrix, 5); }, {&adj.weights, &*adj.gamma}, 1e-5);
    CHECK(r.max_relative_error < 1e-4);
  }

  TEST_CASE("a wrong degree threshold breaks the hand-derived transform") {
    TransformOptions bad;
    bad.degree_epsilon = 1.5;
    const Tensor m =
        transformed_matrix(LearnableAdjacency::from_matrix(mat(2, 2, {0, 1, 0, 0}), std::nullopt, "a"), bad);
    CHECK(max_abs_diff(m, mat(2, 2, {0.5, 0.70710678118654752, 0, 1})) > 1e-3);
  }
}
