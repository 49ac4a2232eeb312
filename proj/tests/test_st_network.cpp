#include "wgcn/errors.hpp"
#include "wgcn/selftest.hpp"
#include "wgcn/st_network.hpp"

#include <doctest.h>

#include <set>

using namespace wgcn;

namespace {

ModelConfig danish_config() { return ModelConfig{}; }

ModelConfig dutch_config() {
  ModelConfig c;
  c.input_channels = 6;
  c.vertices = 7;
  c.outputs = 7;
  return c;
}

}  // namespace

TEST_SUITE("st-network") {
  TEST_CASE("temporal conv") {
    SUBCASE("centered delta kernel is the identity") {
      Rng rng(1);
      const Tensor x = random_normal({2, 3, 6, 4}, rng);
      Tensor w(Shape{3, 3, 3, 1});
      for (Index c = 0; c < 3; ++c) w.at({c, c, 1, 0}) = 1.0;
      CHECK(temporal_conv(constant(x), constant(w), constant(Tensor(Shape{3}))).value() == x);
    }
    SUBCASE("[1,2,3] with kernel [1,1,1]") {
      const Tensor x(Shape{1, 1, 3, 1}, {1.0, 2.0, 3.0});
      const Tensor y = temporal_conv(constant(x), constant(Tensor(Shape{1, 1, 3, 1}, 1.0)), constant(Tensor(Shape{1})))
                           .value();
      CHECK(y == Tensor(Shape{1, 1, 3, 1}, {3.0, 6.0, 5.0}));
    }
    SUBCASE("no coupling across vertices") {
      Rng rng(2);
      const Tensor x = random_normal({1, 2, 5, 4}, rng);
      const Tensor w = random_normal({2, 2, 3, 1}, rng);
      const Tensor b = random_normal({2}, rng);
      const Tensor y0 = temporal_conv(constant(x), constant(w), constant(b)).value();
      Tensor xp = x;
      xp.at({0, 1, 2, 1}) += 0.5;
      const Tensor y1 = temporal_conv(constant(xp), constant(w), constant(b)).value();
      for (Index c = 0; c < 2; ++c)
        for (Index t = 0; t < 5; ++t)
          for (Index u = 0; u < 4; ++u)
            if (u != 1) CHECK(y1.at({0, c, t, u}) == y0.at({0, c, t, u}));
    }
  }

  TEST_CASE("st block") {
    Rng rng(3);
    SUBCASE("shape and residual projection") {
      auto b = STBlockParams::init("b", 4, 16, 5, 3, false, rng);
      CHECK(b.residual.has_value());
      const Tensor x = random_normal({2, 4, 30, 5}, rng);
      CHECK(st_block_forward(constant(x), b, Mode::train).shape() == Shape{2, 16, 30, 5});
      auto same = STBlockParams::init("c", 16, 16, 5, 3, false, rng);
      CHECK_FALSE(same.residual.has_value());
    }
    SUBCASE("zero main branch leaves relu(x)") {
      auto b = STBlockParams::init("b", 3, 3, 4, 3, false, rng);
      b.spatial.weight.value() = Tensor(b.spatial.weight.shape());
      b.temporal.weight.value() = Tensor(b.temporal.weight.shape());
      const Tensor x = random_normal({2, 3, 5, 4}, rng);
      Tensor want = x;
      for (Index i = 0; i < want.size(); ++i) want[i] = std::max(0.0, want[i]);
      const Tensor got = st_block_forward(constant(x), b, Mode::train).value();
      CHECK((got.data() - want.data()).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("gradient with respect to the adjacency") {
      auto b = STBlockParams::init("b", 2, 3, 3, 3, false, rng);
      const Tensor x = random_normal({2, 2, 4, 3}, rng);
      const auto r = check_gradients(
          [&] { return reduce_sum(st_block_forward(constant(x), b, Mode::train)); }, {&b.adjacency.weights}, 1e-5);
      CHECK(r.max_relative_error < 1e-3);
    }
  }

  TEST_CASE("model shapes") {
    Rng rng(4);
    SUBCASE("danish") {
      auto m = ModelParams::initialize(danish_config(), 1);
      CHECK(m.config.flatten_width() == 600);
      CHECK(m.fc_weight.shape() == Shape{600, 3});
      CHECK(model_forward(constant(random_normal({64, 4, 30, 5}, rng)), m, Mode::train).shape() == Shape{64, 3});
    }
    SUBCASE("dutch") {
      auto m = ModelParams::initialize(dutch_config(), 1);
      CHECK(m.config.flatten_width() == 840);
      CHECK(model_forward(constant(random_normal({64, 6, 30, 7}, rng)), m, Mode::train).shape() == Shape{64, 7});
    }
    SUBCASE("wrong input shape") {
      auto m = ModelParams::initialize(danish_config(), 1);
      CHECK_THROWS_AS(model_forward(constant(Tensor(Shape{2, 4, 30, 7})), m, Mode::train), ConfigError);
    }
  }

  TEST_CASE("channel progression and parameter names") {
    auto m = ModelParams::initialize(danish_config(), 2);
    REQUIRE(m.blocks.size() == 3);
    CHECK(m.blocks[0].in_channels == 4);
    CHECK(m.blocks[0].out_channels == 16);
    CHECK(m.blocks[1].out_channels == 32);
    CHECK(m.blocks[2].out_channels == 64);
    CHECK(m.reduce.weight.shape() == Shape{4, 64, 1, 1});
    CHECK(m.blocks[0].temporal.weight.shape() == Shape{16, 16, 3, 1});
    std::set<std::string> names;
    for (const Parameter* p : m.parameters()) names.insert(p->name());
    CHECK(names.size() == m.parameters().size());
    CHECK(names.count("block2.adjacency") == 1);
    CHECK(names.count("fc.weight") == 1);
    CHECK(m.running_stats().size() == 6);
  }

  TEST_CASE("gamma variant at gamma = 1 is bitwise the base model") {
    ModelConfig g = danish_config();
    g.gamma_variant = true;
    auto base = ModelParams::initialize(danish_config(), 5);
    auto with_gamma = ModelParams::initialize(g, 5);
    CHECK(with_gamma.parameters().size() == base.parameters().size() + 3);
    Rng rng(6);
    const Tensor x = random_normal({8, 4, 30, 5}, rng);
    CHECK(model_forward(constant(x), base, Mode::train).value() ==
          model_forward(constant(x), with_gamma, Mode::train).value());
    CHECK(predict(base, x) == predict(with_gamma, x));
  }

  TEST_CASE("eval forward leaves the model untouched") {
    auto m = ModelParams::initialize(danish_config(), 7);
    Rng rng(8);
    const Tensor x = random_normal({4, 4, 30, 5}, rng);
    CHECK_THROWS_AS(predict(m, x), StateError);
    model_forward(constant(x), m, Mode::train);
    const auto before = *m.running_stats()[0].second;
    const Tensor a = predict(m, x);
    const Tensor b = predict(m, x);
    CHECK(a == b);
    CHECK(m.running_stats()[0].second->mean == before.mean);
  }

  TEST_CASE("initialization is seeded") {
    auto a = ModelParams::initialize(danish_config(), 9);
    auto b = ModelParams::initialize(danish_config(), 9);
    auto c = ModelParams::initialize(danish_config(), 10);
    CHECK(a.blocks[0].adjacency.weights.value() == b.blocks[0].adjacency.weights.value());
    CHECK_FALSE(a.blocks[0].adjacency.weights.value() == c.blocks[0].adjacency.weights.value());
    const Tensor& adj = a.blocks[1].adjacency.weights.value();
    CHECK(adj.data().minCoeff() >= 0.0);
    CHECK(adj.data().maxCoeff() < 1.0);
  }
}
