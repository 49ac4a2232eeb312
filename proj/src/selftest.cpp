#include "wgcn/selftest.hpp"

#include "wgcn/data.hpp"
#include "wgcn/errors.hpp"
#include "wgcn/st_network.hpp"
#include "wgcn/trainer.hpp"

#include <cmath>
#include <sstream>

namespace wgcn {

GradCheckResult check_gradients(const std::function<Var()>& loss, const std::vector<Parameter*>& params, double step) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    auto scope = tape.activate();
    tape.backward(loss());
  }
  auto evaluate = [&] {
    NoRecordScope no_record;
    return loss().value().item();
  };

  GradCheckResult result;
  for (Parameter* p : params) {
    Tensor& value = p->value();
    Vector numeric(value.size());
    for (Index i = 0; i < value.size(); ++i) {
      const Scalar saved = value[i];
      value[i] = saved + step;
      const double up = evaluate();
      value[i] = saved - step;
      const double down = evaluate();
      value[i] = saved;
      numeric[i] = (up - down) / (2.0 * step);
    }
    const Vector analytic = p->grad().size() == value.size() ? p->grad().data() : Vector(Vector::Zero(value.size()));
    const double err = (analytic - numeric).norm() / std::max(1e-8, numeric.norm());
    if (result.worst_parameter.empty() || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_parameter = p->name();
    }
  }
  return result;
}

Var random_projection(const Var& x, std::uint64_t seed) {
  Rng rng(seed);
  return reduce_sum(mul(x, constant(random_uniform(x.shape(), rng, -1.0, 1.0))));
}

namespace {

struct Suite {
  std::vector<PropertyResult> results;

  void record(std::string name, bool ok, std::string detail) {
    results.push_back({std::move(name), ok, std::move(detail)});
  }

  template <typename F>
  void run(const std::string& name, F&& body) {
    try {
      std::string detail;
      const bool ok = body(detail);
      record(name, ok, detail);
    } catch (const std::exception& e) {
      record(name, false, std::string("exception: ") + e.what());
    }
  }
};

std::string fmt_err(double e) {
  std::ostringstream os;
  os.precision(3);
  os << "max rel err " << e;
  return os.str();
}

// Runs `make_case(seed)` at several seeds; each case returns a loss builder
// and the parameters to check.
struct GradCase {
  explicit GradCase(std::vector<Parameter> p = {}) : params(std::move(p)) {}

  std::vector<Parameter> params;
  std::function<Var(const std::vector<Parameter>&)> loss;
  std::vector<Parameter*> extra;  // parameters owned elsewhere
  std::shared_ptr<void> owner;
};

bool grad_check_points(const std::function<GradCase(std::uint64_t)>& make_case, int points, double step, double tol,
                       std::string& detail) {
  double worst = 0;
  std::string worst_name;
  for (int k = 0; k < points; ++k) {
    GradCase c = make_case(1000 + static_cast<std::uint64_t>(k));
    std::vector<Parameter*> ptrs;
    for (auto& p : c.params) ptrs.push_back(&p);
    ptrs.insert(ptrs.end(), c.extra.begin(), c.extra.end());
    const auto r = check_gradients([&] { return c.loss(c.params); }, ptrs, step);
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = r.worst_parameter;
    }
  }
  detail = fmt_err(worst) + " (" + worst_name + ")";
  return worst < tol;
}

Parameter rand_param(const std::string& name, Shape shape, Rng& rng) {
  return Parameter(name, random_uniform(std::move(shape), rng, -1.0, 1.0));
}

ModelConfig tiny_model_config(bool gamma) {
  ModelConfig c;
  c.input_channels = 2;
  c.window = 5;
  c.vertices = 3;
  c.outputs = 3;
  c.block_channels = {4, 6, 8};
  c.reduce_channels = 4;
  c.gamma_variant = gamma;
  return c;
}

}  // namespace

std::vector<PropertyResult> run_property_suite(const SelfTestOptions& opts) {
  Suite s;
  const int pts = opts.random_points;

  s.run("grad: matmul", [&](std::string& d) {
    return grad_check_points(
        [](std::uint64_t seed) {
          Rng rng(seed);
          GradCase c({rand_param("a", {3, 3}, rng), rand_param("b", {3, 3}, rng)});
          c.loss = [](const auto& p) { return reduce_sum(matmul(p[0].var(), p[1].var())); };
          return c;
        },
        pts, 1e-5, 1e-4, d);
  });

  s.run("grad: conv2d", [&](std::string& d) {
    return grad_check_points(
        [](std::uint64_t seed) {
          Rng rng(seed);
          GradCase c({rand_param("x", {1, 2, 4, 3}, rng), rand_param("w", {2, 2, 3, 1}, rng), rand_param("b", {2}, rng)});
          c.loss = [seed](const auto& p) {
            return random_projection(conv2d(p[0].var(), p[1].var(), p[2].var(), {1, 0}), seed);
          };
          return c;
        },
        pts, 1e-5, 1e-4, d);
  });

  s.run("grad: batchnorm2d (train)", [&](std::string& d) {
    return grad_check_points(
        [](std::uint64_t seed) {
          Rng rng(seed);
          GradCase c({rand_param("x", {2, 3, 4, 2}, rng), rand_param("scale", {3}, rng), rand_param("shift", {3}, rng)});
          c.loss = [seed](const auto& p) {
            RunningStats stats;
            return random_projection(batchnorm2d(p[0].var(), p[1].var(), p[2].var(), stats, Mode::train), seed);
          };
          return c;
        },
        pts, 1e-5, 1e-3, d);
  });

  s.run("grad: relu", [&](std::string& d) {
    return grad_check_points(
        [](std::uint64_t seed) {
          Rng rng(seed);
          Tensor x = random_uniform({4, 5}, rng, -1.0, 1.0);
          // keep every entry at least 1e-2 away from the kink
          for (Index i = 0; i < x.size(); ++i) x[i] += x[i] >= 0 ? 0.01 : -0.01;
          GradCase c({Parameter("x", x)});
          c.loss = [seed](const auto& p) { return random_projection(relu(p[0].var()), seed); };
          return c;
        },
        pts, 1e-5, 1e-4, d);
  });

  s.run("grad: reshape/permute", [&](std::string& d) {
    return grad_check_points(
        [](std::uint64_t seed) {
          Rng rng(seed);
          GradCase c({rand_param("x", {2, 3, 4}, rng)});
          c.loss = [seed](const auto& p) {
            return random_projection(reshape(permute(p[0].var(), {2, 0, 1}), {4, 6}), seed);
          };
          return c;
        },
        pts, 1e-5, 1e-4, d);
  });

  s.run("grad: elementwise arithmetic and reductions", [&](std::string& d) {
    return grad_check_points(
        [](std::uint64_t seed) {
          Rng rng(seed);
          Tensor y = random_uniform({3, 3}, rng, 0.5, 1.5);
          GradCase c({rand_param("x", {3, 3}, rng), Parameter("y", y), rand_param("s", {}, rng)});
          c.loss = [seed](const auto& p) {
            Var x = p[0].var(), y = p[1].var(), sc = p[2].var();
            Var a = add(mul(x, y), scale(div(x, y), 0.5));
            Var b = sub(div_scalar(sub_scalar(a, 0.3), 2.0), mul(a, sc));
            Var ext = add(reduce_max(b), reduce_min(b));
            return add(add(random_projection(b, seed), ext), reduce_sum(reduce_sum(b, 1)));
          };
          return c;
        },
        pts, 1e-5, 1e-4, d);
  });

  s.run("grad: adjacency transform (A, gamma)", [&](std::string& d) {
    return grad_check_points(
        [&opts](std::uint64_t seed) {
          Rng rng(seed);
          const Tensor a = random_uniform({4, 4}, rng);
          const Scalar gamma = rng.uniform(0.5, 1.5);
          auto adj = std::make_shared<LearnableAdjacency>(LearnableAdjacency::from_matrix(a, gamma, "adj"));
          GradCase c;
          c.owner = adj;
          c.extra = {&adj->weights, &*adj->gamma};
          c.loss = [seed, adj, &opts](const auto&) {
            return random_projection(transform_adjacency(*adj, opts.transform).matrix, seed);
          };
          return c;
        },
        pts, 1e-5, 1e-3, d);
  });

  s.run("grad: spatial graph conv", [&](std::string& d) {
    return grad_check_points(
        [](std::uint64_t seed) {
          Rng rng(seed);
          GradCase c({rand_param("x", {2, 3, 4, 3}, rng), Parameter("A", random_uniform({3, 3}, rng)),
                      rand_param("w", {2, 3, 1, 1}, rng), rand_param("b", {2}, rng)});
          c.loss = [seed](const auto& p) {
            Var scaled = minmax_scale(add_self_loop(p[1].var()));
            Var m = sym_normalize(scaled, degree(scaled));
            return random_projection(conv2d(propagate_vertices(p[0].var(), m), p[2].var(), p[3].var()), seed);
          };
          return c;
        },
        pts, 1e-5, 1e-3, d);
  });

  s.run("grad: full tiny model, every parameter group", [&](std::string& d) {
    double worst = 0;
    std::string worst_name;
    for (bool gamma : {false, true})
      for (int k = 0; k < std::max(1, pts / 5); ++k) {
        const std::uint64_t seed = 77 + static_cast<std::uint64_t>(k);
        ModelParams m = ModelParams::initialize(tiny_model_config(gamma), seed);
        Rng rng(seed * 31 + 5);
        const Tensor x = random_normal({2, 2, 5, 3}, rng);
        const Tensor y = random_normal({2, 3}, rng);
        auto params = m.parameters();
        const auto r = check_gradients(
            [&] { return mse_loss(model_forward(constant(x), m, Mode::train, opts.transform), constant(y)); }, params,
            1e-4);
        if (r.max_relative_error >= worst) {
          worst = r.max_relative_error;
          worst_name = r.worst_parameter;
        }
      }
    d = fmt_err(worst) + " (" + worst_name + ")";
    return worst < 1e-3;
  });

  s.run("adjacency transform oracle", [&](std::string& d) {
    const Tensor zero_t = transformed_matrix(LearnableAdjacency::from_matrix(Tensor(Shape{3, 3}), std::nullopt, "z"),
                                             opts.transform);
    const double err_identity = (zero_t.matrix() - RowMatrix::Identity(3, 3)).cwiseAbs().maxCoeff();
    const Tensor t = transformed_matrix(
        LearnableAdjacency::from_matrix(Tensor(Shape{2, 2}, std::initializer_list<Scalar>{0.0, 1.0, 0.0, 0.0}), std::nullopt, "t"), opts.transform);
    RowMatrix expected(2, 2);
    expected << 0.5, 0.70710678118654752, 0.0, 1.0;
    const double err_hand = (t.matrix() - expected).cwiseAbs().maxCoeff();
    std::ostringstream os;
    os << "|T(0) - I| = " << err_identity << ", |T([[0,1],[0,0]]) - hand| = " << err_hand;
    d = os.str();
    return err_identity <= 1e-12 && err_hand <= 1e-9;
  });

  s.run("window count (100, 30, 6) = 65", [&](std::string& d) {
    auto series = std::make_shared<RawSeries>();
    series->cities = {"a"};
    series->variables = {"w"};
    series->values = Tensor(Shape{100, 1, 1});
    for (Hour h = 0; h < 100; ++h) series->timestamps.push_back(h);
    const auto w = make_windows(series, 30, 6, {0}, 0);
    d = std::to_string(w.size()) + " windows";
    return w.size() == 65;
  });

  s.run("Adam first step", [&](std::string& d) {
    Parameter p("theta", Tensor::scalar(0.0));
    p.grad()[0] = 1.0;
    std::vector<Parameter*> ps{&p};
    AdamState st = AdamState::for_parameters(ps);
    adam_step(ps, st, 0.001);
    std::ostringstream os;
    os.precision(15);
    os << "theta = " << p.value()[0];
    d = os.str();
    return std::abs(p.value()[0] - (-0.000999999990)) <= 1e-12;
  });

  s.run("gamma = 1 variant bitwise equals base model", [&](std::string& d) {
    ModelParams base = ModelParams::initialize(tiny_model_config(false), 9);
    ModelParams with_gamma = ModelParams::initialize(tiny_model_config(true), 9);
    // Same draws: gamma parameters consume no randomness.
    Rng rng(4);
    const Tensor x = random_normal({2, 2, 5, 3}, rng);
    const Tensor a = model_forward(constant(x), base, Mode::train).value();
    const Tensor b = model_forward(constant(x), with_gamma, Mode::train).value();
    bool params_equal = true;
    auto pb = base.parameters();
    std::size_t j = 0;
    for (const Parameter* q : with_gamma.parameters()) {
      if (q->name().find(".gamma") != std::string::npos) continue;
      params_equal = params_equal && pb.at(j++)->value() == q->value();
    }
    d = params_equal ? "outputs compared bitwise" : "parameter initialization differs";
    return params_equal && a == b;
  });

  return s.results;
}

}  // namespace wgcn
