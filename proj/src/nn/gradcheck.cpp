// SPDX-License-Identifier: Apache-2.0
#include "mvact/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mvact/error.hpp"
#include "mvact/nn/ops.hpp"

namespace mvact::nn {

namespace {

Real evaluate(const ScalarFn& f, const Tensor& x) {
  Graph g;
  const Var out = f(g, g.leaf(x, false));
  if (out.value().size() != 1) {
    throw Error(Errc::non_scalar_loss, "checked function returned shape " + to_string(out.shape()));
  }
  return out.value()[0];
}

}  // namespace

Tensor analytic_gradient(const ScalarFn& f, const Tensor& x) {
  Graph g;
  const Var in = g.leaf(x, true);
  const Var out = f(g, in);
  g.backward(out);
  return g.grad(in);
}

Tensor numeric_gradient(const ScalarFn& f, const Tensor& x, Real eps) {
  if (!(eps > 0.0)) throw Error(Errc::invalid_argument, "finite difference eps must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const Real up = evaluate(f, probe);
    probe[i] = x[i] - eps;
    const Real down = evaluate(f, probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

Real max_relative_error(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw Error(Errc::shape_mismatch, "gradient sizes differ");
  Real worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const Real denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

Real finite_difference_check(const ScalarFn& f, const Tensor& x, Real eps) {
  const Tensor numeric = numeric_gradient(f, x, eps);
  return max_relative_error(analytic_gradient(f, x), numeric);
}

namespace {

struct Suite {
  std::mt19937_64 rng;
  Real eps;
  std::vector<GradCheckResult> results;

  Index dim(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

  Tensor randn(Shape shape, Real scale = 1.0) {
    Tensor t(std::move(shape));
    std::normal_distribution<Real> n(0.0, scale);
    for (Index i = 0; i < t.size(); ++i) t[i] = n(rng);
    return t;
  }

  /// Random linear functional: sum(out * R) with R fixed per case.
  ScalarFn project(std::function<Var(Graph&, Var)> op, const Shape& out_shape) {
    const Tensor r = randn(out_shape);
    return [op = std::move(op), r](Graph& g, Var x) { return sum(mul(op(g, x), g.constant(r))); };
  }

  void run(const std::string& name, const std::function<std::pair<ScalarFn, Tensor>()>& make_case) {
    GradCheckResult res{name, 0, 0.0};
    for (int c = 0; c < 5; ++c) {
      auto [f, x] = make_case();
      res.max_relative_error = std::max(res.max_relative_error, finite_difference_check(f, x, eps));
      ++res.cases;
    }
    results.push_back(res);
  }
};

}  // namespace

std::vector<GradCheckResult> primitive_gradient_suite(std::uint64_t seed, Real eps) {
  Suite s{std::mt19937_64(seed), eps, {}};

  s.run("matmul.lhs", [&] {
    const Index m = s.dim(1, 5), k = s.dim(1, 5), n = s.dim(1, 5);
    const Tensor b = s.randn({k, n});
    return std::pair{s.project([b](Graph& g, Var x) { return matmul(x, g.constant(b)); }, {m, n}), s.randn({m, k})};
  });
  s.run("matmul.rhs", [&] {
    const Index m = s.dim(1, 5), k = s.dim(1, 5), n = s.dim(1, 5);
    const Tensor a = s.randn({m, k});
    return std::pair{s.project([a](Graph& g, Var x) { return matmul(g.constant(a), x); }, {m, n}), s.randn({k, n})};
  });
  s.run("add", [&] {
    const Index m = s.dim(1, 5), n = s.dim(1, 5);
    const Tensor b = s.randn({m, n});
    return std::pair{s.project([b](Graph& g, Var x) { return add(x, g.constant(b)); }, {m, n}), s.randn({m, n})};
  });
  s.run("add.row_broadcast", [&] {
    const Index m = s.dim(1, 5), n = s.dim(1, 5);
    const Tensor a = s.randn({m, n});
    return std::pair{s.project([a](Graph& g, Var x) { return add(g.constant(a), x); }, {m, n}), s.randn({n})};
  });
  s.run("mul", [&] {
    const Index m = s.dim(1, 5), n = s.dim(1, 5);
    const Tensor b = s.randn({m, n});
    return std::pair{s.project([b](Graph& g, Var x) { return mul(x, g.constant(b)); }, {m, n}), s.randn({m, n})};
  });
  s.run("mul.square", [&] {
    const Index m = s.dim(1, 5), n = s.dim(1, 5);
    return std::pair{s.project([](Graph&, Var x) { return mul(x, x); }, {m, n}), s.randn({m, n})};
  });
  s.run("scale", [&] {
    const Index m = s.dim(1, 5), n = s.dim(1, 5);
    const Real c = s.randn({1})[0];
    return std::pair{s.project([c](Graph&, Var x) { return scale(x, c); }, {m, n}), s.randn({m, n})};
  });
  s.run("concat.rows", [&] {
    const Index m = s.dim(1, 4), m2 = s.dim(1, 4), n = s.dim(1, 5);
    const Tensor b = s.randn({m2, n});
    return std::pair{s.project([b](Graph& g, Var x) { return concat({g.constant(b), x, x}, 0); }, {m2 + 2 * m, n}),
                     s.randn({m, n})};
  });
  s.run("concat.cols", [&] {
    const Index m = s.dim(1, 4), n = s.dim(1, 4), n2 = s.dim(1, 4);
    const Tensor b = s.randn({m, n2});
    return std::pair{s.project([b](Graph& g, Var x) { return concat({x, g.constant(b)}, 1); }, {m, n + n2}),
                     s.randn({m, n})};
  });
  s.run("slice.rows", [&] {
    const Index m = s.dim(2, 6), n = s.dim(1, 5);
    const Index b = s.dim(0, m - 2), e = s.dim(b + 1, m);
    return std::pair{s.project([b, e](Graph&, Var x) { return slice(x, 0, b, e); }, {e - b, n}), s.randn({m, n})};
  });
  s.run("slice.cols", [&] {
    const Index m = s.dim(1, 5), n = s.dim(2, 6);
    const Index b = s.dim(0, n - 2), e = s.dim(b + 1, n);
    return std::pair{s.project([b, e](Graph&, Var x) { return slice(x, 1, b, e); }, {m, e - b}), s.randn({m, n})};
  });
  s.run("transpose", [&] {
    const Index m = s.dim(1, 5), n = s.dim(1, 5);
    return std::pair{s.project([](Graph&, Var x) { return transpose(x); }, {n, m}), s.randn({m, n})};
  });
  s.run("softmax.rows", [&] {
    const Index m = s.dim(1, 5), n = s.dim(1, 6);
    return std::pair{s.project([](Graph&, Var x) { return softmax(x, 1); }, {m, n}), s.randn({m, n}, 2.0)};
  });
  s.run("softmax.cols", [&] {
    const Index m = s.dim(1, 6), n = s.dim(1, 5);
    return std::pair{s.project([](Graph&, Var x) { return softmax(x, 0); }, {m, n}), s.randn({m, n}, 2.0)};
  });
  s.run("layer_norm.input", [&] {
    // Two features normalize to +-1 whatever the input; the gradient is ~0.
    const Index m = s.dim(1, 4), n = s.dim(3, 6);
    const Tensor gm = s.randn({n}), bt = s.randn({n});
    return std::pair{
        s.project([gm, bt](Graph& g, Var x) { return layer_norm(x, g.constant(gm), g.constant(bt)); }, {m, n}),
        s.randn({m, n})};
  });
  s.run("layer_norm.gain", [&] {
    const Index m = s.dim(1, 4), n = s.dim(2, 6);
    const Tensor in = s.randn({m, n}), bt = s.randn({n});
    return std::pair{
        s.project([in, bt](Graph& g, Var x) { return layer_norm(g.constant(in), x, g.constant(bt)); }, {m, n}),
        s.randn({n})};
  });
  s.run("layer_norm.bias", [&] {
    const Index m = s.dim(1, 4), n = s.dim(2, 6);
    const Tensor in = s.randn({m, n}), gm = s.randn({n});
    return std::pair{
        s.project([in, gm](Graph& g, Var x) { return layer_norm(g.constant(in), g.constant(gm), x); }, {m, n}),
        s.randn({n})};
  });
  s.run("gelu", [&] {
    const Index m = s.dim(1, 5), n = s.dim(1, 5);
    // gelu' vanishes near -0.7518 and in the far negative tail, where a
    // relative error measures only roundoff. Sample [-3, 3] minus that band.
    Tensor x({m, n});
    std::uniform_real_distribution<Real> u(-3.0, 3.0);
    for (Index i = 0; i < x.size(); ++i) {
      do {
        x[i] = u(s.rng);
      } while (std::abs(x[i] + 0.7518) < 0.05);
    }
    return std::pair{s.project([](Graph&, Var x) { return gelu(x); }, {m, n}), x};
  });
  s.run("sigmoid", [&] {
    const Index m = s.dim(1, 5), n = s.dim(1, 5);
    return std::pair{s.project([](Graph&, Var x) { return sigmoid(x); }, {m, n}), s.randn({m, n}, 2.0)};
  });
  s.run("embedding_lookup", [&] {
    const Index v = s.dim(2, 6), e = s.dim(1, 5), k = s.dim(1, 6);
    std::vector<Index> ids;
    for (Index i = 0; i < k; ++i) ids.push_back(s.dim(0, v - 1));
    return std::pair{s.project([ids](Graph&, Var x) { return embedding_lookup(x, ids); }, {k, e}), s.randn({v, e})};
  });
  s.run("cross_entropy_logits", [&] {
    const Index m = s.dim(1, 5), n = s.dim(2, 6);
    Tensor t = s.randn({m, n});
    t.flat() = t.flat().array().abs().matrix();
    std::vector<Real> w;
    for (Index i = 0; i < m; ++i) w.push_back(std::abs(s.randn({1})[0]));
    ScalarFn f = [t, w](Graph&, Var x) { return cross_entropy_logits(x, t, w); };
    return std::pair{f, s.randn({m, n}, 2.0)};
  });
  s.run("binary_cross_entropy_logits", [&] {
    const Index m = s.dim(1, 8);
    std::vector<Real> y, w;
    for (Index i = 0; i < m; ++i) {
      y.push_back(s.dim(0, 1));
      w.push_back(std::abs(s.randn({1})[0]));
    }
    ScalarFn f = [y, w](Graph&, Var x) { return binary_cross_entropy_logits(x, y, w); };
    return std::pair{f, s.randn({m}, 2.0)};
  });
  s.run("sum", [&] {
    const Index m = s.dim(1, 5), n = s.dim(1, 5);
    ScalarFn f = [](Graph&, Var x) { return sum(x); };
    return std::pair{f, s.randn({m, n})};
  });
  s.run("reshape", [&] {
    const Index m = s.dim(1, 5), n = s.dim(1, 5);
    return std::pair{s.project([m, n](Graph&, Var x) { return reshape(x, {n, m}); }, {n, m}), s.randn({m, n})};
  });
  s.run("gather", [&] {
    const Index m = s.dim(1, 5), n = s.dim(1, 5), k = s.dim(1, 10);
    std::vector<Index> idx;
    for (Index i = 0; i < k; ++i) idx.push_back(s.dim(0, m * n - 1));
    return std::pair{s.project([idx, k](Graph&, Var x) { return gather(x, idx, {k}); }, {k}), s.randn({m, n})};
  });
  return s.results;
}

}  // namespace mvact::nn
