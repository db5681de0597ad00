#include <cmath>
#include <vector>

#include "aelpn/diff_engine.hpp"
#include "aelpn/rng.hpp"
#include "doctest.h"

using namespace aelpn;

namespace {

Vec random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Vec v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Two-hidden-layer bias-free convex-style program used throughout:
//   z1 = pairwise_max(W0 x)           (slot 0, 8x3 -> 4)
//   z2 = softplus(W1 z1 + W1x x)      (slots 1: 6x4, 2: 6x3)
//   psi = 0.5 * |z2|^2 + <w3, x>^2    (slot 3: 1x3 row)
ParamSet make_params(Rng& rng) {
  ParamSet p;
  p.slots.push_back(Tensor::matrix(8, 3));
  p.slots.push_back(Tensor::matrix(6, 4));
  p.slots.push_back(Tensor::matrix(6, 3));
  p.slots.push_back(Tensor::matrix(1, 3));
  for (auto& t : p.slots) {
    for (auto& x : t.data) x = rng.uniform(-0.9, 0.9);
  }
  return p;
}

int demo_program(Tape& t, int x) {
  const int z1 = t.pairwise_max(t.affine(0, -1, x));
  const int pre = t.combine(1.0, t.affine(1, -1, z1), 1.0, t.affine(2, -1, x));
  const int z2 = t.softplus(pre, 1.0);
  const int quad = t.square(t.affine(3, -1, x));
  return t.combine(0.5, t.squared_norm(z2), 1.0, quad);
}

}  // namespace

TEST_CASE("gradient of a quadratic is the identity") {
  ParamSet empty;
  auto prog = [](Tape& t, int x) { return t.combine(0.5, t.squared_norm(x)); };
  const Vec x = {1.5, -2.0, 0.25, 4.0};
  const ValueGrad vg = potential_and_gradient(prog, empty, x);
  CHECK(vg.value == doctest::Approx(0.5 * (2.25 + 4.0 + 0.0625 + 16.0)));
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(vg.grad[i] == doctest::Approx(x[i]).epsilon(1e-14));
  }
}

TEST_CASE("gradient of a linear functional is its coefficient vector") {
  ParamSet empty;
  const Vec w = {2.0, -3.0, 0.5};
  auto prog = [&](Tape& t, int x) {
    return t.inner_product(t.constant(w), x);
  };
  const ValueGrad vg = potential_and_gradient(prog, empty, {1.0, 1.0, 1.0});
  CHECK(vg.value == doctest::Approx(-0.5));
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(vg.grad[i] == doctest::Approx(w[i]).epsilon(1e-14));
  }
}

TEST_CASE("program that ignores the input has zero gradient") {
  ParamSet empty;
  auto prog = [](Tape& t, int /*x*/) {
    return t.squared_norm(t.constant(Vec{1.0, 2.0}));
  };
  const ValueGrad vg = potential_and_gradient(prog, empty, {3.0, 4.0});
  CHECK(vg.value == doctest::Approx(5.0));
  CHECK(vg.grad.size() == 2);
  CHECK(vg.grad[0] == 0.0);
  CHECK(vg.grad[1] == 0.0);
}

TEST_CASE("pairwise max ties route to the lower index") {
  ParamSet empty;
  Tape t(&empty);
  const int x = t.input({3.0, 3.0, -1.0, 2.0});
  const int m = t.pairwise_max(x);
  CHECK(t.value(m) == Vec{3.0, 2.0});
  CHECK(t.node(m).sel[0] == 0);  // exact tie -> first element
  CHECK(t.node(m).sel[1] == 1);
  // Routing in both reverse paths agrees with the recorded winners.
  const int top = t.combine(1.0, t.squared_norm(m));
  const int g = t.gradient_wrt(top, x);
  CHECK(t.value(g) == Vec{6.0, 0.0, 0.0, 4.0});
  t.backward(top);
  CHECK(t.node(x).adj == Vec{6.0, 0.0, 0.0, 4.0});
}

TEST_CASE("sortpool orders each pair and restores on the way back") {
  ParamSet empty;
  Tape t(&empty);
  const int x = t.input({1.0, 5.0, 7.0, 2.0});
  const int s = t.sortpool(x);
  CHECK(t.value(s) == Vec{5.0, 1.0, 7.0, 2.0});
  const int w = t.constant(Vec{10.0, 1.0, 10.0, 1.0});
  const int top = t.inner_product(w, s);
  const int g = t.gradient_wrt(top, x);
  CHECK(t.value(g) == Vec{1.0, 10.0, 10.0, 1.0});
  t.backward(top);
  CHECK(t.node(x).adj == Vec{1.0, 10.0, 10.0, 1.0});
}

TEST_CASE("input gradient of a composite network matches central differences") {
  Rng rng(11);
  ParamSet p = make_params(rng);
  const Vec x0 = random_vec(3, rng);
  const ValueGrad vg = potential_and_gradient(demo_program, p, x0);

  auto fun = [&](const Vec& x) {
    return potential_and_gradient(demo_program, p, x).value;
  };
  const FdReport rep = finite_difference_check(fun, x0, vg.grad, 1e-6);
  CHECK(rep.max_rel_err < 1e-7);
}

TEST_CASE("unrolled gradient equals the numeric reverse pass") {
  Rng rng(13);
  ParamSet p = make_params(rng);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec x0 = random_vec(3, rng, -2.0, 2.0);
    Tape t(&p);
    const int x = t.input(x0);
    const int top = demo_program(t, x);
    const int g = t.gradient_wrt(top, x);
    const Vec unrolled = t.value(g);
    t.backward(top);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(unrolled[i] == doctest::Approx(t.node(x).adj[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("parameter gradients of losses over the gradient map match FD") {
  Rng rng(17);
  ParamSet p = make_params(rng);
  std::vector<BatchPair> batch;
  for (int i = 0; i < 3; ++i) {
    batch.push_back({random_vec(3, rng, -2.0, 2.0), random_vec(3, rng)});
  }

  for (LossSpec loss : {LossSpec{LossKind::kL2, 1.0},
                        LossSpec{LossKind::kProxMatch, 0.8},
                        LossSpec{LossKind::kProxMatch, 0.8, false},
                        LossSpec{LossKind::kL1, 1.0}}) {
    const LossGradResult res = loss_parameter_gradient(demo_program, p, batch, loss);
    CHECK(std::isfinite(res.mean_loss));

    double max_rel = 0.0;
    const double step = 1e-6;
    for (std::size_t s = 0; s < p.slots.size(); ++s) {
      for (std::size_t k = 0; k < p.slots[s].data.size(); ++k) {
        const double saved = p.slots[s].data[k];
        p.slots[s].data[k] = saved + step;
        const double fp = loss_value(demo_program, p, batch, loss);
        p.slots[s].data[k] = saved - step;
        const double fm = loss_value(demo_program, p, batch, loss);
        p.slots[s].data[k] = saved;
        const double fd = (fp - fm) / (2.0 * step);
        const double got = res.grads.slots[s].data[k];
        const double rel = std::fabs(fd - got) / std::max(1.0, std::fabs(got));
        if (rel > max_rel) max_rel = rel;
      }
    }
    CHECK(max_rel < 2e-6);
  }
}

TEST_CASE("proximal matching node reproduces frozen hand values") {
  // n = 1, gamma = 0.1, zero residual: 1 - (pi*gamma^2)^(-1/2).
  ParamSet empty;
  Tape t(&empty);
  const int s0 = t.constant(0.0);
  const int l0 = t.prox_match(s0, 0.1, 1);
  CHECK(t.scalar(l0) == doctest::Approx(-4.6418958354775628).epsilon(1e-14));

  // Large argument saturates at 1 exactly (expm1 path).
  const int sbig = t.constant(1e6);
  CHECK(t.scalar(t.prox_match(sbig, 0.1, 1)) == doctest::Approx(1.0));

  // Huge dimension: the normalizer underflows but the value stays finite.
  const int l2 = t.prox_match(t.constant(4.0), 142.0, 49152);
  CHECK(std::isfinite(t.scalar(l2)));
  CHECK(t.scalar(l2) == doctest::Approx(1.0));

  // Derivative of the node itself against central differences.
  auto f = [&](const Vec& s) {
    Tape tt(&empty);
    return tt.scalar(tt.prox_match(tt.constant(s), 0.7, 5));
  };
  Tape t2(&empty);
  const int sv = t2.input({0.3});
  const int lv = t2.prox_match(sv, 0.7, 5);
  t2.backward(lv);
  const FdReport rep = finite_difference_check(f, {0.3}, t2.node(sv).adj, 1e-6);
  CHECK(rep.max_rel_err < 1e-8);
}

TEST_CASE("matching node with n = 0 drops the normalizer exactly") {
  ParamSet empty;
  Tape t(&empty);

  // 1 - exp(-s / gamma^2) at s = 0.02, gamma = 0.1.
  const int plain = t.prox_match(t.constant(0.02), 0.1, 0);
  CHECK(t.scalar(plain) == doctest::Approx(0.8646647167633873).epsilon(1e-14));

  // Zero residual gives exactly zero (the normalized form cannot).
  CHECK(t.scalar(t.prox_match(t.constant(0.0), 0.1, 0)) == 0.0);

  // 1 - norm == (pi gamma^2)^(-n/2) * (1 - unnorm) where nothing underflows.
  const double s = 0.3, gamma = 0.5;
  const std::size_t n = 2;
  const double vn = t.scalar(t.prox_match(t.constant(s), gamma, n));
  const double vu = t.scalar(t.prox_match(t.constant(s), gamma, 0));
  const double pi = std::acos(-1.0);
  const double scale = std::pow(pi * gamma * gamma, -0.5 * double(n));
  CHECK((1.0 - vn) == doctest::Approx(scale * (1.0 - vu)).epsilon(1e-14));
}

TEST_CASE("tape reuse across clear() is exact") {
  Rng rng(23);
  ParamSet p = make_params(rng);
  const Vec x0 = random_vec(3, rng);
  Tape ws;
  const ValueGrad a = potential_and_gradient(demo_program, p, x0, ws);
  for (int i = 0; i < 5; ++i) {
    const ValueGrad b = potential_and_gradient(demo_program, p, x0, ws);
    CHECK(b.value == a.value);
    CHECK(b.grad == a.grad);
  }
}

TEST_CASE("parameter container helpers") {
  ParamSet p;
  p.slots.push_back(Tensor::matrix(2, 2));
  p.slots.push_back(Tensor::vector(3));
  p.slots[0].data = {1.0, 2.0, 3.0, 4.0};
  p.slots[1].data = {5.0, 6.0, 7.0};
  ParamSet z = zeros_like(p);
  CHECK(z.total_size() == 7);
  CHECK(z.slots[1].rows == 3);
  axpy(z, 2.0, p);
  CHECK(z.slots[0].data[3] == 8.0);
  scale(z, 0.5);
  CHECK(z.slots[1].data[0] == 5.0);
}
