#include <cmath>
#include <stdexcept>

#include "aelpn/potential.hpp"
#include "doctest.h"

using namespace aelpn;

namespace {

double inf_dev(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(a[i] - b[i]));
  }
  return m;
}

Vec scaled_shifted(const Vec& x, double a, double b) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + b;
  return y;
}

ProxModel fresh(VariantKind kind, std::size_t n, double alpha,
                std::uint64_t seed, bool sortpool = false) {
  Rng rng(seed);
  return make_model(kind, n, IcnnConfig::default_widths(n), alpha, rng,
                    sortpool);
}

}  // namespace

TEST_CASE("variant formulas reduce to the network plus the stated terms") {
  Rng rng(40);
  ProxModel plain = make_model(VariantKind::kPlainLpn, 3, {4, 4}, 0.0, rng);
  const Vec x{0.3, -1.1, 0.7};
  CHECK(potential_value(plain, x) ==
        doctest::Approx(icnn_value(plain.config, plain.params, x))
            .epsilon(1e-15));

  plain.variant.alpha = 0.5;
  const double x2 = 0.09 + 1.21 + 0.49;
  CHECK(potential_value(plain, x) ==
        doctest::Approx(icnn_value(plain.config, plain.params, x) +
                        0.25 * x2)
            .epsilon(1e-14));

  Rng rng2(41);
  ProxModel shift = make_model(VariantKind::kShiftEq, 3, {4, 4}, 0.25, rng2);
  const double mean = (0.3 - 1.1 + 0.7) / 3.0;
  Vec u(3);
  double u2 = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    u[i] = x[i] - mean;
    u2 += u[i] * u[i];
  }
  CHECK(potential_value(shift, x) ==
        doctest::Approx(icnn_value(shift.config, shift.params, u) +
                        0.125 * u2 + 0.5 * 3.0 * mean * mean)
            .epsilon(1e-13));
}

TEST_CASE("affine-equivariant potential on constant signals is the mean energy") {
  for (double alpha : {0.0, 0.01}) {
    ProxModel m = fresh(VariantKind::kAffineEq, 4, alpha, 42);
    // centered part vanishes on c*1, leaving |Px|^2/2 = n c^2 / 2
    CHECK(potential_value(m, {0.7, 0.7, 0.7, 0.7}) ==
          doctest::Approx(0.5 * 4 * 0.49).epsilon(1e-14));
    const Vec f = prox_apply(m, {0.7, 0.7, 0.7, 0.7});
    for (double v : f) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));
  }
}

TEST_CASE("prox is the exact gradient of the potential") {
  for (VariantKind kind : {VariantKind::kPlainLpn, VariantKind::kScaleEq,
                           VariantKind::kShiftEq, VariantKind::kAffineEq}) {
    ProxModel m = fresh(kind, 4, 0.01, 43);
    Rng xr(44);
    Vec x(4);
    for (double& v : x) v = xr.gaussian();
    const Vec g = prox_apply(m, x);
    const double h = 1e-6;
    for (std::size_t i = 0; i < 4; ++i) {
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd =
          (potential_value(m, xp) - potential_value(m, xm)) / (2.0 * h);
      CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("scale-equivariant variant: f(a x) = a f(x)") {
  ProxModel m = fresh(VariantKind::kScaleEq, 4, 0.01, 45);
  Rng xr(46);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x(4);
    for (double& v : x) v = 2.0 * xr.gaussian();
    const Vec fx = prox_apply(m, x);
    for (double a : {0.25, 2.0, 3.0}) {
      const Vec lhs = prox_apply(m, scaled_shifted(x, a, 0.0));
      CHECK(inf_dev(lhs, scaled_shifted(fx, a, 0.0)) < 1e-12 * (1.0 + a));
    }
  }
}

TEST_CASE("shift-equivariant variant: f(x + b 1) = f(x) + b 1") {
  ProxModel m = fresh(VariantKind::kShiftEq, 4, 0.01, 47);
  Rng xr(48);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x(4);
    for (double& v : x) v = xr.gaussian();
    const Vec fx = prox_apply(m, x);
    for (double b : {-0.5, 0.7, 10.0}) {
      const Vec lhs = prox_apply(m, scaled_shifted(x, 1.0, b));
      CHECK(inf_dev(lhs, scaled_shifted(fx, 1.0, b)) < 1e-11);
    }
  }
}

TEST_CASE("affine-equivariant variant: f(a x + b 1) = a f(x) + b 1") {
  for (bool sortpool_flag : {false, true}) {
    ProxModel m = fresh(VariantKind::kAffineEq, 6, 0.01, 49, sortpool_flag);
    Rng xr(50);
    for (int trial = 0; trial < 20; ++trial) {
      Vec x(6);
      for (double& v : x) v = xr.gaussian();
      const Vec fx = prox_apply(m, x);
      for (double a : {0.25, 0.5, 2.0, 4.0, 3.0}) {
        for (double b : {-0.5, 0.0, 0.5}) {
          const Vec lhs = prox_apply(m, scaled_shifted(x, a, b));
          CHECK(inf_dev(lhs, scaled_shifted(fx, a, b)) < 1e-11 * (1.0 + a));
        }
      }
    }
  }
}

TEST_CASE("plain LPN is not scale-equivariant (witness)") {
  ProxModel m = fresh(VariantKind::kPlainLpn, 4, 0.0, 51);
  Rng xr(52);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Vec x(4);
    for (double& v : x) v = xr.gaussian();
    const Vec fx = prox_apply(m, x);
    const Vec lhs = prox_apply(m, scaled_shifted(x, 2.0, 0.0));
    worst = std::max(worst, inf_dev(lhs, scaled_shifted(fx, 2.0, 0.0)));
  }
  CHECK(worst > 1e-3);
}

TEST_CASE("Euler identity for 2-homogeneous potentials") {
  for (VariantKind kind : {VariantKind::kScaleEq, VariantKind::kAffineEq}) {
    ProxModel m = fresh(kind, 4, 0.01, 53);
    Rng xr(54);
    for (int trial = 0; trial < 20; ++trial) {
      Vec x(4);
      for (double& v : x) v = 2.0 * xr.gaussian();
      const Vec g = prox_apply(m, x);
      double xg = 0.0;
      for (std::size_t i = 0; i < 4; ++i) xg += x[i] * g[i];
      CHECK(potential_value(m, x) ==
            doctest::Approx(0.5 * xg).epsilon(1e-10));
    }
  }
}

TEST_CASE("normalization wrapper: formula, equivariance, constant guard") {
  ProxModel base = fresh(VariantKind::kPlainLpn, 4, 0.0, 55);
  base.variant.kind = VariantKind::kNormTrick;
  Rng xr(56);
  Vec x(4);
  for (double& v : x) v = xr.gaussian();

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= 4.0;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / 4.0);
  Vec z(4);
  for (std::size_t i = 0; i < 4; ++i) z[i] = (x[i] - mean) / sd;

  ProxModel plain = base;
  plain.variant.kind = VariantKind::kPlainLpn;
  Vec expect = prox_apply(plain, z);
  for (double& v : expect) v = sd * v + mean;
  CHECK(inf_dev(prox_apply(base, x), expect) < 1e-14);

  const Vec fx = prox_apply(base, x);
  for (double a : {0.5, 3.0}) {
    for (double b : {-0.2, 0.4}) {
      const Vec lhs = prox_apply(base, scaled_shifted(x, a, b));
      CHECK(inf_dev(lhs, scaled_shifted(fx, a, b)) < 1e-12 * (1.0 + a));
    }
  }

  const Vec c{0.3, 0.3, 0.3, 0.3};
  CHECK(prox_apply(base, c) == c);  // std below guard passes through

  CHECK_THROWS_AS(potential_value(base, x), std::invalid_argument);
}

TEST_CASE("variant/preset compatibility is enforced") {
  Rng rng(57);
  ProxModel m = make_model(VariantKind::kAffineEq, 4, {8, 8}, 0.0, rng);
  CHECK_NOTHROW(m.validate());
  m.config.use_bias = true;  // breaks 1-homogeneity of the backbone
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);

  Rng rng2(58);
  ProxModel p = make_model(VariantKind::kPlainLpn, 4, {8, 8}, 0.0, rng2);
  p.variant.alpha = -0.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);  // alpha >= 0
  Rng rng3(59);
  CHECK_THROWS_AS(make_model(VariantKind::kPlainLpn, 4, {8, 8}, -1.0, rng3),
                  std::invalid_argument);
}
