#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "aelpn/potential.hpp"

namespace aelpn {

struct InversionSettings {
  double tol = 1e-8;        // infinity-norm gradient residual target
  int max_iter = 10000;
  double shrink = 0.5;      // backtracking step shrink
  double suff_decrease = 1e-4;
};

struct InversionInfo {
  Vec y;
  double residual = 0.0;  // |f(y) - x|_inf at the returned y
  int iterations = 0;
  bool converged = false;
};

// Solves f(y) = x by minimizing psi(y) - <x, y>: damped Newton on a
// finite-difference Jacobian with backtracking on the objective, falling
// back to steepest descent when a Newton step is unusable. Needs a strongly
// convex potential to be well posed.
InversionInfo invert_prox_info(const ProxModel& m, const Vec& x,
                               const InversionSettings& s);

// Same, but throws NumericalError (carrying the best residual) when the
// residual target is not met within max_iter.
Vec invert_prox(const ProxModel& m, const Vec& x, const InversionSettings& s);

// The implicit regularizer at x_hat, up to the potential's additive constant:
// R(x_hat) = <x_hat, y> - psi(y) - |x_hat|^2/2 with y = f^{-1}(x_hat). The
// identity comes from psi(y) = |y|^2/2 + (R o f)(y) + const along gradients
// of convex potentials.
double regularizer_eval(const ProxModel& m, const Vec& x_hat,
                        const InversionSettings& s);

struct AuditReport {
  double max_deviation = 0.0;
  Vec worst_input;
  double worst_a = 1.0;  // group element at the worst case (equivariance only)
  double worst_b = 0.0;
  std::size_t samples = 0;
  std::size_t violations = 0;
};

using VectorMap = std::function<Vec(const Vec&)>;
using PotentialFun = std::function<ValueGrad(const Vec&)>;

PotentialFun model_potential_fun(const ProxModel& m);
VectorMap model_prox_map(const ProxModel& m);

// Monotonicity of the gradient field: samples `pairs` pairs from N(0, I)
// scaled by {0.1, 1, 10} in rotation and reports the most negative value of
// <grad(x) - grad(x'), x - x'> / |x - x'|^2. Violations count entries below
// -threshold.
AuditReport convexity_audit(const PotentialFun& f, std::size_t n,
                            std::size_t pairs, Rng& rng,
                            double threshold = 1e-8);

// Relative equivariance deviation |f(a x + b 1) - (a f(x) + b 1)|_inf /
// (1 + |a f(x) + b 1|_inf), maximized over samples and the (a, b) grid.
AuditReport equivariance_audit(const VectorMap& f, std::size_t n,
                               const std::vector<std::pair<double, double>>& grid,
                               std::size_t samples, Rng& rng,
                               double threshold = 1e-6);

// Central-difference Jacobian at sampled points; deviation is the largest
// |J_ij - J_ji|. Gradient fields pass; arbitrary maps generally do not.
AuditReport jacobian_symmetry_audit(const VectorMap& f, std::size_t n,
                                    std::size_t points, Rng& rng,
                                    double fd_step = 1e-5,
                                    double threshold = 1e-5);

}  // namespace aelpn
