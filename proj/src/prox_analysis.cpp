#include "aelpn/prox_analysis.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "aelpn/errors.hpp"

namespace aelpn {

namespace {

double inf_norm(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec gaussian_point(std::size_t n, double sc, Rng& rng) {
  Vec x(n);
  for (auto& v : x) v = sc * rng.gaussian();
  return x;
}

constexpr double kAuditScales[3] = {0.1, 1.0, 10.0};

}  // namespace

PotentialFun model_potential_fun(const ProxModel& m) {
  return [&m](const Vec& x) {
    return potential_and_gradient(potential_program(m), m.params.set, x);
  };
}

VectorMap model_prox_map(const ProxModel& m) {
  return [&m](const Vec& x) { return prox_apply(m, x); };
}

namespace {

// Solves J d = r in place by LU with partial pivoting. Returns false when a
// pivot degenerates (singular J), leaving d unspecified.
bool solve_dense(std::vector<double>& J, Vec& d, std::size_t n) {
  std::vector<std::size_t> row(n);
  for (std::size_t i = 0; i < n; ++i) row[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::fabs(J[row[k] * n + k]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::fabs(J[row[i] * n + k]);
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (!(best > 1e-300)) return false;
    std::swap(row[k], row[p]);
    const double piv = J[row[k] * n + k];
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = J[row[i] * n + k] / piv;
      J[row[i] * n + k] = f;
      for (std::size_t j = k + 1; j < n; ++j) {
        J[row[i] * n + j] -= f * J[row[k] * n + j];
      }
    }
  }
  Vec b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = d[row[i]];
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) b[i] -= J[row[i] * n + j] * b[j];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) b[i] -= J[row[i] * n + j] * b[j];
    d[i] = (b[i] /= J[row[i] * n + i]);
  }
  return true;
}

}  // namespace

InversionInfo invert_prox_info(const ProxModel& m, const Vec& x,
                               const InversionSettings& s) {
  const ProgramBuilder prog = potential_program(m);
  Tape ws(&m.params.set);
  const std::size_t n = x.size();

  auto eval = [&](const Vec& y) {
    ValueGrad vg = potential_and_gradient(prog, m.params.set, y, ws);
    vg.value -= dot(x, y);  // objective psi(y) - <x, y>
    for (std::size_t i = 0; i < n; ++i) vg.grad[i] -= x[i];
    return vg;
  };

  // Damped Newton on grad psi(y) = x with a finite-difference Jacobian.
  // The objective is convex piecewise quadratic; first-order descent chatters
  // across gradient kinks and crawls when the potential is barely strongly
  // convex, while the Newton step is exact on each quadratic piece and the
  // FD Jacobian blends the pieces near a kink.
  InversionInfo info;
  info.y = x;  // f is near-identity for well-trained proxes; x is a good start
  ValueGrad cur = eval(info.y);
  std::vector<double> J(n * n);
  Vec d(n), yh(info.y), trial(n);
  ValueGrad next;

  for (info.iterations = 0; info.iterations < s.max_iter; ++info.iterations) {
    info.residual = inf_norm(cur.grad);
    if (info.residual <= s.tol) {
      info.converged = true;
      return info;
    }

    for (std::size_t j = 0; j < n; ++j) {
      const double h = 1e-6 * (1.0 + std::fabs(info.y[j]));
      yh[j] = info.y[j] + h;
      const Vec gp = eval(yh).grad;
      yh[j] = info.y[j] - h;
      const Vec gm = eval(yh).grad;
      yh[j] = info.y[j];
      for (std::size_t i = 0; i < n; ++i) {
        J[i * n + j] = (gp[i] - gm[i]) / (2.0 * h);
      }
    }
    // Symmetrize: J estimates the Hessian of psi, so FD noise is the only
    // asymmetry.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        J[i * n + j] = J[j * n + i] = 0.5 * (J[i * n + j] + J[j * n + i]);
      }
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = -cur.grad[i];
    bool have_newton = solve_dense(J, d, n);
    if (have_newton) {
      for (double v : d) have_newton = have_newton && std::isfinite(v);
    }
    double slope = 0.0;  // <grad, d>, negative for a descent direction
    if (have_newton) {
      slope = dot(cur.grad, d);
    }
    if (!have_newton || !(slope < 0.0)) {
      for (std::size_t i = 0; i < n; ++i) d[i] = -cur.grad[i];
      slope = -dot(cur.grad, cur.grad);
    }

    // Armijo backtracking from the full Newton step. Near the optimum the
    // required decrease falls below the floating-point resolution of the
    // objective, so the test switches to a non-increasing gradient norm.
    double step = 1.0;
    const double g2 = dot(cur.grad, cur.grad);
    for (;;) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = info.y[i] + step * d[i];
      next = eval(trial);
      const double wanted = -s.suff_decrease * step * slope;
      if (next.value <= cur.value - wanted) break;
      const double value_resolution =
          64.0 * std::numeric_limits<double>::epsilon() *
          (std::fabs(cur.value) + std::fabs(next.value));
      if (wanted <= value_resolution && dot(next.grad, next.grad) <= g2) {
        break;
      }
      step *= s.shrink;
      if (step < 1e-18) return info;  // descent direction exhausted
    }
    info.y = trial;
    cur = next;
  }
  info.residual = inf_norm(cur.grad);
  info.converged = info.residual <= s.tol;
  return info;
}

Vec invert_prox(const ProxModel& m, const Vec& x, const InversionSettings& s) {
  InversionInfo info = invert_prox_info(m, x, s);
  if (!info.converged) {
    std::ostringstream msg;
    msg << "prox inversion stalled after " << info.iterations
        << " iterations, best residual " << info.residual << " > tol " << s.tol
        << " (is the potential strongly convex?)";
    throw NumericalError(msg.str());
  }
  return std::move(info.y);
}

double regularizer_eval(const ProxModel& m, const Vec& x_hat,
                        const InversionSettings& s) {
  const Vec y = invert_prox(m, x_hat, s);
  return dot(x_hat, y) - potential_value(m, y) - 0.5 * dot(x_hat, x_hat);
}

AuditReport convexity_audit(const PotentialFun& f, std::size_t n,
                            std::size_t pairs, Rng& rng, double threshold) {
  AuditReport rep;
  rep.samples = pairs;
  bool first = true;
  double min_gap = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double sc = kAuditScales[i % 3];
    const Vec x = gaussian_point(n, sc, rng);
    const Vec xp = gaussian_point(n, sc, rng);
    const Vec gx = f(x).grad;
    const Vec gxp = f(xp).grad;
    double gap = 0.0, d2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = x[j] - xp[j];
      gap += (gx[j] - gxp[j]) * d;
      d2 += d * d;
    }
    if (d2 == 0.0) continue;
    const double normalized = gap / d2;
    if (first || normalized < min_gap) {
      min_gap = normalized;
      rep.worst_input = x;
      first = false;
    }
    if (gap < -threshold * d2) ++rep.violations;
  }
  rep.max_deviation = std::max(0.0, -min_gap);
  return rep;
}

AuditReport equivariance_audit(const VectorMap& f, std::size_t n,
                               const std::vector<std::pair<double, double>>& grid,
                               std::size_t samples, Rng& rng, double threshold) {
  AuditReport rep;
  for (std::size_t i = 0; i < samples; ++i) {
    const Vec x = gaussian_point(n, kAuditScales[i % 3], rng);
    const Vec fx = f(x);
    for (const auto& [a, b] : grid) {
      Vec gx(n);
      for (std::size_t j = 0; j < n; ++j) gx[j] = a * x[j] + b;
      const Vec lhs = f(gx);
      double dev = 0.0, ref = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double rhs = a * fx[j] + b;
        dev = std::max(dev, std::fabs(lhs[j] - rhs));
        ref = std::max(ref, std::fabs(rhs));
      }
      const double rel = dev / (1.0 + ref);
      ++rep.samples;
      if (rel > threshold) ++rep.violations;
      if (rel > rep.max_deviation) {
        rep.max_deviation = rel;
        rep.worst_input = x;
        rep.worst_a = a;
        rep.worst_b = b;
      }
    }
  }
  return rep;
}

AuditReport jacobian_symmetry_audit(const VectorMap& f, std::size_t n,
                                    std::size_t points, Rng& rng,
                                    double fd_step, double threshold) {
  AuditReport rep;
  rep.samples = points;
  std::vector<Vec> cols(n);
  for (std::size_t p = 0; p < points; ++p) {
    Vec x = gaussian_point(n, kAuditScales[p % 3], rng);
    for (std::size_t j = 0; j < n; ++j) {
      const double saved = x[j];
      x[j] = saved + fd_step;
      const Vec fp = f(x);
      x[j] = saved - fd_step;
      const Vec fm = f(x);
      x[j] = saved;
      Vec& col = cols[j];
      col.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        col[i] = (fp[i] - fm[i]) / (2.0 * fd_step);
      }
    }
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        asym = std::max(asym, std::fabs(cols[j][i] - cols[i][j]));
      }
    }
    if (asym > threshold) ++rep.violations;
    if (asym > rep.max_deviation) {
      rep.max_deviation = asym;
      rep.worst_input = x;
    }
  }
  return rep;
}

}  // namespace aelpn
