#include "aelpn/potential.hpp"

#include <cmath>
#include <stdexcept>

namespace aelpn {

void ProxModel::validate() const {
  config.validate();
  if (variant.alpha < 0.0) {
    throw std::invalid_argument("potential: alpha must be >= 0");
  }
  switch (variant.kind) {
    case VariantKind::kScaleEq:
    case VariantKind::kAffineEq:
      if (!config.equivariant_preset_ok()) {
        throw std::invalid_argument(
            "potential: scale/affine variants need the bias-free "
            "1-homogeneous preset with a rectify-squared head");
      }
      break;
    case VariantKind::kPlainLpn:
    case VariantKind::kShiftEq:
    case VariantKind::kNormTrick:
      if (config.final_rectify_square && !config.equivariant_preset_ok()) {
        throw std::invalid_argument("potential: inconsistent head flags");
      }
      break;
  }
}

ProxModel make_model(VariantKind kind, std::size_t n,
                     std::vector<std::size_t> widths, double alpha, Rng& rng,
                     bool sortpool) {
  ProxModel m;
  m.variant.kind = kind;
  m.variant.alpha = alpha;
  const bool equivariant =
      kind == VariantKind::kScaleEq || kind == VariantKind::kAffineEq;
  m.config = equivariant
                 ? IcnnConfig::equivariant_preset(n, std::move(widths), sortpool)
                 : IcnnConfig::plain_preset(n, std::move(widths));
  m.params = icnn_init(m.config, rng);
  m.validate();
  return m;
}

namespace {

// psi(x) + (alpha/2)|x|^2, ignoring the variant tag. Shared by the plain and
// scale-equivariant cases and by the normalization wrapper's inner denoiser.
ProgramBuilder direct_program(const ProxModel& m) {
  const double alpha = m.variant.alpha;
  return [&m, alpha](Tape& t, int x) {
    const int raw = icnn_program(t, x, m.config, m.params);
    if (alpha == 0.0) return raw;
    return t.combine(1.0, raw, 0.5 * alpha, t.squared_norm(x));
  };
}

}  // namespace

ProgramBuilder potential_program(const ProxModel& m) {
  m.validate();
  const double alpha = m.variant.alpha;
  switch (m.variant.kind) {
    case VariantKind::kPlainLpn:
    case VariantKind::kScaleEq:
      return direct_program(m);
    case VariantKind::kShiftEq:
    case VariantKind::kAffineEq:
      return [&m, alpha](Tape& t, int x) {
        const int u = t.center(x);
        int inner = icnn_program(t, u, m.config, m.params);
        if (alpha != 0.0) {
          inner = t.combine(1.0, inner, 0.5 * alpha, t.squared_norm(u));
        }
        const int mean_sq = t.squared_norm(t.mean_project(x));
        return t.combine(1.0, inner, 0.5, mean_sq);
      };
    case VariantKind::kNormTrick:
      throw std::invalid_argument(
          "potential: the normalization wrapper is not a gradient field and "
          "has no potential");
  }
  throw std::invalid_argument("potential: unknown variant");
}

double potential_value(const ProxModel& m, const Vec& x) {
  Tape t(&m.params.set);
  return t.scalar(potential_program(m)(t, t.input(x)));
}

Vec prox_apply(const ProxModel& m, const Vec& x, Tape& ws) {
  if (m.variant.kind == VariantKind::kNormTrick) return norm_trick_apply(m, x);
  return potential_and_gradient(potential_program(m), m.params.set, x, ws).grad;
}

Vec prox_apply(const ProxModel& m, const Vec& x) {
  Tape ws;
  return prox_apply(m, x, ws);
}

Vec norm_trick_apply(const ProxModel& base, const Vec& x) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  if (sd < 1e-12) return x;  // constant signals: normalization degenerates

  Vec t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = (x[i] - mean) / sd;

  // Inner denoiser is the plain-LPN prox of the wrapped parameters.
  Vec f = potential_and_gradient(direct_program(base), base.params.set, t).grad;
  for (std::size_t i = 0; i < n; ++i) f[i] = sd * f[i] + mean;
  return f;
}

}  // namespace aelpn
