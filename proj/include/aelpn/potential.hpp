#pragma once

#include "aelpn/icnn.hpp"

namespace aelpn {

enum class VariantKind { kPlainLpn, kScaleEq, kShiftEq, kAffineEq, kNormTrick };

struct PotentialVariant {
  VariantKind kind = VariantKind::kPlainLpn;
  double alpha = 0.0;  // strong-convexity weight; 0 keeps the bare construction
};

// A potential variant together with the network realizing it. The prox is
// always the exact input gradient of potential_value (except NormTrick, which
// is a wrapper and has no potential).
struct ProxModel {
  PotentialVariant variant;
  IcnnConfig config;
  IcnnParams params;

  void validate() const;  // variant/preset compatibility
};

// Builds a freshly initialized model for the given variant at dimension n.
ProxModel make_model(VariantKind kind, std::size_t n,
                     std::vector<std::size_t> widths, double alpha, Rng& rng,
                     bool sortpool = false);

// Tape construction of the variant's potential:
//   PlainLpn:  psi(x)  + (alpha/2)|x|^2
//   ScaleEq:   h(x)    + (alpha/2)|x|^2          (h 2-homogeneous)
//   ShiftEq:   psi(u)  + (alpha/2)|u|^2 + |Px|^2/2,  u = (I-P)x
//   AffineEq:  h(u)    + (alpha/2)|u|^2 + |Px|^2/2
// The mean channel's coefficient is exactly 1 so shifts pass through the
// gradient untouched; alpha sits on the centered argument only.
// The returned builder captures `m` by reference.
ProgramBuilder potential_program(const ProxModel& m);

double potential_value(const ProxModel& m, const Vec& x);

// The exact gradient of potential_value; for NormTrick, the normalization
// wrapper around the inner plain-LPN prox.
Vec prox_apply(const ProxModel& m, const Vec& x);
Vec prox_apply(const ProxModel& m, const Vec& x, Tape& ws);

// std(x) * f((x - mean)/std) + mean over the model's plain prox. Equivariant
// by construction but generally not a gradient field. Near-constant inputs
// (std < 1e-12) pass through unchanged.
Vec norm_trick_apply(const ProxModel& base, const Vec& x);

}  // namespace aelpn
