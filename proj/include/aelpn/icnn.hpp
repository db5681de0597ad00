#pragma once

#include <cstddef>
#include <vector>

#include "aelpn/diff_engine.hpp"
#include "aelpn/rng.hpp"
#include "aelpn/tensor.hpp"

namespace aelpn {

enum class Activation { kSoftplus, kPairwiseMax, kSortPool };

// Architecture of one input-convex potential. hidden_widths are pre-activation
// widths; pairing activations require them even (pairwise-max halves, sortpool
// keeps the width).
struct IcnnConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_widths;
  Activation activation = Activation::kSoftplus;
  double beta = 1.0;  // softplus sharpness
  bool use_bias = true;
  bool x_skip = true;
  bool final_rectify_square = false;

  // Biased softplus net with a bare scalar head (the plain-LPN backbone).
  static IcnnConfig plain_preset(std::size_t n, std::vector<std::size_t> widths);
  // Bias-free 1-homogeneous net with a rectify-squared head, so the scalar
  // output is convex and 2-homogeneous.
  static IcnnConfig equivariant_preset(std::size_t n,
                                       std::vector<std::size_t> widths,
                                       bool sortpool = false);
  // Experiment defaults: (16,16) for the 1-D study, (128,128) for patches.
  static std::vector<std::size_t> default_widths(std::size_t n);

  void validate() const;  // throws std::invalid_argument
  bool equivariant_preset_ok() const;
  std::size_t act_out(std::size_t width) const;
  std::size_t layer_count() const { return hidden_widths.size(); }
};

// Parameter storage plus the slot layout the tape programs index into.
// Layer k < L: wz[k] (absent for k = 0), wx[k], b[k]; index L is the scalar
// head. nonneg marks the hidden-to-hidden slots kept >= 0.
struct IcnnParams {
  ParamSet set;
  std::vector<int> wz;
  std::vector<int> wx;
  std::vector<int> b;
  std::vector<char> nonneg;  // parallel to set.slots
};

// Zero-valued parameters with the slot layout the config implies.
IcnnParams icnn_layout(const IcnnConfig& cfg);

// Wx ~ U(-s, s) with s = 1/sqrt(fan_in); Wz ~ U(0, 2/fan_in); biases zero.
// Draw order is fixed (layers in order, slots row-major) for reproducibility.
IcnnParams icnn_init(const IcnnConfig& cfg, Rng& rng);

// Appends the forward pass to the tape and returns the scalar output node
// (after the rectify-squared head when configured).
int icnn_program(Tape& t, int x, const IcnnConfig& cfg, const IcnnParams& p);

// Convenience single evaluation of the raw potential.
double icnn_value(const IcnnConfig& cfg, const IcnnParams& p, const Vec& x);

// Standalone activations (the tape has its own copies of these).
Vec pairwise_max(const Vec& v);
Vec sortpool(const Vec& v);

// Clamps every constrained slot entrywise at 0. Idempotent.
void project_weights(IcnnParams& p);

// Smallest entry over constrained slots (>= 0 iff the constraint holds).
double min_constrained_entry(const IcnnParams& p);

}  // namespace aelpn
