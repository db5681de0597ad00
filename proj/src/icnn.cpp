#include "aelpn/icnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aelpn {

IcnnConfig IcnnConfig::plain_preset(std::size_t n,
                                    std::vector<std::size_t> widths) {
  IcnnConfig c;
  c.input_dim = n;
  c.hidden_widths = std::move(widths);
  c.activation = Activation::kSoftplus;
  c.use_bias = true;
  c.final_rectify_square = false;
  c.validate();
  return c;
}

IcnnConfig IcnnConfig::equivariant_preset(std::size_t n,
                                          std::vector<std::size_t> widths,
                                          bool sortpool) {
  IcnnConfig c;
  c.input_dim = n;
  c.hidden_widths = std::move(widths);
  c.activation = sortpool ? Activation::kSortPool : Activation::kPairwiseMax;
  c.use_bias = false;
  c.final_rectify_square = true;
  c.validate();
  return c;
}

std::vector<std::size_t> IcnnConfig::default_widths(std::size_t n) {
  if (n == 1) return {16, 16};
  return {128, 128};
}

std::size_t IcnnConfig::act_out(std::size_t width) const {
  return activation == Activation::kPairwiseMax ? width / 2 : width;
}

bool IcnnConfig::equivariant_preset_ok() const {
  return !use_bias && final_rectify_square &&
         (activation == Activation::kPairwiseMax ||
          activation == Activation::kSortPool);
}

void IcnnConfig::validate() const {
  if (input_dim == 0) throw std::invalid_argument("icnn: input_dim must be >= 1");
  if (hidden_widths.empty()) {
    throw std::invalid_argument("icnn: at least one hidden layer required");
  }
  const bool pairing = activation != Activation::kSoftplus;
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw std::invalid_argument("icnn: zero hidden width");
    if (pairing && w % 2 != 0) {
      throw std::invalid_argument("icnn: pairing activations need even widths");
    }
  }
  if (activation == Activation::kSoftplus && !(beta > 0.0)) {
    throw std::invalid_argument("icnn: softplus beta must be > 0");
  }
}

IcnnParams icnn_layout(const IcnnConfig& cfg) {
  cfg.validate();
  const std::size_t L = cfg.layer_count();
  IcnnParams p;
  p.wz.assign(L + 1, -1);
  p.wx.assign(L + 1, -1);
  p.b.assign(L + 1, -1);

  auto add_slot = [&](std::size_t r, std::size_t c, bool constrained) {
    p.set.slots.push_back(Tensor::matrix(r, c));
    p.nonneg.push_back(constrained ? 1 : 0);
    return static_cast<int>(p.set.slots.size()) - 1;
  };

  std::size_t z_dim = 0;
  for (std::size_t k = 0; k <= L; ++k) {
    const std::size_t out = (k < L) ? cfg.hidden_widths[k] : 1;
    if (k > 0) p.wz[k] = add_slot(out, z_dim, true);
    if (k == 0 || cfg.x_skip) p.wx[k] = add_slot(out, cfg.input_dim, false);
    if (cfg.use_bias) p.b[k] = add_slot(out, 1, false);
    z_dim = (k < L) ? cfg.act_out(out) : 1;
  }
  return p;
}

IcnnParams icnn_init(const IcnnConfig& cfg, Rng& rng) {
  IcnnParams p = icnn_layout(cfg);
  const std::size_t L = cfg.layer_count();
  for (std::size_t k = 0; k <= L; ++k) {
    if (p.wz[k] >= 0) {
      Tensor& t = p.set.slots[p.wz[k]];
      const double hi = 2.0 / static_cast<double>(t.cols);
      for (double& v : t.data) v = rng.uniform(0.0, hi);
    }
    if (p.wx[k] >= 0) {
      Tensor& t = p.set.slots[p.wx[k]];
      const double s = 1.0 / std::sqrt(static_cast<double>(t.cols));
      for (double& v : t.data) v = rng.uniform(-s, s);
    }
    // biases stay zero
  }
  return p;
}

int icnn_program(Tape& t, int x, const IcnnConfig& cfg, const IcnnParams& p) {
  const std::size_t L = cfg.layer_count();
  int z = -1;
  for (std::size_t k = 0; k <= L; ++k) {
    int pre;
    if (k == 0) {
      pre = t.affine(p.wx[0], p.b[0], x);
    } else {
      pre = t.affine(p.wz[k], p.b[k], z);
      if (p.wx[k] >= 0) {
        pre = t.combine(1.0, pre, 1.0, t.affine(p.wx[k], -1, x));
      }
    }
    if (k == L) {
      z = pre;  // scalar head stays affine
      break;
    }
    switch (cfg.activation) {
      case Activation::kSoftplus:
        z = t.softplus(pre, cfg.beta);
        break;
      case Activation::kPairwiseMax:
        z = t.pairwise_max(pre);
        break;
      case Activation::kSortPool:
        z = t.sortpool(pre);
        break;
    }
  }
  return cfg.final_rectify_square ? t.rectify_square(z) : z;
}

double icnn_value(const IcnnConfig& cfg, const IcnnParams& p, const Vec& x) {
  Tape t(&p.set);
  return t.scalar(icnn_program(t, t.input(x), cfg, p));
}

Vec pairwise_max(const Vec& v) {
  if (v.size() % 2 != 0) {
    throw std::invalid_argument("pairwise_max: even length required");
  }
  Vec out(v.size() / 2);
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = std::max(v[2 * j], v[2 * j + 1]);
  }
  return out;
}

Vec sortpool(const Vec& v) {
  if (v.size() % 2 != 0) {
    throw std::invalid_argument("sortpool: even length required");
  }
  Vec out(v.size());
  for (std::size_t j = 0; j < v.size() / 2; ++j) {
    out[2 * j] = std::max(v[2 * j], v[2 * j + 1]);
    out[2 * j + 1] = std::min(v[2 * j], v[2 * j + 1]);
  }
  return out;
}

void project_weights(IcnnParams& p) {
  for (std::size_t s = 0; s < p.set.slots.size(); ++s) {
    if (!p.nonneg[s]) continue;
    for (double& v : p.set.slots[s].data) v = std::max(v, 0.0);
  }
}

double min_constrained_entry(const IcnnParams& p) {
  double lo = 0.0;
  bool seen = false;
  for (std::size_t s = 0; s < p.set.slots.size(); ++s) {
    if (!p.nonneg[s]) continue;
    for (double v : p.set.slots[s].data) {
      lo = seen ? std::min(lo, v) : v;
      seen = true;
    }
  }
  return lo;
}

}  // namespace aelpn
