#pragma once

#include <cstddef>
#include <vector>

#include "aelpn/signal.hpp"

namespace aelpn {

// Dense row-major tensor of rank 1 or 2. Vectors are rows x 1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 1;
  Vec data;

  static Tensor matrix(std::size_t r, std::size_t c) {
    Tensor t;
    t.rows = r;
    t.cols = c;
    t.data.assign(r * c, 0.0);
    return t;
  }
  static Tensor vector(std::size_t n) { return matrix(n, 1); }

  std::size_t size() const { return data.size(); }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Ordered parameter slots; doubles as the gradient accumulator layout.
struct ParamSet {
  std::vector<Tensor> slots;

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& t : slots) n += t.size();
    return n;
  }
};

// Same shapes as `p`, all zeros.
ParamSet zeros_like(const ParamSet& p);

// dst += c * src, slotwise. Shapes must match.
void axpy(ParamSet& dst, double c, const ParamSet& src);

// Multiply every entry by c.
void scale(ParamSet& p, double c);

}  // namespace aelpn
