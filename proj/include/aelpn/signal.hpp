#pragma once

#include <cstddef>
#include <vector>

namespace aelpn {

using Vec = std::vector<double>;

// An n-vector of doubles, the universal sample type. Construction rejects
// NaN/Inf entries; image-role signals use the [0,1] convention with peak 1.0.
struct Signal {
  Vec v;

  Signal() = default;
  explicit Signal(Vec values);  // throws std::invalid_argument on non-finite

  std::size_t size() const { return v.size(); }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  static Signal zeros(std::size_t n) { return Signal(Vec(n, 0.0)); }
};

bool all_finite(const Vec& v);

}  // namespace aelpn
