#pragma once

#include "aelpn/rng.hpp"
#include "aelpn/signal.hpp"

namespace aelpn {

// Projection onto span{1}: every entry of the result equals mean(x).
Signal mean_project(const Signal& x);

// Mean-free part, x minus its projection onto span{1}.
Signal center(const Signal& x);

// Entrywise a*x_i + b for the positive-scale-and-shift group. a must be > 0.
Signal affine_transform(const Signal& x, double a, double b);

// Peak signal-to-noise ratio in dB. Zero MSE returns the 200 dB cap so that
// reports stay finite and comparable.
inline constexpr double kPsnrCapDb = 200.0;
double psnr(const Signal& x, const Signal& y, double peak);

// y = x + sigma * z with z ~ N(0, I), drawn entrywise from rng.
Signal gaussian_corrupt(const Signal& x, double sigma, Rng& rng);

// Two-sided Gaussian with distinct left/right scales.
struct SplitNormalParams {
  double mu = 0.0;
  double sigma1 = 1.0;
  double sigma2 = 1.0;

  SplitNormalParams() = default;
  SplitNormalParams(double mu_, double s1, double s2);  // validates s1,s2 > 0
};

// Branch with probability sigma1/(sigma1+sigma2), then a half-normal draw on
// the chosen side. Matches the density's left-branch mass exactly.
double split_normal_sample(const SplitNormalParams& p, Rng& rng);

// Closed-form prox of -lambda*log p for the split normal: a piecewise-linear
// map, continuous at mu and scale-equivariant when mu = 0.
double split_normal_prox_oracle(double x, double lambda,
                                const SplitNormalParams& p);

// Exact -log p(x).
double split_normal_neglogpdf(double x, const SplitNormalParams& p);

}  // namespace aelpn
