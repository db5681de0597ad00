#include "aelpn/core_math.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace aelpn {

Signal::Signal(Vec values) : v(std::move(values)) {
  if (v.empty()) throw std::invalid_argument("Signal: dimension must be >= 1");
  if (!all_finite(v)) throw std::invalid_argument("Signal: non-finite entry");
}

bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Signal mean_project(const Signal& x) {
  double s = 0.0;
  for (double xi : x.v) s += xi;
  const double m = s / static_cast<double>(x.size());
  return Signal(Vec(x.size(), m));
}

Signal center(const Signal& x) {
  double s = 0.0;
  for (double xi : x.v) s += xi;
  const double m = s / static_cast<double>(x.size());
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - m;
  return Signal(std::move(out));
}

Signal affine_transform(const Signal& x, double a, double b) {
  if (!(a > 0.0)) {
    throw std::invalid_argument("affine_transform: scale must be positive");
  }
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b;
  return Signal(std::move(out));
}

double psnr(const Signal& x, const Signal& y, double peak) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("psnr: length mismatch");
  }
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCapDb;
  return 10.0 * std::log10(peak * peak / mse);
}

Signal gaussian_corrupt(const Signal& x, double sigma, Rng& rng) {
  if (sigma < 0.0) {
    throw std::invalid_argument("gaussian_corrupt: sigma must be >= 0");
  }
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] + sigma * rng.gaussian();
  }
  return Signal(std::move(out));
}

SplitNormalParams::SplitNormalParams(double mu_, double s1, double s2)
    : mu(mu_), sigma1(s1), sigma2(s2) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) {
    throw std::invalid_argument("SplitNormalParams: scales must be > 0");
  }
}

double split_normal_sample(const SplitNormalParams& p, Rng& rng) {
  const double left_mass = p.sigma1 / (p.sigma1 + p.sigma2);
  const double u = rng.uniform();
  const double half = std::fabs(rng.gaussian());
  if (u < left_mass) return p.mu - p.sigma1 * half;
  return p.mu + p.sigma2 * half;
}

double split_normal_prox_oracle(double x, double lambda,
                                const SplitNormalParams& p) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("split_normal_prox_oracle: lambda must be > 0");
  }
  const double s2 = (x < p.mu) ? p.sigma1 * p.sigma1 : p.sigma2 * p.sigma2;
  return (lambda * p.mu + s2 * x) / (lambda + s2);
}

double split_normal_neglogpdf(double x, const SplitNormalParams& p) {
  const double s = (x < p.mu) ? p.sigma1 : p.sigma2;
  const double r = (x - p.mu) / s;
  const double log_norm =
      0.5 * std::log(2.0) - 0.5 * std::log(std::numbers::pi) -
      std::log(p.sigma1 + p.sigma2);
  return 0.5 * r * r - log_norm;
}

}  // namespace aelpn
