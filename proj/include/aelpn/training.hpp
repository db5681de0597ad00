#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "aelpn/potential.hpp"

namespace aelpn {

enum class PretrainLoss { kL1, kL2 };

struct TrainConfig {
  double sigma_noise = 0.1;
  std::size_t batch_size = 32;
  std::size_t pretrain_steps = 0;   // l1/l2 warmup
  std::size_t match_steps = 0;      // proximal matching, lr_match
  std::size_t match_tail_steps = 0; // optional second matching segment
  double lr_pretrain = 1e-3;
  double lr_match = 1e-3;
  double lr_match_tail = 1e-4;
  double gamma0 = 1.0;
  std::size_t gamma_halve_every = 0;  // 0 = hold gamma fixed
  double gamma_min = 0.0;             // defaulted to 1e-3 * gamma0 when 0
  std::uint64_t seed = 0;
  PretrainLoss loss_pretrain = PretrainLoss::kL1;
  std::size_t log_every = 100;

  void validate() const;
};

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState adam_init(const ParamSet& like);

// One bias-corrected Adam update, in place. Deterministic.
void adam_step(ParamSet& theta, const ParamSet& grads, AdamState& st,
               double lr);

// Batch losses over equal-length vectors.
double l1_loss(const Vec& x_hat, const Vec& x);           // mean |r|
double l2_loss(const Vec& x_hat, const Vec& x);           // mean r^2 / 2
// 1 - (pi g^2)^{-n/2} exp(-|r|^2/g^2), normalizer kept in log space.
double prox_matching_loss(const Vec& x_hat, const Vec& x, double gamma);

// Matching-phase schedule: gamma0 halved every gamma_halve_every steps,
// floored at gamma_min (default 1e-3 * gamma0).
double gamma_at(std::size_t step, const TrainConfig& cfg);

struct TrainHistoryRow {
  std::size_t step = 0;
  double loss = 0.0;
  double gamma = 0.0;
  double lr = 0.0;
  char phase = 'p';  // 'p' pretrain, 'm' matching
};

struct TrainHistory {
  std::vector<TrainHistoryRow> rows;
  std::size_t steps_run = 0;
  double final_loss = 0.0;
};

// Draws one clean sample; consumes the passed generator deterministically.
using SampleSource = std::function<Vec(Rng&)>;

// Two-phase loop: pretrain on l1/l2, then proximal matching with the gamma
// schedule and an optional lower-lr tail (Adam state carries across all
// phases). Per step: fresh batch, fresh noise, parameter gradients through
// the prox map, Adam update, weight projection. Bit-reproducible per seed.
// Throws NumericalError if the loss goes non-finite, naming the step.
TrainHistory train(ProxModel& model, const SampleSource& data,
                   const TrainConfig& cfg);

}  // namespace aelpn
