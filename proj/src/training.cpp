#include "aelpn/training.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "aelpn/errors.hpp"

namespace aelpn {

void TrainConfig::validate() const {
  if (sigma_noise < 0.0) throw std::invalid_argument("train: sigma < 0");
  if (batch_size == 0) throw std::invalid_argument("train: batch_size 0");
  if (!(lr_pretrain > 0.0) || !(lr_match > 0.0) || !(lr_match_tail > 0.0)) {
    throw std::invalid_argument("train: learning rates must be > 0");
  }
  if (!(gamma0 > 0.0)) throw std::invalid_argument("train: gamma0 must be > 0");
  if (gamma_min > gamma0) {
    throw std::invalid_argument("train: gamma_min > gamma0");
  }
  if (log_every == 0) throw std::invalid_argument("train: log_every 0");
}

AdamState adam_init(const ParamSet& like) {
  AdamState st;
  st.m = zeros_like(like);
  st.v = zeros_like(like);
  return st;
}

void adam_step(ParamSet& theta, const ParamSet& grads, AdamState& st,
               double lr) {
  if (theta.slots.size() != grads.slots.size()) {
    throw std::invalid_argument("adam_step: slot count mismatch");
  }
  st.t += 1;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t s = 0; s < theta.slots.size(); ++s) {
    Vec& th = theta.slots[s].data;
    const Vec& g = grads.slots[s].data;
    Vec& m = st.m.slots[s].data;
    Vec& v = st.v.slots[s].data;
    if (th.size() != g.size()) {
      throw std::invalid_argument("adam_step: slot shape mismatch");
    }
    for (std::size_t i = 0; i < th.size(); ++i) {
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
      th[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + st.eps);
    }
  }
}

double l1_loss(const Vec& x_hat, const Vec& x) {
  if (x_hat.size() != x.size()) throw std::invalid_argument("l1: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::fabs(x_hat[i] - x[i]);
  return s / static_cast<double>(x.size());
}

double l2_loss(const Vec& x_hat, const Vec& x) {
  if (x_hat.size() != x.size()) throw std::invalid_argument("l2: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x_hat[i] - x[i];
    s += r * r;
  }
  return 0.5 * s / static_cast<double>(x.size());
}

double prox_matching_loss(const Vec& x_hat, const Vec& x, double gamma) {
  if (x_hat.size() != x.size()) {
    throw std::invalid_argument("prox_matching: length mismatch");
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("prox_matching: gamma <= 0");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x_hat[i] - x[i];
    s += r * r;
  }
  const double logz = 0.5 * static_cast<double>(x.size()) *
                      std::log(std::numbers::pi * gamma * gamma);
  return -std::expm1(-s / (gamma * gamma) - logz);
}

double gamma_at(std::size_t step, const TrainConfig& cfg) {
  const double floor_val = cfg.gamma_min > 0.0 ? cfg.gamma_min : 1e-3 * cfg.gamma0;
  if (cfg.gamma_halve_every == 0) return std::max(cfg.gamma0, floor_val);
  const double halvings = static_cast<double>(step / cfg.gamma_halve_every);
  return std::max(cfg.gamma0 * std::pow(2.0, -halvings), floor_val);
}

TrainHistory train(ProxModel& model, const SampleSource& data,
                   const TrainConfig& cfg) {
  cfg.validate();
  model.validate();
  const ProgramBuilder prog = potential_program(model);
  AdamState st = adam_init(model.params.set);

  Rng root(cfg.seed);
  Rng data_rng = root.stream(Stream::kData);
  Rng noise_rng = root.stream(Stream::kNoise);

  const std::size_t total =
      cfg.pretrain_steps + cfg.match_steps + cfg.match_tail_steps;
  TrainHistory hist;
  std::vector<BatchPair> batch(cfg.batch_size);

  for (std::size_t step = 0; step < total; ++step) {
    const bool pretrain = step < cfg.pretrain_steps;
    const std::size_t match_step = pretrain ? 0 : step - cfg.pretrain_steps;
    double lr;
    LossSpec loss;
    if (pretrain) {
      lr = cfg.lr_pretrain;
      loss.kind = cfg.loss_pretrain == PretrainLoss::kL1 ? LossKind::kL1
                                                         : LossKind::kL2;
    } else {
      lr = match_step < cfg.match_steps ? cfg.lr_match : cfg.lr_match_tail;
      loss.kind = LossKind::kProxMatch;
      loss.gamma = gamma_at(match_step, cfg);
      loss.normalized = false;
    }

    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      batch[i].x = data(data_rng);
      batch[i].y = batch[i].x;
      for (double& v : batch[i].y) v += cfg.sigma_noise * noise_rng.gaussian();
    }

    const LossGradResult res =
        loss_parameter_gradient(prog, model.params.set, batch, loss);
    if (!std::isfinite(res.mean_loss)) {
      std::ostringstream msg;
      msg << "train: non-finite loss at step " << step;
      throw NumericalError(msg.str());
    }
    adam_step(model.params.set, res.grads, st, lr);
    project_weights(model.params);

    if (step % cfg.log_every == 0 || step + 1 == total) {
      hist.rows.push_back({step, res.mean_loss,
                           pretrain ? 0.0 : loss.gamma, lr,
                           pretrain ? 'p' : 'm'});
    }
    hist.final_loss = res.mean_loss;
  }
  hist.steps_run = total;
  return hist;
}

}  // namespace aelpn
