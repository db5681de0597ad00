#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aelpn/checkpoint.hpp"
#include "aelpn/data_pipeline.hpp"
#include "aelpn/potential.hpp"
#include "aelpn/training.hpp"

namespace aelpn {

struct CommonOpts {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool json = false;
};

// ---- split-normal study ----------------------------------------------------

struct SplitNormalOpts {
  std::string variant = "ae";  // lpn | scale | shift | ae | normtrick
  double sigma = 1.0;
  double gamma = 0.1;
  double alpha = 1e-2;
  // Large batches matter here: at gamma = 0.1 most residuals saturate the
  // matching loss, so only a small fraction of each batch carries gradient.
  std::size_t batch_size = 1024;
  std::size_t pretrain_steps = 1000;
  std::size_t match_steps = 10000;
  std::size_t match_tail_steps = 10000;
  double lr_pretrain = 1e-3;
  double lr_match = 1e-3;
  // The tail polishes at fixed gamma; Adam's stationary noise ball scales
  // with the rate, and 1e-4 leaves slope errors of the same order as the
  // recovery tolerance.
  double lr_match_tail = 1e-5;
};

// Trains on SN(0, 1, 2) with Gaussian corruption and writes
// splitnormal_<variant>.ckpt plus a report over the grid x in [-4, 4] step
// 0.05 with learned/oracle prox, the potential, and (when invertible) the
// implicit regularizer. In one dimension the affine-equivariant construction
// collapses to the identity map, so `ae` runs the scale-equivariant
// construction (which is what affine equivariance means at n = 1 with the
// mean channel being all of the space).
int cmd_train_splitnormal(const CommonOpts& g, const SplitNormalOpts& o);

// ---- patch denoiser ---------------------------------------------------------

struct DenoiserOpts {
  std::string variant = "ae";
  bool synthetic = false;
  std::string data_dir;
  double sigma = 0.1;
  double alpha = 1e-2;
  std::size_t patch = 16;
  std::size_t batch_size = 32;
  std::size_t pretrain_steps = 5000;
  std::size_t match_steps = 5000;
  // 0 = per-variant default: 3e-3/1e-4 for the unconstrained net, 1e-5/1e-5
  // for the equivariant ones (which need gentler steps to keep the
  // constrained weights useful).
  double lr_pretrain = 0.0;
  double lr_match = 0.0;
  double gamma0 = 0.0;  // 0 = 0.64 * sqrt(n)
  std::size_t gamma_halve_every = 1250;
  std::string tag;  // checkpoint filename tag; defaults to the variant
};

int cmd_train_denoiser(const CommonOpts& g, const DenoiserOpts& o);

// ---- evaluations ------------------------------------------------------------

struct EvalOpts {
  std::vector<std::string> checkpoints;
  bool synthetic = false;
  std::string data_dir;
  std::vector<double> sigmas = {0.05, 0.1, 0.2, 0.3, 0.4};  // noise sweep
  std::vector<double> alphas = {0.1, 0.2, 0.3, 0.4, 0.5,
                                0.6, 0.7, 0.8, 0.9, 1.0};   // affine sweep
  double sigma_input = 0.1;  // corruption applied before the affine sweep
  std::size_t patches = 200;
};

// Mean denoising PSNR per (model, sigma) over seeded patches; includes an
// identity (noisy-input) baseline row per sigma.
int cmd_eval_noise_sweep(const CommonOpts& g, const EvalOpts& o);

// Equivariance PSNR between f(g(y)) and g(f(y)) for g(x) = a x + (1 - a) 1.
int cmd_eval_affine(const CommonOpts& g, const EvalOpts& o);

// ---- audits and inversion ---------------------------------------------------

struct AuditOpts {
  std::string checkpoint;
  std::size_t convexity_pairs = 10000;
  std::size_t homogeneity_draws = 1000;
  std::size_t equivariance_samples = 50;
  std::size_t jacobian_points = 20;
};

// Constraint, homogeneity, convexity, equivariance, Jacobian-symmetry and
// prox-objective audits; one pass/fail row each with the measured maximum.
int cmd_audit(const CommonOpts& g, const AuditOpts& o);

struct InvertOpts {
  std::string checkpoint;
  double grid_lo = -2.0;
  double grid_hi = 2.0;
  double grid_step = 0.05;
  double alpha_override = -1.0;  // < 0 = keep the checkpoint's alpha
  double tol = 1e-8;
  std::size_t max_iter = 20000;
};

// Evaluates the implicit regularizer on a 1-D grid (scalar models); each row
// carries the inversion residual and iteration count.
int cmd_invert(const CommonOpts& g, const InvertOpts& o);

// ---- shared helpers (exposed for tests) --------------------------------------

VariantKind variant_from_flag(const std::string& name, std::size_t n);
std::vector<ImageGrid> synthetic_bank(std::size_t count, std::size_t size,
                                      Rng rng);
std::vector<ImageGrid> load_image_dir(const std::string& dir);
std::string checkpoint_path(const CommonOpts& g, const std::string& stem);

}  // namespace aelpn
