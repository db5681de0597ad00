#include "aelpn/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <sstream>

#include "aelpn/core_math.hpp"
#include "aelpn/errors.hpp"
#include "aelpn/prox_analysis.hpp"
#include "aelpn/reports.hpp"
#include "aelpn/threading.hpp"

namespace aelpn {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kPatchStreamBase = 0x50000000ULL;

double vec_psnr(const Vec& a, const Vec& b) {
  return psnr(Signal(a), Signal(b), 1.0);
}

std::string stem_of(const std::string& path) {
  return fs::path(path).stem().string();
}

void ensure_out_dir(const CommonOpts& g) {
  std::error_code ec;
  fs::create_directories(g.out_dir, ec);
  if (ec) throw IoError(g.out_dir + ": " + ec.message());
}

void emit_reports(const CommonOpts& g, const std::string& stem,
                  const std::vector<ReportRow>& rows) {
  const fs::path base = fs::path(g.out_dir) / stem;
  write_csv(base.string() + ".csv", rows);
  if (g.json) write_json(base.string() + ".json", rows);
}

// Per-patch generator: clean patch plus a unit noise draw, both a pure
// function of (seed, patch index) so models and noise levels see identical
// data.
struct PatchDraw {
  Vec clean;
  Vec noise;  // unit scale; caller multiplies by sigma
};

PatchDraw draw_patch(const std::vector<ImageGrid>& bank, const PatchSpec& spec,
                     const Rng& root, std::size_t index) {
  Rng pr = root.stream(kPatchStreamBase + index);
  PatchDraw d;
  const std::size_t img = pr.uniform_below(bank.size());
  d.clean = sample_patch(bank[img], spec, pr);
  d.noise.resize(d.clean.size());
  for (double& z : d.noise) z = pr.gaussian();
  return d;
}

// Seeded 80/20 split by index shuffle; with a single image both halves share
// it (degenerate but total).
std::pair<std::vector<ImageGrid>, std::vector<ImageGrid>> split_bank(
    std::vector<ImageGrid> all, Rng rng) {
  std::vector<std::size_t> idx(all.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.uniform_below(i)]);
  }
  if (all.size() < 2) return {all, all};
  const std::size_t cut =
      std::max<std::size_t>(1, (all.size() * 4 + 4) / 5);  // ceil(0.8 k), < k
  std::vector<ImageGrid> train, eval;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < cut ? train : eval).push_back(std::move(all[idx[i]]));
  }
  if (eval.empty()) eval.push_back(train.back());
  return {std::move(train), std::move(eval)};
}

std::vector<ImageGrid> eval_bank(const CommonOpts& g, bool synthetic,
                                 const std::string& data_dir) {
  Rng root(g.seed);
  if (!data_dir.empty()) {
    return split_bank(load_image_dir(data_dir), root.stream(Stream::kData))
        .second;
  }
  if (!synthetic) {
    throw UsageError("eval: pass --synthetic or --data <dir>");
  }
  return synthetic_bank(16, 64, root.stream(Stream::kEval));
}

struct LoadedModel {
  std::string tag;
  Checkpoint ck;
};

std::vector<LoadedModel> load_models(const std::vector<std::string>& paths) {
  if (paths.empty()) throw UsageError("eval: at least one checkpoint required");
  std::vector<LoadedModel> out;
  out.reserve(paths.size());
  for (const std::string& p : paths) {
    out.push_back({stem_of(p), load_checkpoint(p)});
  }
  return out;
}

double mean_of(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

VariantKind variant_from_flag(const std::string& name, std::size_t n) {
  if (name == "lpn") return VariantKind::kPlainLpn;
  if (name == "scale") return VariantKind::kScaleEq;
  if (name == "shift") return VariantKind::kShiftEq;
  if (name == "ae") {
    // At n = 1 the mean channel is the whole space and the affine-equivariant
    // construction is the identity map; the scale-equivariant construction is
    // the nontrivial content of affine equivariance in one dimension.
    return n == 1 ? VariantKind::kScaleEq : VariantKind::kAffineEq;
  }
  if (name == "normtrick" || name == "normtrick-base") {
    return VariantKind::kNormTrick;
  }
  throw UsageError("unknown variant '" + name +
                   "' (want lpn|scale|shift|ae|normtrick)");
}

std::vector<ImageGrid> synthetic_bank(std::size_t count, std::size_t size,
                                      Rng rng) {
  SyntheticImageSpec spec;
  spec.size = size;
  std::vector<ImageGrid> bank;
  bank.reserve(count);
  for (std::size_t i = 0; i < count; ++i) bank.push_back(synth_image(spec, rng));
  return bank;
}

std::vector<ImageGrid> load_image_dir(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw IoError(dir + ": not a directory");
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
      files.push_back(entry.path().string());
    }
  }
  if (files.empty()) throw IoError(dir + ": no PGM/PPM images found");
  std::sort(files.begin(), files.end());
  std::vector<ImageGrid> images;
  images.reserve(files.size());
  for (const std::string& f : files) images.push_back(load_pnm(f));
  return images;
}

std::string checkpoint_path(const CommonOpts& g, const std::string& stem) {
  return (fs::path(g.out_dir) / (stem + ".ckpt")).string();
}

int cmd_train_splitnormal(const CommonOpts& g, const SplitNormalOpts& o) {
  ensure_out_dir(g);
  const VariantKind kind = variant_from_flag(o.variant, 1);
  const VariantKind train_kind =
      kind == VariantKind::kNormTrick ? VariantKind::kPlainLpn : kind;

  Rng root(g.seed);
  Rng init_rng = root.stream(Stream::kInit);
  ProxModel model = make_model(train_kind, 1, IcnnConfig::default_widths(1),
                               o.alpha, init_rng);

  TrainConfig cfg;
  cfg.sigma_noise = o.sigma;
  cfg.batch_size = o.batch_size;
  cfg.pretrain_steps = o.pretrain_steps;
  cfg.match_steps = o.match_steps;
  cfg.match_tail_steps = o.match_tail_steps;
  cfg.lr_pretrain = o.lr_pretrain;
  cfg.lr_match = o.lr_match;
  cfg.lr_match_tail = o.lr_match_tail;
  cfg.gamma0 = o.gamma;
  cfg.gamma_halve_every = 0;  // held fixed for the scalar study
  cfg.seed = g.seed;

  const SplitNormalParams dist(0.0, 1.0, 2.0);
  const SampleSource source = [&dist](Rng& r) {
    return Vec{split_normal_sample(dist, r)};
  };
  const TrainHistory hist = train(model, source, cfg);

  model.variant.kind = kind;  // normtrick stores its wrapper kind
  Checkpoint ck;
  ck.model = std::move(model);
  ck.train_cfg = cfg;
  ck.steps_run = hist.steps_run;
  ck.final_loss = hist.final_loss;
  const std::string stem = "splitnormal_" + o.variant;
  save_checkpoint(checkpoint_path(g, stem), ck);

  // Plot-ready grid: prox, potential and (when invertible) the regularizer.
  const double lambda = o.sigma * o.sigma;
  const bool has_potential = kind != VariantKind::kNormTrick;
  const bool invertible = has_potential && o.alpha > 0.0;
  InversionSettings inv;
  inv.max_iter = 20000;
  std::vector<ReportRow> rows;
  for (int i = -80; i <= 80; ++i) {
    const double x = 0.05 * i;
    const Vec xv{x};
    rows.push_back({"splitnormal", o.variant, "x", x, "learned_prox",
                    prox_apply(ck.model, xv)[0]});
    rows.push_back({"splitnormal", o.variant, "x", x, "oracle_prox",
                    split_normal_prox_oracle(x, lambda, dist)});
    if (has_potential) {
      rows.push_back({"splitnormal", o.variant, "x", x, "potential",
                      potential_value(ck.model, xv)});
    }
    if (invertible) {
      rows.push_back({"splitnormal", o.variant, "x", x, "regularizer",
                      regularizer_eval(ck.model, xv, inv)});
    }
  }
  emit_reports(g, stem, rows);
  return kExitOk;
}

int cmd_train_denoiser(const CommonOpts& g, const DenoiserOpts& o) {
  ensure_out_dir(g);
  const std::size_t n = o.patch * o.patch;
  const VariantKind kind = variant_from_flag(o.variant, n);
  const VariantKind train_kind =
      kind == VariantKind::kNormTrick ? VariantKind::kPlainLpn : kind;

  Rng root(g.seed);
  std::shared_ptr<std::vector<ImageGrid>> bank;
  if (!o.data_dir.empty()) {
    bank = std::make_shared<std::vector<ImageGrid>>(
        split_bank(load_image_dir(o.data_dir), root.stream(Stream::kData))
            .first);
  } else if (o.synthetic) {
    bank = std::make_shared<std::vector<ImageGrid>>(
        synthetic_bank(48, 64, root.stream(Stream::kData)));
  } else {
    throw UsageError("train-denoiser: pass --synthetic or --data <dir>");
  }

  Rng init_rng = root.stream(Stream::kInit);
  ProxModel model = make_model(train_kind, n, IcnnConfig::default_widths(n),
                               o.alpha, init_rng);

  // The unconstrained net tolerates (and needs) far larger steps than the
  // equivariant ones, whose nonnegative weights sit near the projection
  // boundary.
  const bool gentle = train_kind != VariantKind::kPlainLpn;
  TrainConfig cfg;
  cfg.sigma_noise = o.sigma;
  cfg.batch_size = o.batch_size;
  cfg.pretrain_steps = o.pretrain_steps;
  cfg.match_steps = o.match_steps;
  cfg.lr_pretrain = o.lr_pretrain > 0.0 ? o.lr_pretrain : (gentle ? 1e-5 : 3e-3);
  cfg.lr_match = o.lr_match > 0.0 ? o.lr_match : (gentle ? 1e-5 : 1e-4);
  cfg.gamma0 = o.gamma0 > 0.0 ? o.gamma0
                              : 0.64 * std::sqrt(static_cast<double>(n));
  cfg.gamma_halve_every = o.gamma_halve_every;
  cfg.seed = g.seed;

  const PatchSpec spec{o.patch, o.patch};
  const SampleSource source = [bank, spec](Rng& r) {
    return sample_patch((*bank)[r.uniform_below(bank->size())], spec, r);
  };
  const TrainHistory hist = train(model, source, cfg);

  model.variant.kind = kind;
  Checkpoint ck;
  ck.model = std::move(model);
  ck.train_cfg = cfg;
  ck.steps_run = hist.steps_run;
  ck.final_loss = hist.final_loss;
  const std::string stem =
      "denoiser_" + (o.tag.empty() ? o.variant : o.tag);
  save_checkpoint(checkpoint_path(g, stem), ck);

  std::vector<ReportRow> rows;
  for (const TrainHistoryRow& r : hist.rows) {
    rows.push_back({"train_history", stem,
                    r.phase == 'p' ? "pretrain_step" : "match_step",
                    static_cast<double>(r.step), "loss", r.loss});
  }
  emit_reports(g, stem + "_history", rows);
  return kExitOk;
}

int cmd_eval_noise_sweep(const CommonOpts& g, const EvalOpts& o) {
  ensure_out_dir(g);
  const std::vector<LoadedModel> models = load_models(o.checkpoints);
  const std::vector<ImageGrid> bank = eval_bank(g, o.synthetic, o.data_dir);
  const Rng root(g.seed);

  const std::size_t n = models.front().ck.model.config.input_dim;
  const std::size_t side = static_cast<std::size_t>(std::lround(std::sqrt(
      static_cast<double>(n))));
  if (side * side != n) {
    throw UsageError("noise sweep: checkpoint input_dim is not a square patch");
  }
  const PatchSpec spec{side, side};

  std::vector<ReportRow> rows;
  for (double sigma : o.sigmas) {
    Vec noisy_psnr(o.patches);
    parallel_for(o.patches, [&](std::size_t i) {
      const PatchDraw d = draw_patch(bank, spec, root, i);
      Vec y = d.clean;
      for (std::size_t j = 0; j < y.size(); ++j) y[j] += sigma * d.noise[j];
      noisy_psnr[i] = vec_psnr(y, d.clean);
    });
    rows.push_back({"noise_sweep", "noisy-input", "sigma", sigma, "psnr",
                    mean_of(noisy_psnr)});
  }

  for (const LoadedModel& m : models) {
    if (m.ck.model.config.input_dim != n) {
      throw UsageError(m.tag + ": input_dim differs across checkpoints");
    }
    for (double sigma : o.sigmas) {
      Vec scores(o.patches);
      parallel_for(o.patches, [&](std::size_t i) {
        const PatchDraw d = draw_patch(bank, spec, root, i);
        Vec y = d.clean;
        for (std::size_t j = 0; j < y.size(); ++j) y[j] += sigma * d.noise[j];
        scores[i] = vec_psnr(prox_apply(m.ck.model, y), d.clean);
      });
      rows.push_back(
          {"noise_sweep", m.tag, "sigma", sigma, "psnr", mean_of(scores)});
    }
  }
  emit_reports(g, "noise_sweep", rows);
  return kExitOk;
}

int cmd_eval_affine(const CommonOpts& g, const EvalOpts& o) {
  ensure_out_dir(g);
  const std::vector<LoadedModel> models = load_models(o.checkpoints);
  const std::vector<ImageGrid> bank = eval_bank(g, o.synthetic, o.data_dir);
  const Rng root(g.seed);

  std::vector<ReportRow> rows;
  for (const LoadedModel& m : models) {
    const std::size_t n = m.ck.model.config.input_dim;
    const std::size_t side = static_cast<std::size_t>(std::lround(std::sqrt(
        static_cast<double>(n))));
    if (side * side != n) {
      throw UsageError(m.tag + ": checkpoint input_dim is not a square patch");
    }
    const PatchSpec spec{side, side};
    for (double a : o.alphas) {
      const double b = 1.0 - a;  // brightness-style transform fixing white
      Vec scores(o.patches);
      parallel_for(o.patches, [&](std::size_t i) {
        const PatchDraw d = draw_patch(bank, spec, root, i);
        Vec y = d.clean;
        for (std::size_t j = 0; j < n; ++j) {
          y[j] += o.sigma_input * d.noise[j];
        }
        Vec gy(n);
        for (std::size_t j = 0; j < n; ++j) gy[j] = a * y[j] + b;
        const Vec f_of_gy = prox_apply(m.ck.model, gy);
        Vec g_of_fy = prox_apply(m.ck.model, y);
        for (double& v : g_of_fy) v = a * v + b;
        scores[i] = vec_psnr(f_of_gy, g_of_fy);
      });
      rows.push_back(
          {"affine_sweep", m.tag, "alpha", a, "psnr", mean_of(scores)});
    }
  }
  emit_reports(g, "affine_sweep", rows);
  return kExitOk;
}

int cmd_audit(const CommonOpts& g, const AuditOpts& o) {
  ensure_out_dir(g);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const ProxModel& model = ck.model;
  const std::string tag = stem_of(o.checkpoint);
  const std::size_t n = model.config.input_dim;
  const bool is_normtrick = model.variant.kind == VariantKind::kNormTrick;
  Rng root(g.seed);
  Rng audit_rng = root.stream(Stream::kAudit);

  std::vector<ReportRow> rows;
  auto emit = [&](const std::string& name, double threshold, double deviation,
                  std::size_t violations, bool pass) {
    rows.push_back({"audit", tag, name, threshold, "max_deviation", deviation});
    rows.push_back({"audit", tag, name, threshold, "violations",
                    static_cast<double>(violations)});
    rows.push_back({"audit", tag, name, threshold, "pass", pass ? 1.0 : 0.0});
  };

  {
    const double lo = min_constrained_entry(model.params);
    emit("nonneg_constraint", 0.0, std::max(0.0, -lo), lo < 0.0 ? 1 : 0,
         lo >= 0.0);
  }

  if (model.config.equivariant_preset_ok()) {
    // Premises of the equivariant construction: 2-homogeneous value,
    // 1-homogeneous gradient.
    const PotentialFun f = model_potential_fun(model);
    const double scales[4] = {0.1, 0.5, 2.0, 10.0};
    double dev_val = 0.0, dev_grad = 0.0;
    for (std::size_t i = 0; i < o.homogeneity_draws; ++i) {
      Vec x(n);
      const double sc = (i % 3 == 0) ? 0.1 : (i % 3 == 1 ? 1.0 : 10.0);
      for (double& v : x) v = sc * audit_rng.gaussian();
      const ValueGrad base = f(x);
      double gref = 0.0;
      for (double v : base.grad) gref = std::max(gref, std::fabs(v));
      for (double a : scales) {
        Vec ax(n);
        for (std::size_t j = 0; j < n; ++j) ax[j] = a * x[j];
        const ValueGrad scaled = f(ax);
        dev_val = std::max(dev_val,
                           std::fabs(scaled.value - a * a * base.value) /
                               (a * a * (1.0 + std::fabs(base.value))));
        double gdev = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          gdev = std::max(gdev, std::fabs(scaled.grad[j] - a * base.grad[j]));
        }
        dev_grad = std::max(dev_grad, gdev / (a * (1.0 + gref)));
      }
    }
    emit("value_2homogeneity", 1e-8, dev_val, 0, dev_val <= 1e-8);
    emit("gradient_1homogeneity", 1e-7, dev_grad, 0, dev_grad <= 1e-7);
  }

  if (!is_normtrick) {
    const AuditReport conv = convexity_audit(model_potential_fun(model), n,
                                             o.convexity_pairs, audit_rng);
    emit("gradient_monotonicity", 1e-8, conv.max_deviation, conv.violations,
         conv.violations == 0);
  }

  {
    std::vector<std::pair<double, double>> grid;
    const bool scale_part = model.variant.kind == VariantKind::kScaleEq ||
                            model.variant.kind == VariantKind::kAffineEq ||
                            is_normtrick;
    const bool shift_part = model.variant.kind == VariantKind::kShiftEq ||
                            model.variant.kind == VariantKind::kAffineEq ||
                            is_normtrick;
    for (double a : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      for (double b : {-0.5, 0.0, 0.5}) {
        if (!scale_part && a != 1.0) continue;
        if (!shift_part && b != 0.0) continue;
        grid.emplace_back(a, b);
      }
    }
    if (!grid.empty() && model.variant.kind != VariantKind::kPlainLpn) {
      const AuditReport eq =
          equivariance_audit(model_prox_map(model), n, grid,
                             o.equivariance_samples, audit_rng);
      emit("claimed_equivariance", 1e-6, eq.max_deviation, eq.violations,
           eq.max_deviation <= 1e-6);
    }
  }

  {
    const AuditReport sym = jacobian_symmetry_audit(
        model_prox_map(model), n, o.jacobian_points, audit_rng);
    emit("jacobian_symmetry", 1e-5, sym.max_deviation, sym.violations,
         sym.violations == 0);
  }

  if (!is_normtrick && model.variant.alpha > 0.0) {
    // Definitional prox check: f(y) beats nearby points on the Moreau
    // objective 0.5|u - y|^2 + R(u).
    InversionSettings inv;
    inv.max_iter = 20000;
    double worst_slack = 0.0;
    std::size_t violations = 0;
    const std::size_t trials = 20, perturbations = 50;
    for (std::size_t i = 0; i < trials; ++i) {
      Vec y(n);
      for (double& v : y) v = audit_rng.gaussian();
      const Vec xh = prox_apply(model, y);
      double obj0 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        obj0 += 0.5 * (xh[j] - y[j]) * (xh[j] - y[j]);
      }
      obj0 += regularizer_eval(model, xh, inv);
      for (std::size_t k = 0; k < perturbations; ++k) {
        Vec p = xh;
        double norm = 0.0;
        Vec delta(n);
        for (double& v : delta) {
          v = audit_rng.gaussian();
          norm += v * v;
        }
        const double scale = audit_rng.uniform(0.0, 0.1) / std::sqrt(norm);
        for (std::size_t j = 0; j < n; ++j) p[j] += scale * delta[j];
        double obj = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          obj += 0.5 * (p[j] - y[j]) * (p[j] - y[j]);
        }
        obj += regularizer_eval(model, p, inv);
        const double slack = obj0 - obj;  // positive = violation
        worst_slack = std::max(worst_slack, slack);
        if (slack > 1e-6) ++violations;
      }
    }
    emit("prox_objective_optimality", 1e-6, worst_slack, violations,
         violations == 0);
  }

  emit_reports(g, "audit_" + tag, rows);
  return kExitOk;
}

int cmd_invert(const CommonOpts& g, const InvertOpts& o) {
  ensure_out_dir(g);
  Checkpoint ck = load_checkpoint(o.checkpoint);
  if (o.alpha_override >= 0.0) ck.model.variant.alpha = o.alpha_override;
  if (ck.model.variant.kind == VariantKind::kNormTrick) {
    throw UsageError("invert: the normalization wrapper is not a prox");
  }
  if (!(ck.model.variant.alpha > 0.0)) {
    throw UsageError("invert: needs strong convexity (alpha > 0 or --alpha)");
  }
  if (!(o.grid_step > 0.0) || o.grid_lo > o.grid_hi) {
    throw UsageError("invert: bad grid");
  }
  const std::size_t n = ck.model.config.input_dim;
  const std::string tag = stem_of(o.checkpoint);

  InversionSettings inv;
  inv.tol = o.tol;
  inv.max_iter = static_cast<int>(o.max_iter);

  std::vector<ReportRow> rows;
  std::size_t failures = 0;
  const long points =
      std::lround(std::floor((o.grid_hi - o.grid_lo) / o.grid_step + 1e-9));
  for (long i = 0; i <= points; ++i) {
    const double x = o.grid_lo + o.grid_step * static_cast<double>(i);
    // scalar grids probe constant signals at higher dimensions
    const Vec point(n, x);
    const InversionInfo info = invert_prox_info(ck.model, point, inv);
    rows.push_back({"invert", tag, "x", x, "converged",
                    info.converged ? 1.0 : 0.0});
    rows.push_back({"invert", tag, "x", x, "residual", info.residual});
    rows.push_back({"invert", tag, "x", x, "iterations",
                    static_cast<double>(info.iterations)});
    if (info.converged) {
      double ip = 0.0, y2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        ip += point[j] * info.y[j];
        y2 += point[j] * point[j];
      }
      const double reg =
          ip - potential_value(ck.model, info.y) - 0.5 * y2;
      rows.push_back({"invert", tag, "x", x, "regularizer", reg});
    } else {
      ++failures;
    }
  }
  emit_reports(g, "invert_" + tag, rows);
  if (failures > 0) {
    std::ostringstream msg;
    msg << "invert: " << failures << " grid points failed to reach tol "
        << o.tol;
    throw NumericalError(msg.str());
  }
  return kExitOk;
}

}  // namespace aelpn
