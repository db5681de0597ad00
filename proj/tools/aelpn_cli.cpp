#include <exception>
#include <iostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "aelpn/commands.hpp"
#include "aelpn/errors.hpp"

namespace {

void add_common(CLI::App* app, aelpn::CommonOpts& g) {
  app->add_option("--seed", g.seed, "root seed for every stream");
  app->add_option("--out", g.out_dir, "output directory for reports")
      ->capture_default_str();
  app->add_flag("--json", g.json, "mirror each CSV report as JSON");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned proximal networks: training, evaluation, audits"};
  app.require_subcommand(1);

  aelpn::CommonOpts g;
  aelpn::SplitNormalOpts sn;
  aelpn::DenoiserOpts dn;
  aelpn::EvalOpts ev_noise;
  aelpn::EvalOpts ev_affine;
  aelpn::AuditOpts au;
  aelpn::InvertOpts iv;

  CLI::App* c_sn = app.add_subcommand(
      "train-splitnormal", "train a scalar denoiser on the split normal");
  add_common(c_sn, g);
  c_sn->add_option("--variant", sn.variant, "lpn|scale|shift|ae|normtrick")
      ->capture_default_str();
  c_sn->add_option("--sigma", sn.sigma, "corruption noise level")
      ->capture_default_str();
  c_sn->add_option("--gamma", sn.gamma, "matching-loss scale (held fixed)")
      ->capture_default_str();
  c_sn->add_option("--alpha", sn.alpha, "strong-convexity weight")
      ->capture_default_str();
  c_sn->add_option("--batch", sn.batch_size)->capture_default_str();
  c_sn->add_option("--pretrain-steps", sn.pretrain_steps)
      ->capture_default_str();
  c_sn->add_option("--match-steps", sn.match_steps)->capture_default_str();
  c_sn->add_option("--match-tail-steps", sn.match_tail_steps)
      ->capture_default_str();
  c_sn->add_option("--lr-pretrain", sn.lr_pretrain)->capture_default_str();
  c_sn->add_option("--lr-match", sn.lr_match)->capture_default_str();
  c_sn->add_option("--lr-match-tail", sn.lr_match_tail)->capture_default_str();

  CLI::App* c_dn = app.add_subcommand("train-denoiser",
                                      "train a patch denoiser on images");
  add_common(c_dn, g);
  c_dn->add_option("--variant", dn.variant, "lpn|scale|shift|ae|normtrick")
      ->capture_default_str();
  c_dn->add_flag("--synthetic", dn.synthetic, "use the built-in image bank");
  c_dn->add_option("--data", dn.data_dir, "directory of PGM/PPM images");
  c_dn->add_option("--sigma", dn.sigma)->capture_default_str();
  c_dn->add_option("--alpha", dn.alpha)->capture_default_str();
  c_dn->add_option("--patch", dn.patch, "patch side length")
      ->capture_default_str();
  c_dn->add_option("--batch", dn.batch_size)->capture_default_str();
  c_dn->add_option("--pretrain-steps", dn.pretrain_steps)
      ->capture_default_str();
  c_dn->add_option("--match-steps", dn.match_steps)->capture_default_str();
  c_dn->add_option("--lr-pretrain", dn.lr_pretrain, "0 = per-variant default")
      ->capture_default_str();
  c_dn->add_option("--lr-match", dn.lr_match, "0 = per-variant default")
      ->capture_default_str();
  c_dn->add_option("--gamma0", dn.gamma0, "0 = 0.64 sqrt(patch dim)")
      ->capture_default_str();
  c_dn->add_option("--gamma-halve-every", dn.gamma_halve_every)
      ->capture_default_str();
  c_dn->add_option("--tag", dn.tag, "checkpoint name tag");

  CLI::App* c_ns = app.add_subcommand("eval-noise-sweep",
                                      "denoising PSNR across noise levels");
  add_common(c_ns, g);
  c_ns->add_option("--checkpoint", ev_noise.checkpoints, "model checkpoints")
      ->required();
  c_ns->add_flag("--synthetic", ev_noise.synthetic);
  c_ns->add_option("--data", ev_noise.data_dir);
  c_ns->add_option("--sigmas", ev_noise.sigmas)->capture_default_str();
  c_ns->add_option("--patches", ev_noise.patches)->capture_default_str();

  CLI::App* c_af = app.add_subcommand(
      "eval-affine", "equivariance PSNR under g(x) = a x + (1 - a)");
  add_common(c_af, g);
  c_af->add_option("--checkpoint", ev_affine.checkpoints, "model checkpoints")
      ->required();
  c_af->add_flag("--synthetic", ev_affine.synthetic);
  c_af->add_option("--data", ev_affine.data_dir);
  c_af->add_option("--alphas", ev_affine.alphas)->capture_default_str();
  c_af->add_option("--sigma-input", ev_affine.sigma_input)
      ->capture_default_str();
  c_af->add_option("--patches", ev_affine.patches)->capture_default_str();

  CLI::App* c_au = app.add_subcommand("audit",
                                      "structural audits of a checkpoint");
  add_common(c_au, g);
  c_au->add_option("--checkpoint", au.checkpoint)->required();
  c_au->add_option("--convexity-pairs", au.convexity_pairs)
      ->capture_default_str();
  c_au->add_option("--homogeneity-draws", au.homogeneity_draws)
      ->capture_default_str();
  c_au->add_option("--equivariance-samples", au.equivariance_samples)
      ->capture_default_str();
  c_au->add_option("--jacobian-points", au.jacobian_points)
      ->capture_default_str();

  CLI::App* c_iv = app.add_subcommand(
      "invert", "recover the implicit regularizer on a grid");
  add_common(c_iv, g);
  c_iv->add_option("--checkpoint", iv.checkpoint)->required();
  c_iv->add_option("--grid-lo", iv.grid_lo)->capture_default_str();
  c_iv->add_option("--grid-hi", iv.grid_hi)->capture_default_str();
  c_iv->add_option("--grid-step", iv.grid_step)->capture_default_str();
  c_iv->add_option("--alpha", iv.alpha_override,
                   "override strong-convexity weight (< 0 keeps stored)")
      ->capture_default_str();
  c_iv->add_option("--tol", iv.tol)->capture_default_str();
  c_iv->add_option("--max-iter", iv.max_iter)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? aelpn::kExitOk : aelpn::kExitUsage;
  }

  try {
    if (c_sn->parsed()) return aelpn::cmd_train_splitnormal(g, sn);
    if (c_dn->parsed()) return aelpn::cmd_train_denoiser(g, dn);
    if (c_ns->parsed()) return aelpn::cmd_eval_noise_sweep(g, ev_noise);
    if (c_af->parsed()) return aelpn::cmd_eval_affine(g, ev_affine);
    if (c_au->parsed()) return aelpn::cmd_audit(g, au);
    if (c_iv->parsed()) return aelpn::cmd_invert(g, iv);
  } catch (const aelpn::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return aelpn::kExitUsage;
  } catch (const aelpn::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return aelpn::kExitNumerical;
  } catch (const aelpn::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return aelpn::kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return aelpn::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return aelpn::kExitNumerical;
  }
  return aelpn::kExitUsage;
}
