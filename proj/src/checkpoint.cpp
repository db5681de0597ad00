#include "aelpn/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "aelpn/data_pipeline.hpp"
#include "aelpn/errors.hpp"

namespace aelpn {

namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* variant_name(VariantKind k) {
  switch (k) {
    case VariantKind::kPlainLpn: return "lpn";
    case VariantKind::kScaleEq: return "scale";
    case VariantKind::kShiftEq: return "shift";
    case VariantKind::kAffineEq: return "ae";
    case VariantKind::kNormTrick: return "normtrick";
  }
  return "?";
}

VariantKind parse_variant(const std::string& s) {
  if (s == "lpn") return VariantKind::kPlainLpn;
  if (s == "scale") return VariantKind::kScaleEq;
  if (s == "shift") return VariantKind::kShiftEq;
  if (s == "ae") return VariantKind::kAffineEq;
  if (s == "normtrick") return VariantKind::kNormTrick;
  throw IoError("checkpoint: unknown variant '" + s + "'");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kSoftplus: return "softplus";
    case Activation::kPairwiseMax: return "pairmax";
    case Activation::kSortPool: return "sortpool";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "softplus") return Activation::kSoftplus;
  if (s == "pairmax") return Activation::kPairwiseMax;
  if (s == "sortpool") return Activation::kSortPool;
  throw IoError("checkpoint: unknown activation '" + s + "'");
}

class KvMap {
 public:
  void put(const std::string& k, const std::string& v) { kv_[k] = v; }
  const std::string& get(const std::string& k) const {
    auto it = kv_.find(k);
    if (it == kv_.end()) throw IoError("checkpoint: missing field '" + k + "'");
    return it->second;
  }
  double real(const std::string& k) const { return std::stod(get(k)); }
  std::uint64_t uint(const std::string& k) const { return std::stoull(get(k)); }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  ck.model.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");

  const IcnnConfig& c = ck.model.config;
  const TrainConfig& t = ck.train_cfg;
  out << "aelpn-checkpoint " << ck.format_version << "\n";
  out << "variant " << variant_name(ck.model.variant.kind) << "\n";
  out << "alpha " << fmt_real(ck.model.variant.alpha) << "\n";
  out << "input_dim " << c.input_dim << "\n";
  out << "hidden_widths";
  for (std::size_t w : c.hidden_widths) out << " " << w;
  out << "\n";
  out << "activation " << activation_name(c.activation) << "\n";
  out << "beta " << fmt_real(c.beta) << "\n";
  out << "use_bias " << (c.use_bias ? 1 : 0) << "\n";
  out << "x_skip " << (c.x_skip ? 1 : 0) << "\n";
  out << "final_rectify_square " << (c.final_rectify_square ? 1 : 0) << "\n";
  out << "sigma_noise " << fmt_real(t.sigma_noise) << "\n";
  out << "batch_size " << t.batch_size << "\n";
  out << "pretrain_steps " << t.pretrain_steps << "\n";
  out << "match_steps " << t.match_steps << "\n";
  out << "match_tail_steps " << t.match_tail_steps << "\n";
  out << "lr_pretrain " << fmt_real(t.lr_pretrain) << "\n";
  out << "lr_match " << fmt_real(t.lr_match) << "\n";
  out << "lr_match_tail " << fmt_real(t.lr_match_tail) << "\n";
  out << "gamma0 " << fmt_real(t.gamma0) << "\n";
  out << "gamma_halve_every " << t.gamma_halve_every << "\n";
  out << "gamma_min " << fmt_real(t.gamma_min) << "\n";
  out << "seed " << t.seed << "\n";
  out << "loss_pretrain " << (t.loss_pretrain == PretrainLoss::kL1 ? "l1" : "l2")
      << "\n";
  out << "log_every " << t.log_every << "\n";
  out << "steps_run " << ck.steps_run << "\n";
  out << "final_loss " << fmt_real(ck.final_loss) << "\n";
  out << "tensors " << ck.model.params.set.slots.size() << "\n";
  for (const Tensor& slot : ck.model.params.set.slots) {
    write_raw_tensor(out, slot);
  }
  if (!out) throw IoError(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");

  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  std::istringstream head(line);
  std::string magic;
  int version = 0;
  head >> magic >> version;
  if (magic != "aelpn-checkpoint") throw IoError(path + ": not a checkpoint");
  if (version < 1 || version > Checkpoint::kFormatVersion) {
    std::ostringstream msg;
    msg << path << ": format version " << version
        << " not supported (max " << Checkpoint::kFormatVersion << ")";
    throw IoError(msg.str());
  }

  KvMap kv;
  std::size_t tensor_count = 0;
  while (std::getline(in, line)) {
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw IoError(path + ": malformed header line");
    const std::string key = line.substr(0, sp);
    const std::string val = line.substr(sp + 1);
    if (key == "tensors") {
      tensor_count = std::stoull(val);
      break;
    }
    kv.put(key, val);
  }

  Checkpoint ck;
  ck.format_version = version;
  ck.model.variant.kind = parse_variant(kv.get("variant"));
  ck.model.variant.alpha = kv.real("alpha");

  IcnnConfig c;
  c.input_dim = kv.uint("input_dim");
  {
    std::istringstream ws(kv.get("hidden_widths"));
    std::size_t w;
    while (ws >> w) c.hidden_widths.push_back(w);
  }
  c.activation = parse_activation(kv.get("activation"));
  c.beta = kv.real("beta");
  c.use_bias = kv.uint("use_bias") != 0;
  c.x_skip = kv.uint("x_skip") != 0;
  c.final_rectify_square = kv.uint("final_rectify_square") != 0;
  ck.model.config = c;

  TrainConfig t;
  t.sigma_noise = kv.real("sigma_noise");
  t.batch_size = kv.uint("batch_size");
  t.pretrain_steps = kv.uint("pretrain_steps");
  t.match_steps = kv.uint("match_steps");
  t.match_tail_steps = kv.uint("match_tail_steps");
  t.lr_pretrain = kv.real("lr_pretrain");
  t.lr_match = kv.real("lr_match");
  t.lr_match_tail = kv.real("lr_match_tail");
  t.gamma0 = kv.real("gamma0");
  t.gamma_halve_every = kv.uint("gamma_halve_every");
  t.gamma_min = kv.real("gamma_min");
  t.seed = kv.uint("seed");
  t.loss_pretrain =
      kv.get("loss_pretrain") == "l1" ? PretrainLoss::kL1 : PretrainLoss::kL2;
  t.log_every = kv.uint("log_every");
  ck.train_cfg = t;
  ck.steps_run = kv.uint("steps_run");
  ck.final_loss = kv.real("final_loss");

  ck.model.params = icnn_layout(c);
  if (tensor_count != ck.model.params.set.slots.size()) {
    throw IoError(path + ": tensor count does not match the configuration");
  }
  for (std::size_t s = 0; s < tensor_count; ++s) {
    Tensor loaded = read_raw_tensor(in);
    Tensor& slot = ck.model.params.set.slots[s];
    if (loaded.rows != slot.rows || loaded.cols != slot.cols) {
      throw IoError(path + ": tensor shape does not match the configuration");
    }
    slot = std::move(loaded);
  }
  ck.model.validate();
  return ck;
}

}  // namespace aelpn
