#pragma once

#include <string>

#include "aelpn/potential.hpp"
#include "aelpn/training.hpp"

namespace aelpn {

// Self-describing model file: a text header (format version, variant, net
// config, the training recipe and a history summary) followed by the raw
// binary tensors, one per parameter slot. Parameter round trips are bitwise.
struct Checkpoint {
  int format_version = 1;
  ProxModel model;
  TrainConfig train_cfg;
  std::size_t steps_run = 0;
  double final_loss = 0.0;

  static constexpr int kFormatVersion = 1;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);

// Throws IoError on malformed files or a format_version above the supported
// one; the loaded parameters are bitwise equal to the saved ones.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace aelpn
