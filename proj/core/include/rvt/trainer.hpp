#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "rvt/augment.hpp"
#include "rvt/dataset.hpp"
#include "rvt/model.hpp"
#include "rvt/robustness.hpp"

namespace rvt {

struct OptimConfig {
  std::string kind = "adamw";  // adamw | sgd
  double lr = 1e-3;
  double weight_decay = 0.05;
  int epochs = 30;
  int batch = 32;

  void validate() const {
    if (kind != "adamw" && kind != "sgd")
      throw ConfigError("optimizer config: kind must be adamw or sgd");
    if (lr < 0) throw ConfigError("optimizer config: negative learning rate");
    if (weight_decay < 0)
      throw ConfigError("optimizer config: negative weight decay");
    if (epochs < 0) throw ConfigError("optimizer config: negative epochs");
    if (batch < 1) throw ConfigError("optimizer config: batch must be positive");
  }
};

// Everything a run needs; the seed pins datasets, initialization,
// augmentation and therefore every emitted artifact.
struct RunConfig {
  ModelConfig model;
  AugConfig aug;
  AttackConfig attack;
  OptimConfig optimizer;
  std::uint64_t seed = 0;
  std::string dataset;  // path to an RVTD file
  std::string out;      // output directory

  void validate() const {
    model.validate();
    aug.validate();
    attack.validate();
    optimizer.validate();
  }
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  Model<float> model;
  std::vector<EpochStats> history;

  std::string history_csv() const;
};

// Whole-image flip and shifted crop, the image-level half of the training
// augmentation pipeline.
Tensor<float> image_level_augment(const Tensor<float>& img, Rng& rng);

// Minibatch cross-entropy training. Applies image-level then patch-wise
// augmentation, logs one line per epoch, aborts on divergence.
TrainResult train(const RunConfig& cfg, const Dataset& ds,
                  std::ostream* log = nullptr);

}  // namespace rvt
