#pragma once

#include <array>
#include <cstdint>

#include "rvt/rng.hpp"
#include "rvt/tensor.hpp"

// Patch-wise training augmentation: the image is divided into its
// tokenization cells and each cell independently draws a random resized
// crop, a horizontal flip and gaussian noise, each gated by probability p.

namespace rvt {

struct AugConfig {
  double p = 0.1;                          // per-transform gate probability
  std::array<double, 2> crop_scale{0.85, 1.0};  // area fraction range
  double noise_mean = 0.0;
  double noise_std = 0.01;
  int patch = 16;  // augmentation cell size in pixels
  std::uint64_t seed = 0;

  void validate() const {
    if (p < 0.0 || p > 1.0)
      throw ConfigError("augment config: p must be in [0,1]");
    if (crop_scale[0] <= 0.0 || crop_scale[0] > crop_scale[1] ||
        crop_scale[1] > 1.0)
      throw ConfigError("augment config: crop_scale needs 0 < lo <= hi <= 1");
    if (noise_std < 0.0)
      throw ConfigError("augment config: noise_std must be non-negative");
    if (patch < 1) throw ConfigError("augment config: patch must be positive");
  }
};

// Counts of applied transforms, for statistical checks.
struct AugStats {
  std::int64_t cells = 0;
  std::int64_t crops = 0;
  std::int64_t flips = 0;
  std::int64_t noised = 0;
};

// Crop a centered-at-(x0,y0) side x side window out of a [3,s,s] patch and
// bilinearly resize it back to s x s. Deterministic core of the random
// resized crop; side == s and x0 == y0 == 0 is the identity.
Tensor<float> patch_crop_at(const Tensor<float>& patch, int side, int x0,
                            int y0);

// Random resized crop: area fraction drawn from `scale`, aspect ratio kept,
// offset uniform over the valid range.
Tensor<float> patch_crop(const Tensor<float>& patch,
                         const std::array<double, 2>& scale, Rng& rng);

// Add i.i.d. gaussian noise and clamp to [0,1].
Tensor<float> patch_noise(const Tensor<float>& patch, double mean, double std,
                          Rng& rng);

// Mirror left-right.
Tensor<float> patch_hflip(const Tensor<float>& patch);

// Apply the per-cell pipeline (crop, then flip, then noise) over the cell
// grid of a [3,H,W] image in [0,1]. Deterministic given cfg.seed.
Tensor<float> patchwise_augment(const Tensor<float>& img, const AugConfig& cfg,
                                AugStats* stats = nullptr);

}  // namespace rvt
