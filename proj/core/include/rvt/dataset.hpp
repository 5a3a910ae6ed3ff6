#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rvt/tensor.hpp"

namespace rvt {

// In-memory image classification dataset: u8 interleaved RGB rows.
struct Dataset {
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<std::uint16_t> labels;  // one per image
  std::vector<std::uint8_t> pixels;   // B * H * W * 3, row-major HWC

  int size() const { return static_cast<int>(labels.size()); }

  // [3,H,W] float image in [0,1].
  Tensor<float> image(int index) const;

  void validate() const;
};

// Binary container: magic "RVTD", u32 version, u32 B/H/W/K, u16 labels,
// u8 pixels; little-endian throughout. Round-trips bitwise.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& path);

// Four-class generator: colored bars (one color per class) at random
// positions and orientations over a noisy dark background, 32x32.
// Deterministic per seed; class labels cycle so counts are exactly uniform.
Dataset make_synthetic_dataset(std::uint64_t seed, int per_class);

}  // namespace rvt
