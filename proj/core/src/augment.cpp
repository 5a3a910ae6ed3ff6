#include "rvt/augment.hpp"

#include <algorithm>
#include <cmath>

namespace rvt {

namespace {

void check_patch_shape(const Tensor<float>& patch, const char* op) {
  if (patch.rank() != 3 || patch.dim(0) != 3 || patch.dim(1) != patch.dim(2))
    throw ShapeError(std::string(op) + ": expected [3,s,s] patch, got " +
                     shape_str(patch.shape()));
}

}  // namespace

Tensor<float> patch_crop_at(const Tensor<float>& patch, int side, int x0,
                            int y0) {
  check_patch_shape(patch, "patch_crop_at");
  const int s = patch.dim(1);
  if (side < 1 || side > s || x0 < 0 || y0 < 0 || x0 + side > s ||
      y0 + side > s)
    throw ConfigError("patch_crop_at: window " + std::to_string(side) + "@(" +
                      std::to_string(x0) + "," + std::to_string(y0) +
                      ") outside a " + std::to_string(s) + "-pixel patch");
  if (side == s) return patch.clone();

  std::vector<float> out(static_cast<std::size_t>(3) * s * s);
  const float* src = patch.data();
  const double ratio = static_cast<double>(side) / s;
  for (int y = 0; y < s; ++y) {
    const double sy = (y + 0.5) * ratio - 0.5;
    const double syc = std::clamp(sy, 0.0, static_cast<double>(side - 1));
    const int iy = static_cast<int>(syc);
    const int iy1 = std::min(iy + 1, side - 1);
    const double ty = syc - iy;
    for (int x = 0; x < s; ++x) {
      const double sx = (x + 0.5) * ratio - 0.5;
      const double sxc = std::clamp(sx, 0.0, static_cast<double>(side - 1));
      const int ix = static_cast<int>(sxc);
      const int ix1 = std::min(ix + 1, side - 1);
      const double tx = sxc - ix;
      for (int c = 0; c < 3; ++c) {
        auto at = [&](int yy, int xx) {
          return static_cast<double>(
              src[(static_cast<std::size_t>(c) * s + y0 + yy) * s + x0 + xx]);
        };
        const double v = (1 - ty) * ((1 - tx) * at(iy, ix) + tx * at(iy, ix1)) +
                         ty * ((1 - tx) * at(iy1, ix) + tx * at(iy1, ix1));
        out[(static_cast<std::size_t>(c) * s + y) * s + x] =
            static_cast<float>(v);
      }
    }
  }
  return Tensor<float>(patch.shape(), std::move(out));
}

Tensor<float> patch_crop(const Tensor<float>& patch,
                         const std::array<double, 2>& scale, Rng& rng) {
  check_patch_shape(patch, "patch_crop");
  const int s = patch.dim(1);
  const double area = rng.uniform(scale[0], scale[1]);
  const int side =
      std::clamp(static_cast<int>(std::lround(s * std::sqrt(area))), 1, s);
  const int x0 = static_cast<int>(
      rng.uniform_index(static_cast<std::uint64_t>(s - side + 1)));
  const int y0 = static_cast<int>(
      rng.uniform_index(static_cast<std::uint64_t>(s - side + 1)));
  return patch_crop_at(patch, side, x0, y0);
}

Tensor<float> patch_noise(const Tensor<float>& patch, double mean, double std,
                          Rng& rng) {
  if (std < 0) throw ConfigError("patch_noise: negative std");
  std::vector<float> out(patch.vec());
  for (auto& v : out) {
    const double noised = static_cast<double>(v) + rng.normal(mean, std);
    v = static_cast<float>(std::clamp(noised, 0.0, 1.0));
  }
  return Tensor<float>(patch.shape(), std::move(out));
}

Tensor<float> patch_hflip(const Tensor<float>& patch) {
  check_patch_shape(patch, "patch_hflip");
  const int s = patch.dim(1);
  std::vector<float> out(patch.vec().size());
  const float* src = patch.data();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        out[(static_cast<std::size_t>(c) * s + y) * s + x] =
            src[(static_cast<std::size_t>(c) * s + y) * s + (s - 1 - x)];
  return Tensor<float>(patch.shape(), std::move(out));
}

Tensor<float> patchwise_augment(const Tensor<float>& img, const AugConfig& cfg,
                                AugStats* stats) {
  cfg.validate();
  if (img.rank() != 3 || img.dim(0) != 3)
    throw ShapeError("patchwise_augment: expected [3,H,W], got " +
                     shape_str(img.shape()));
  const int h = img.dim(1), w = img.dim(2), p = cfg.patch;
  if (h % p != 0 || w % p != 0)
    throw ConfigError("patchwise_augment: image " + std::to_string(h) + "x" +
                      std::to_string(w) + " not divisible into " +
                      std::to_string(p) + "-pixel cells");

  Rng rng(cfg.seed);
  std::vector<float> out(img.vec());
  const int gh = h / p, gw = w / p;
  std::vector<float> cell(static_cast<std::size_t>(3) * p * p);

  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < p; ++y)
          for (int x = 0; x < p; ++x)
            cell[(static_cast<std::size_t>(c) * p + y) * p + x] =
                out[(static_cast<std::size_t>(c) * h + gy * p + y) * w +
                    gx * p + x];
      Tensor<float> t(Shape{3, p, p}, cell);

      // Independent gate per transform, fixed order: crop, flip, noise.
      bool touched = false;
      if (rng.bernoulli(cfg.p)) {
        t = patch_crop(t, cfg.crop_scale, rng);
        touched = true;
        if (stats) ++stats->crops;
      }
      if (rng.bernoulli(cfg.p)) {
        t = patch_hflip(t);
        touched = true;
        if (stats) ++stats->flips;
      }
      if (rng.bernoulli(cfg.p)) {
        t = patch_noise(t, cfg.noise_mean, cfg.noise_std, rng);
        touched = true;
        if (stats) ++stats->noised;
      }
      if (stats) ++stats->cells;

      if (touched)
        for (int c = 0; c < 3; ++c)
          for (int y = 0; y < p; ++y)
            for (int x = 0; x < p; ++x)
              out[(static_cast<std::size_t>(c) * h + gy * p + y) * w + gx * p +
                  x] = t.data()[(static_cast<std::size_t>(c) * p + y) * p + x];
    }
  return Tensor<float>(img.shape(), std::move(out));
}

}  // namespace rvt
