#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rvt/dataset.hpp"
#include "rvt/model.hpp"
#include "rvt/ops.hpp"
#include "rvt/rng.hpp"

// White-box L-infinity attacks (single-step and iterated sign gradient),
// a five-kind synthetic corruption bank with five severities, and the
// robustness metrics (clean/robust accuracy, mean corruption error).

namespace rvt {

struct AttackConfig {
  double epsilon = 1.0;    // L-inf budget, in 1/255 pixel units
  int steps = 5;           // iterations (1 = single-step)
  double step_size = 0.5;  // per-step magnitude, in 1/255 units
  bool random_start = false;

  void validate() const {
    if (epsilon < 0) throw ConfigError("attack config: epsilon must be >= 0");
    if (steps < 1) throw ConfigError("attack config: steps must be >= 1");
    if (step_size <= 0) throw ConfigError("attack config: step_size must be > 0");
  }
};

// ---------------------------------------------------------------------------
// attacks

namespace detail {

// Clamp v into [x-eps, x+eps] and [0,1], then nudge by ulps until the float
// difference v - x itself respects the budget; the reported L-inf norm is
// then exact, not merely exact-up-to-rounding.
template <typename T>
T project_pixel(T v, T x, T eps) {
  v = std::min(std::max(v, x - eps), x + eps);
  v = std::min(std::max(v, T(0)), T(1));
  while (v - x > eps) v = std::nextafter(v, x);
  while (x - v > eps) v = std::nextafter(v, x);
  return v;
}

}  // namespace detail

// Iterated sign-gradient ascent on a single sample. `logits_fn` maps the
// (tracked) input tensor to class logits; the sample keeps whatever shape
// the function expects. Each step projects back onto the eps-ball around
// the clean input and into the valid pixel range.
template <typename T>
Tensor<T> pgd_attack(
    const std::function<Tensor<T>(const Tensor<T>&)>& logits_fn,
    const Tensor<T>& x, int label, const AttackConfig& cfg,
    Rng* start_rng = nullptr) {
  cfg.validate();
  const T eps = static_cast<T>(cfg.epsilon / 255.0);
  const T alpha = static_cast<T>(cfg.step_size / 255.0);
  if (eps == T(0)) return x.clone();

  std::vector<T> adv = x.vec();
  const std::size_t n = adv.size();
  if (cfg.random_start && start_rng) {
    for (std::size_t i = 0; i < n; ++i)
      adv[i] = detail::project_pixel(
          static_cast<T>(adv[i] + start_rng->uniform(-eps, eps)), x.data()[i],
          eps);
  }
  for (int step = 0; step < cfg.steps; ++step) {
    Tensor<T> leaf = Tensor<T>::leaf(x.shape(), adv);
    Tensor<T> logits = logits_fn(leaf);
    Tensor<T> flat = reshape(logits, {1, static_cast<int>(logits.numel())});
    std::vector<int> y{label};
    backward(cross_entropy(flat, y));
    Tensor<T> g = leaf.grad();
    for (std::size_t i = 0; i < n; ++i) {
      const T gv = g.data()[i];
      if (!std::isfinite(gv))
        throw NumericError("attack: non-finite input gradient");
      const T sgn = gv > T(0) ? T(1) : (gv < T(0) ? T(-1) : T(0));
      adv[i] = detail::project_pixel(static_cast<T>(adv[i] + alpha * sgn),
                                     x.data()[i], eps);
    }
  }
  return Tensor<T>(x.shape(), std::move(adv));
}

// Single sign-gradient step of size eps; the steps=1, alpha=eps special
// case of the iterated attack, sharing its projection arithmetic.
template <typename T>
Tensor<T> fgsm_attack(
    const std::function<Tensor<T>(const Tensor<T>&)>& logits_fn,
    const Tensor<T>& x, int label, const AttackConfig& cfg) {
  AttackConfig single = cfg;
  single.steps = 1;
  single.step_size = cfg.epsilon > 0 ? cfg.epsilon : 1.0;
  single.random_start = false;
  return pgd_attack<T>(logits_fn, x, label, single);
}

// Batch wrappers over a model snapshot: [B,3,H,W] images in [0,1].
Tensor<float> fgsm_attack(const Model<float>& m, const Tensor<float>& batch,
                          std::span<const int> labels, const AttackConfig& cfg);
Tensor<float> pgd_attack(const Model<float>& m, const Tensor<float>& batch,
                         std::span<const int> labels, const AttackConfig& cfg,
                         std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// corruptions

enum class CorruptionKind {
  gaussian_noise,
  impulse_noise,
  contrast,
  brightness,
  pixelate,
};

struct CorruptionSpec {
  CorruptionKind kind;
  int severity = 1;  // 1..5
};

const std::vector<CorruptionKind>& all_corruption_kinds();
std::string corruption_name(CorruptionKind kind);
CorruptionKind corruption_from_name(const std::string& name);

// Distortion parameter for (kind, severity); strictly monotone in severity.
double corruption_param(CorruptionKind kind, int severity);

// Apply a corruption to a [3,H,W] image in [0,1]; deterministic given rng.
Tensor<float> corrupt(const Tensor<float>& img, const CorruptionSpec& spec,
                      Rng& rng);

// ---------------------------------------------------------------------------
// evaluation and metrics

struct AttackSpec {
  std::string name;
  enum class Algorithm { fgsm, pgd } algorithm = Algorithm::fgsm;
  AttackConfig cfg;
};

struct EvalOptions {
  std::vector<AttackSpec> attacks;
  std::vector<CorruptionKind> kinds = all_corruption_kinds();
  std::uint64_t seed = 0;
  int max_samples = 0;  // 0 = whole dataset
};

struct EvalReport {
  double clean_err = 0.0;
  // per-kind rows of severity-1..5 errors, in kind order
  std::vector<std::pair<std::string, std::array<double, 5>>> corruption_err;
  std::vector<std::pair<std::string, double>> robust_acc;

  std::string to_csv() const;
  static EvalReport from_csv(const std::string& text);
};

// Top-1 error on clean, corrupted, and attacked inputs. Samples are sharded
// across workers (RVT_THREADS); the report is scheduling-independent.
EvalReport evaluate(const Model<float>& m, const Dataset& ds,
                    const EvalOptions& opts);

// Gradient-free variant for stub predictors; attacks are rejected.
EvalReport evaluate(const std::function<int(const Tensor<float>&)>& predict,
                    const Dataset& ds, const EvalOptions& opts);

// Corruption errors summed over severities, normalized per kind by the
// baseline's errors, averaged over kinds, times 100. Lower is more robust.
double compute_mce(const EvalReport& report, const EvalReport& baseline);

}  // namespace rvt
