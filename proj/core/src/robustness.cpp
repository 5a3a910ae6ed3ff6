#include "rvt/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rvt/parallel.hpp"

namespace rvt {

// ---------------------------------------------------------------------------
// batch attack wrappers

namespace {

Tensor<float> run_batch_attack(const Model<float>& m,
                               const Tensor<float>& batch,
                               std::span<const int> labels,
                               const AttackConfig& cfg, bool iterated,
                               std::uint64_t seed) {
  if (batch.rank() != 4)
    throw ShapeError("attack: expected [B,3,H,W] batch, got " +
                     shape_str(batch.shape()));
  const int bsz = batch.dim(0);
  if (labels.size() != static_cast<std::size_t>(bsz))
    throw DataError("attack: " + std::to_string(labels.size()) +
                    " labels for batch " + std::to_string(bsz));
  const Model<float> snap = eval_snapshot(m);
  const std::size_t per =
      static_cast<std::size_t>(batch.numel()) / static_cast<std::size_t>(bsz);
  std::vector<float> out(static_cast<std::size_t>(batch.numel()));
  const Shape sample_shape{1, batch.dim(1), batch.dim(2), batch.dim(3)};

  parallel_for(bsz, [&](int i) {
    std::vector<float> one(batch.data() + static_cast<std::size_t>(i) * per,
                           batch.data() + static_cast<std::size_t>(i + 1) * per);
    Tensor<float> x(sample_shape, std::move(one));
    auto fn = [&snap](const Tensor<float>& t) { return forward_one(snap, t); };
    Tensor<float> adv;
    if (iterated) {
      Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
      adv = pgd_attack<float>(fn, x, labels[static_cast<std::size_t>(i)], cfg,
                              &rng);
    } else {
      adv = fgsm_attack<float>(fn, x, labels[static_cast<std::size_t>(i)], cfg);
    }
    std::copy(adv.data(), adv.data() + per,
              out.begin() + static_cast<std::size_t>(i) * per);
  });
  return Tensor<float>(batch.shape(), std::move(out));
}

}  // namespace

Tensor<float> fgsm_attack(const Model<float>& m, const Tensor<float>& batch,
                          std::span<const int> labels,
                          const AttackConfig& cfg) {
  return run_batch_attack(m, batch, labels, cfg, /*iterated=*/false, 0);
}

Tensor<float> pgd_attack(const Model<float>& m, const Tensor<float>& batch,
                         std::span<const int> labels, const AttackConfig& cfg,
                         std::uint64_t seed) {
  return run_batch_attack(m, batch, labels, cfg, /*iterated=*/true, seed);
}

// ---------------------------------------------------------------------------
// corruption bank

namespace {

// Severity tables; committed constants, strictly monotone in distortion.
constexpr std::array<double, 5> kGaussianStd = {0.04, 0.08, 0.12, 0.18, 0.26};
constexpr std::array<double, 5> kImpulseRate = {0.02, 0.04, 0.08, 0.14, 0.22};
constexpr std::array<double, 5> kContrastFactor = {0.75, 0.60, 0.45, 0.30,
                                                   0.20};
constexpr std::array<double, 5> kBrightnessShift = {0.08, 0.14, 0.20, 0.26,
                                                    0.32};
constexpr std::array<double, 5> kPixelateScale = {0.80, 0.65, 0.50, 0.35,
                                                  0.25};

int check_severity(int severity) {
  if (severity < 1 || severity > 5)
    throw ConfigError("corruption: severity " + std::to_string(severity) +
                      " outside 1..5");
  return severity - 1;
}

}  // namespace

const std::vector<CorruptionKind>& all_corruption_kinds() {
  static const std::vector<CorruptionKind> kinds = {
      CorruptionKind::gaussian_noise, CorruptionKind::impulse_noise,
      CorruptionKind::contrast, CorruptionKind::brightness,
      CorruptionKind::pixelate};
  return kinds;
}

std::string corruption_name(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::gaussian_noise: return "gaussian_noise";
    case CorruptionKind::impulse_noise: return "impulse_noise";
    case CorruptionKind::contrast: return "contrast";
    case CorruptionKind::brightness: return "brightness";
    case CorruptionKind::pixelate: return "pixelate";
  }
  throw ConfigError("corruption: unknown kind");
}

CorruptionKind corruption_from_name(const std::string& name) {
  for (CorruptionKind kind : all_corruption_kinds())
    if (corruption_name(kind) == name) return kind;
  throw ConfigError("corruption: unknown kind '" + name + "'");
}

double corruption_param(CorruptionKind kind, int severity) {
  const int s = check_severity(severity);
  switch (kind) {
    case CorruptionKind::gaussian_noise: return kGaussianStd[static_cast<std::size_t>(s)];
    case CorruptionKind::impulse_noise: return kImpulseRate[static_cast<std::size_t>(s)];
    case CorruptionKind::contrast: return kContrastFactor[static_cast<std::size_t>(s)];
    case CorruptionKind::brightness: return kBrightnessShift[static_cast<std::size_t>(s)];
    case CorruptionKind::pixelate: return kPixelateScale[static_cast<std::size_t>(s)];
  }
  throw ConfigError("corruption: unknown kind");
}

Tensor<float> corrupt(const Tensor<float>& img, const CorruptionSpec& spec,
                      Rng& rng) {
  if (img.rank() != 3 || img.dim(0) != 3)
    throw ShapeError("corrupt: expected [3,H,W], got " +
                     shape_str(img.shape()));
  const double param = corruption_param(spec.kind, spec.severity);
  const int h = img.dim(1), w = img.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<float> out(img.vec());

  switch (spec.kind) {
    case CorruptionKind::gaussian_noise:
      for (auto& v : out)
        v = static_cast<float>(
            std::clamp(static_cast<double>(v) + rng.normal(0.0, param), 0.0, 1.0));
      break;
    case CorruptionKind::impulse_noise:
      for (auto& v : out)
        if (rng.bernoulli(param)) v = rng.bernoulli(0.5) ? 1.0f : 0.0f;
      break;
    case CorruptionKind::contrast:
      for (int c = 0; c < 3; ++c) {
        double mean = 0;
        for (std::size_t i = 0; i < plane; ++i)
          mean += out[static_cast<std::size_t>(c) * plane + i];
        mean /= static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) {
          auto& v = out[static_cast<std::size_t>(c) * plane + i];
          v = static_cast<float>(
              std::clamp(mean + (static_cast<double>(v) - mean) * param, 0.0, 1.0));
        }
      }
      break;
    case CorruptionKind::brightness:
      for (auto& v : out)
        v = static_cast<float>(
            std::clamp(static_cast<double>(v) + param, 0.0, 1.0));
      break;
    case CorruptionKind::pixelate: {
      const int sh = std::max(1, static_cast<int>(std::lround(h * param)));
      const int sw = std::max(1, static_cast<int>(std::lround(w * param)));
      std::vector<float> small(static_cast<std::size_t>(3) * sh * sw);
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < sh; ++y)
          for (int x = 0; x < sw; ++x) {
            const int sy = std::min(h - 1, y * h / sh);
            const int sx = std::min(w - 1, x * w / sw);
            small[(static_cast<std::size_t>(c) * sh + y) * sw + x] =
                img.data()[(static_cast<std::size_t>(c) * h + sy) * w + sx];
          }
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const int sy = std::min(sh - 1, y * sh / h);
            const int sx = std::min(sw - 1, x * sw / w);
            out[(static_cast<std::size_t>(c) * h + y) * w + x] =
                small[(static_cast<std::size_t>(c) * sh + sy) * sw + sx];
          }
      break;
    }
  }
  return Tensor<float>(img.shape(), std::move(out));
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

int argmax_class(const Tensor<float>& logits) {
  int best = 0;
  for (std::int64_t i = 1; i < logits.numel(); ++i)
    if (logits.data()[i] > logits.data()[best]) best = static_cast<int>(i);
  return best;
}

// Shared evaluation body; `attack_model` is null for stub predictors.
EvalReport evaluate_impl(const std::function<int(const Tensor<float>&)>& predict,
                         const Model<float>* attack_model, const Dataset& ds,
                         const EvalOptions& opts) {
  ds.validate();
  if (attack_model && ds.num_classes != attack_model->cfg.num_classes)
    throw DataError("evaluate: dataset has " + std::to_string(ds.num_classes) +
                    " classes but the model expects " +
                    std::to_string(attack_model->cfg.num_classes));
  const int n = opts.max_samples > 0 ? std::min(opts.max_samples, ds.size())
                                     : ds.size();
  EvalReport report;

  std::vector<int> wrong(static_cast<std::size_t>(n), 0);
  parallel_for(n, [&](int i) {
    wrong[static_cast<std::size_t>(i)] =
        predict(ds.image(i)) != static_cast<int>(ds.labels[static_cast<std::size_t>(i)]);
  });
  report.clean_err =
      static_cast<double>(std::accumulate(wrong.begin(), wrong.end(), 0)) / n;

  for (CorruptionKind kind : opts.kinds) {
    std::array<double, 5> errs{};
    for (int severity = 1; severity <= 5; ++severity) {
      std::vector<int> bad(static_cast<std::size_t>(n), 0);
      parallel_for(n, [&](int i) {
        Rng rng = Rng::stream(
            opts.seed ^ (static_cast<std::uint64_t>(kind) * 131 + severity),
            static_cast<std::uint64_t>(i));
        Tensor<float> corrupted =
            corrupt(ds.image(i), {kind, severity}, rng);
        bad[static_cast<std::size_t>(i)] =
            predict(corrupted) !=
            static_cast<int>(ds.labels[static_cast<std::size_t>(i)]);
      });
      errs[static_cast<std::size_t>(severity - 1)] =
          static_cast<double>(std::accumulate(bad.begin(), bad.end(), 0)) / n;
    }
    report.corruption_err.emplace_back(corruption_name(kind), errs);
  }

  for (const AttackSpec& spec : opts.attacks) {
    if (!attack_model)
      throw UsageError("evaluate: attacks need a differentiable model");
    std::vector<int> bad(static_cast<std::size_t>(n), 0);
    parallel_for(n, [&](int i) {
      const int label = static_cast<int>(ds.labels[static_cast<std::size_t>(i)]);
      Tensor<float> x = ds.image(i);
      Tensor<float> sample = reshape(x, {1, 3, ds.height, ds.width});
      auto fn = [attack_model](const Tensor<float>& t) {
        return forward_one(*attack_model, t);
      };
      Tensor<float> adv;
      if (spec.algorithm == AttackSpec::Algorithm::pgd) {
        Rng rng = Rng::stream(opts.seed + 0x9e37, static_cast<std::uint64_t>(i));
        adv = pgd_attack<float>(fn, sample, label, spec.cfg, &rng);
      } else {
        adv = fgsm_attack<float>(fn, sample, label, spec.cfg);
      }
      bad[static_cast<std::size_t>(i)] =
          predict(reshape(adv, {3, ds.height, ds.width})) != label;
    });
    const double err =
        static_cast<double>(std::accumulate(bad.begin(), bad.end(), 0)) / n;
    report.robust_acc.emplace_back(spec.name, 1.0 - err);
  }
  return report;
}

}  // namespace

EvalReport evaluate(const Model<float>& m, const Dataset& ds,
                    const EvalOptions& opts) {
  const Model<float> snap = eval_snapshot(m);
  auto predict = [&snap, &ds](const Tensor<float>& img) {
    return argmax_class(
        forward_one(snap, reshape(img, {1, 3, ds.height, ds.width})));
  };
  return evaluate_impl(predict, &snap, ds, opts);
}

EvalReport evaluate(const std::function<int(const Tensor<float>&)>& predict,
                    const Dataset& ds, const EvalOptions& opts) {
  return evaluate_impl(predict, nullptr, ds, opts);
}

// ---------------------------------------------------------------------------
// report serialization

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "split,kind,severity,error\n";
  os << "clean,none,0," << clean_err << "\n";
  for (const auto& [kind, errs] : corruption_err)
    for (int s = 1; s <= 5; ++s)
      os << "corruption," << kind << "," << s << ","
         << errs[static_cast<std::size_t>(s - 1)] << "\n";
  for (const auto& [name, acc] : robust_acc)
    os << "attack," << name << ",0," << 1.0 - acc << "\n";
  return os.str();
}

EvalReport EvalReport::from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "split,kind,severity,error")
    throw FormatError("report: missing csv header", 0);
  EvalReport report;
  std::size_t offset = line.size() + 1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string split, kind, sev, err;
    if (!std::getline(row, split, ',') || !std::getline(row, kind, ',') ||
        !std::getline(row, sev, ',') || !std::getline(row, err))
      throw FormatError("report: malformed row '" + line + "'", offset);
    const double e = std::stod(err);
    if (split == "clean") {
      report.clean_err = e;
    } else if (split == "corruption") {
      const int s = std::stoi(sev);
      if (s < 1 || s > 5)
        throw FormatError("report: severity out of range in '" + line + "'",
                          offset);
      if (report.corruption_err.empty() ||
          report.corruption_err.back().first != kind)
        report.corruption_err.emplace_back(kind, std::array<double, 5>{});
      report.corruption_err.back().second[static_cast<std::size_t>(s - 1)] = e;
    } else if (split == "attack") {
      report.robust_acc.emplace_back(kind, 1.0 - e);
    } else {
      throw FormatError("report: unknown split '" + split + "'", offset);
    }
    offset += line.size() + 1;
  }
  return report;
}

double compute_mce(const EvalReport& report, const EvalReport& baseline) {
  if (report.corruption_err.size() != baseline.corruption_err.size() ||
      report.corruption_err.empty())
    throw DataError("mce: reports cover different corruption grids");
  double total = 0;
  for (std::size_t k = 0; k < report.corruption_err.size(); ++k) {
    const auto& [kind, errs] = report.corruption_err[k];
    const auto& [bkind, berrs] = baseline.corruption_err[k];
    if (kind != bkind)
      throw DataError("mce: corruption kinds differ (" + kind + " vs " +
                      bkind + ")");
    double num = 0, den = 0;
    for (int s = 0; s < 5; ++s) {
      num += errs[static_cast<std::size_t>(s)];
      den += berrs[static_cast<std::size_t>(s)];
    }
    if (den == 0)
      throw NumericError("mce: baseline errors for " + kind +
                         " sum to zero; the ratio is undefined");
    total += num / den;
  }
  return 100.0 * total / static_cast<double>(report.corruption_err.size());
}

}  // namespace rvt
