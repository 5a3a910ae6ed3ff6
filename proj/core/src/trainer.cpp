#include "rvt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rvt {

std::string TrainResult::history_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss,accuracy\n";
  for (const auto& e : history)
    os << e.epoch << "," << e.loss << "," << e.accuracy << "\n";
  return os.str();
}

Tensor<float> image_level_augment(const Tensor<float>& img, Rng& rng) {
  if (img.rank() != 3 || img.dim(0) != 3)
    throw ShapeError("image_level_augment: expected [3,H,W], got " +
                     shape_str(img.shape()));
  const int h = img.dim(1), w = img.dim(2);
  constexpr int kPad = 4;
  std::vector<float> out(img.vec());

  // random crop out of a zero-padded canvas
  const int dy = static_cast<int>(rng.uniform_index(2 * kPad + 1)) - kPad;
  const int dx = static_cast<int>(rng.uniform_index(2 * kPad + 1)) - kPad;
  const bool flip = rng.bernoulli(0.5);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int sy = y + dy;
        const int sx = (flip ? w - 1 - x : x) + dx;
        out[(static_cast<std::size_t>(c) * h + y) * w + x] =
            (sy >= 0 && sy < h && sx >= 0 && sx < w)
                ? img.data()[(static_cast<std::size_t>(c) * h + sy) * w + sx]
                : 0.0f;
      }
  return Tensor<float>({3, h, w}, std::move(out));
}

namespace {

// Decoupled-weight-decay Adam; lr = 0 leaves parameters bitwise unchanged.
class AdamW {
 public:
  AdamW(double lr, double wd) : lr_(lr), wd_(wd) {}

  void step(std::vector<std::pair<std::string, Tensor<float>>>& params) {
    ++t_;
    if (state_.empty()) state_.resize(params.size());
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t p = 0; p < params.size(); ++p) {
      Tensor<float>& param = params[p].second;
      const Tensor<float> g = param.grad();
      auto& [m, v] = state_[p];
      if (m.empty()) {
        m.assign(static_cast<std::size_t>(param.numel()), 0.0);
        v.assign(static_cast<std::size_t>(param.numel()), 0.0);
      }
      for (std::int64_t i = 0; i < param.numel(); ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const double gi = g.data()[i];
        m[ii] = kBeta1 * m[ii] + (1.0 - kBeta1) * gi;
        v[ii] = kBeta2 * v[ii] + (1.0 - kBeta2) * gi * gi;
        const double update = (m[ii] / bc1) / (std::sqrt(v[ii] / bc2) + kEps) +
                              wd_ * param.data()[i];
        param.data()[i] =
            static_cast<float>(param.data()[i] - lr_ * update);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_, wd_;
  int t_ = 0;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> state_;
};

class Sgd {
 public:
  Sgd(double lr, double wd) : lr_(lr), wd_(wd) {}

  void step(std::vector<std::pair<std::string, Tensor<float>>>& params) {
    for (auto& [name, param] : params) {
      const Tensor<float> g = param.grad();
      for (std::int64_t i = 0; i < param.numel(); ++i)
        param.data()[i] = static_cast<float>(
            param.data()[i] -
            lr_ * (static_cast<double>(g.data()[i]) + wd_ * param.data()[i]));
    }
  }

 private:
  double lr_, wd_;
};

}  // namespace

TrainResult train(const RunConfig& cfg, const Dataset& ds, std::ostream* log) {
  cfg.validate();
  ds.validate();
  if (ds.num_classes != cfg.model.num_classes)
    throw DataError("train: dataset has " + std::to_string(ds.num_classes) +
                    " classes but the model expects " +
                    std::to_string(cfg.model.num_classes));
  if (ds.height != cfg.model.input_res || ds.width != cfg.model.input_res)
    throw DataError("train: dataset resolution " + std::to_string(ds.height) +
                    "x" + std::to_string(ds.width) +
                    " does not match the configured " +
                    std::to_string(cfg.model.input_res));

  TrainResult result;
  result.model = build_model<float>(cfg.model, cfg.seed);

  AdamW adamw(cfg.optimizer.lr, cfg.optimizer.weight_decay);
  Sgd sgd(cfg.optimizer.lr, cfg.optimizer.weight_decay);
  const bool use_adamw = cfg.optimizer.kind == "adamw";

  const int n = ds.size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.optimizer.epochs; ++epoch) {
    Rng shuffle_rng = Rng::stream(cfg.seed, 0xe90c + static_cast<std::uint64_t>(epoch));
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(
          shuffle_rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(j)]);
    }

    double loss_sum = 0;
    int correct = 0, seen = 0, steps = 0;
    for (int start = 0; start < n; start += cfg.optimizer.batch) {
      const int bsz = std::min(cfg.optimizer.batch, n - start);
      std::vector<Tensor<float>> logits;
      std::vector<int> labels;
      logits.reserve(static_cast<std::size_t>(bsz));
      for (int k = 0; k < bsz; ++k) {
        const int idx = order[static_cast<std::size_t>(start + k)];
        // per-(epoch, image) stream keeps augmentation order-independent
        Rng aug_rng =
            Rng::stream(cfg.seed, (static_cast<std::uint64_t>(epoch) << 32) ^
                                      static_cast<std::uint64_t>(idx));
        Tensor<float> img = image_level_augment(ds.image(idx), aug_rng);
        AugConfig per_image = cfg.aug;
        per_image.seed = aug_rng.next_u64();
        img = patchwise_augment(img, per_image);
        Tensor<float> sample = reshape(img, {1, 3, ds.height, ds.width});
        logits.push_back(forward_one(result.model, sample));
        labels.push_back(static_cast<int>(ds.labels[static_cast<std::size_t>(idx)]));
      }
      Tensor<float> stacked = stack_rows(logits);
      Tensor<float> loss = cross_entropy(stacked, labels);
      if (!std::isfinite(loss.item()))
        throw NumericError("train: loss diverged to " +
                           std::to_string(loss.item()) + " at epoch " +
                           std::to_string(epoch) + ", step " +
                           std::to_string(steps));
      result.model.zero_grads();
      backward(loss);
      if (use_adamw)
        adamw.step(result.model.params);
      else
        sgd.step(result.model.params);

      loss_sum += loss.item();
      ++steps;
      for (int k = 0; k < bsz; ++k) {
        int best = 0;
        for (int j = 1; j < ds.num_classes; ++j)
          if (stacked.data()[k * ds.num_classes + j] >
              stacked.data()[k * ds.num_classes + best])
            best = j;
        correct += best == labels[static_cast<std::size_t>(k)];
        ++seen;
      }
    }

    EpochStats stats{epoch, loss_sum / std::max(steps, 1),
                     static_cast<double>(correct) / std::max(seen, 1)};
    result.history.push_back(stats);
    if (log)
      *log << "epoch " << stats.epoch << " loss " << stats.loss << " acc "
           << stats.accuracy << "\n";
  }
  return result;
}

}  // namespace rvt
