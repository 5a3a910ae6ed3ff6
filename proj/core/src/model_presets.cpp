#include "rvt/model.hpp"

namespace rvt {

std::int64_t count_params(const ModelConfig& cfg) {
  // One code path with the real build: zero-init skips the random draws.
  return build_model<float>(cfg, 0, /*zero_init=*/true).num_params();
}

std::int64_t count_flops(const ModelConfig& cfg, int resolution) {
  ModelConfig c = cfg;
  c.input_res = resolution;
  c.validate();
  const int fs = c.first_stage();
  const int ls = c.last_stage();
  const auto grids = c.stage_grids();
  std::int64_t macs = 0;

  const int c0 = c.stage.channels[static_cast<std::size_t>(fs)];
  const int stride = c.embed_stride();
  const std::int64_t n0 =
      static_cast<std::int64_t>(grids[static_cast<std::size_t>(fs)]) *
      grids[static_cast<std::size_t>(fs)];
  if (c.embed_kind == EmbedKind::linear) {
    macs += n0 * (3LL * stride * stride) * c0;
  } else {
    const auto ch = detail::stem_channels(stride, c0);
    int cin = 3;
    int h = resolution;
    for (int cout : ch) {
      h = (h + 1) / 2;
      macs += static_cast<std::int64_t>(cout) * cin * 9 * h * h;
      cin = cout;
    }
    macs += n0 * static_cast<std::int64_t>(c0) * c0;  // pointwise projection
  }

  for (int s = fs; s <= ls; ++s) {
    const auto si = static_cast<std::size_t>(s);
    const std::int64_t g = grids[si];
    const std::int64_t n = g * g + (c.uses_cls() ? 1 : 0);
    const std::int64_t cc = c.stage.channels[si];
    const std::int64_t e = cc * c.ffn_expansion;
    std::int64_t attn;
    if (c.attn_window > 0) {
      const std::int64_t win = c.attn_window;
      const std::int64_t windows =
          ((g + win - 1) / win) * ((g + win - 1) / win);
      const std::int64_t wt = win * win;
      attn = windows * 2 * wt * wt * cc;
    } else {
      attn = 2 * n * n * cc;
    }
    std::int64_t per_block = 3 * n * cc * cc  // q/k/v projections
                             + attn           // logits and weighted values
                             + n * cc * cc;   // output projection
    if (c.uses_paas()) per_block += n * n * c.stage.heads[si];
    per_block += 2 * n * cc * e;  // pointwise FFN
    if (c.ffn_kind == FfnKind::conv) per_block += n * e * 9;  // depthwise
    macs += per_block * c.stage.blocks[si];
    if (s < ls) {
      const std::int64_t gn = grids[static_cast<std::size_t>(s + 1)];
      macs += gn * gn * cc * c.stage.channels[static_cast<std::size_t>(s + 1)];
    }
  }

  macs += static_cast<std::int64_t>(
              c.stage.channels[static_cast<std::size_t>(ls)]) *
          c.num_classes;
  return macs;
}

namespace {

StageSpec family_stages(std::array<int, 4> blocks) {
  StageSpec s;
  s.blocks = blocks;
  s.channels = {48, 96, 192, 384};
  s.heads = {1, 2, 3, 6};
  s.head_dim = {48, 48, 64, 64};
  return s;
}

}  // namespace

ModelConfig preset_v(int variant, int num_classes, int input_res) {
  static const std::array<std::array<int, 4>, 6> kBlocks = {{
      {0, 0, 12, 0},
      {0, 0, 10, 2},
      {0, 2, 10, 0},
      {0, 2, 8, 2},
      {2, 2, 8, 0},
      {2, 2, 6, 2},
  }};
  if (variant < 1 || variant > 6)
    throw ConfigError("preset_v: variant must be 1..6");
  ModelConfig cfg;
  cfg.stage = family_stages(kBlocks[static_cast<std::size_t>(variant - 1)]);
  cfg.embed_kind = EmbedKind::linear;
  cfg.ffn_kind = FfnKind::plain;
  cfg.pos_kind = PosKind::learned_absolute;
  // The single-stage baseline keeps its CLS token; multi-stage variants pool
  // between stages, which a CLS token does not survive.
  cfg.head_kind = variant == 1 ? HeadKind::cls_token : HeadKind::gap;
  cfg.num_classes = num_classes;
  cfg.input_res = input_res;
  cfg.validate();
  return cfg;
}

ModelConfig preset_rvt_ti(int num_classes, int input_res) {
  ModelConfig cfg;
  cfg.stage = family_stages({0, 0, 10, 2});
  cfg.stage.heads = {1, 2, 8, 16};
  cfg.stage.head_dim = {48, 48, 24, 24};
  cfg.embed_kind = EmbedKind::conv_stem;
  cfg.ffn_kind = FfnKind::conv;
  cfg.pos_kind = PosKind::paas;
  cfg.head_kind = HeadKind::gap;
  cfg.num_classes = num_classes;
  cfg.input_res = input_res;
  cfg.validate();
  return cfg;
}

ModelConfig preset_tiny(int num_classes, int input_res) {
  ModelConfig cfg;
  cfg.stage.blocks = {0, 2, 0, 0};
  cfg.stage.channels = {0, 64, 0, 0};
  cfg.stage.heads = {0, 4, 0, 0};
  cfg.stage.head_dim = {0, 16, 0, 0};
  cfg.embed_kind = EmbedKind::conv_stem;
  cfg.ffn_kind = FfnKind::conv;
  cfg.pos_kind = PosKind::paas;
  cfg.head_kind = HeadKind::gap;
  cfg.num_classes = num_classes;
  cfg.input_res = input_res;
  cfg.validate();
  return cfg;
}

}  // namespace rvt
