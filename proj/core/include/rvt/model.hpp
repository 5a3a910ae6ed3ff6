#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rvt/attention.hpp"
#include "rvt/ops.hpp"
#include "rvt/rng.hpp"

// Network assembly: patch embedders, pre-norm transformer blocks with plain
// or convolutional FFNs, multi-stage layouts with 2x2 pooling between
// stages, and CLS/GAP classification heads.

namespace rvt {

enum class EmbedKind { linear, conv_stem };
enum class FfnKind { plain, conv };
enum class HeadKind { cls_token, gap };

// Per-stage architecture: block count, width, head count and head dimension
// for the four resolution levels (input/4 down to input/32).
struct StageSpec {
  std::array<int, 4> blocks{};
  std::array<int, 4> channels{};
  std::array<int, 4> heads{};
  std::array<int, 4> head_dim{};
};

struct ModelConfig {
  StageSpec stage;
  EmbedKind embed_kind = EmbedKind::linear;
  FfnKind ffn_kind = FfnKind::plain;
  PosKind pos_kind = PosKind::none;
  HeadKind head_kind = HeadKind::gap;
  int ffn_expansion = 4;
  int num_classes = 0;
  int input_res = 224;
  int patch = 0;        // embed stride; 0 derives it from the first stage
  int attn_window = 0;  // 0 = global self-attention

  int first_stage() const {
    for (int s = 0; s < 4; ++s)
      if (stage.blocks[static_cast<std::size_t>(s)] > 0) return s;
    return -1;
  }

  int last_stage() const {
    for (int s = 3; s >= 0; --s)
      if (stage.blocks[static_cast<std::size_t>(s)] > 0) return s;
    return -1;
  }

  // Stage s runs at input_res / (4 * 2^s).
  int embed_stride() const { return 4 << first_stage(); }

  int resolved_patch() const { return patch > 0 ? patch : embed_stride(); }

  // Grid side per stage, derived by ceil-halving from the first active one.
  std::vector<int> stage_grids() const {
    std::vector<int> grids(4, 0);
    int g = input_res / embed_stride();
    for (int s = first_stage(); s <= last_stage(); ++s) {
      grids[static_cast<std::size_t>(s)] = g;
      g = (g + 1) / 2;
    }
    return grids;
  }

  bool uses_cls() const { return head_kind == HeadKind::cls_token; }
  bool uses_paas() const { return pos_kind == PosKind::paas; }

  void validate() const;
};

inline void ModelConfig::validate() const {
  if (num_classes < 2)
    throw ConfigError("model config: num_classes must be at least 2");
  if (input_res < 1) throw ConfigError("model config: input_res must be positive");
  if (ffn_expansion < 1)
    throw ConfigError("model config: ffn_expansion must be at least 1");
  const int fs = first_stage();
  if (fs < 0) throw ConfigError("model config: no stage has blocks");
  const int ls = last_stage();
  for (int s = 0; s < 4; ++s) {
    const auto i = static_cast<std::size_t>(s);
    if (stage.blocks[i] < 0)
      throw ConfigError("model config: negative block count in stage " +
                        std::to_string(s + 1));
    if (s >= fs && s <= ls && stage.blocks[i] == 0)
      throw ConfigError("model config: active stages must be contiguous; stage " +
                        std::to_string(s + 1) + " is empty");
    if (stage.blocks[i] > 0) {
      if (stage.channels[i] < 1 || stage.heads[i] < 1 || stage.head_dim[i] < 1)
        throw ConfigError("model config: stage " + std::to_string(s + 1) +
                          " needs positive channels/heads/head_dim");
      if (stage.channels[i] != stage.heads[i] * stage.head_dim[i])
        throw ConfigError(
            "model config: stage " + std::to_string(s + 1) + " violates C = N*H (" +
            std::to_string(stage.channels[i]) + " != " +
            std::to_string(stage.heads[i]) + "*" +
            std::to_string(stage.head_dim[i]) + ")");
    }
  }
  if (input_res % embed_stride() != 0)
    throw ConfigError("model config: resolution " + std::to_string(input_res) +
                      " not divisible by embed stride " +
                      std::to_string(embed_stride()));
  if (patch > 0 && patch != embed_stride())
    throw ConfigError("model config: patch " + std::to_string(patch) +
                      " does not match the stage-derived stride " +
                      std::to_string(embed_stride()));
  if (uses_cls() && fs != ls)
    throw ConfigError(
        "model config: a CLS token is only supported on single-stage models; "
        "it does not survive pooling");
  if (uses_cls() && ffn_kind == FfnKind::conv)
    throw ConfigError(
        "model config: convolutional FFN needs a pure token grid, which a CLS "
        "token breaks");
  if (uses_cls() && attn_window > 0)
    throw ConfigError("model config: windowed attention cannot place a CLS token");
  if (attn_window > 0 && uses_paas())
    throw ConfigError(
        "model config: windowed attention and position-aware scaling are "
        "mutually exclusive");
  if (pos_kind == PosKind::learned_relative ||
      pos_kind == PosKind::input_conditioned)
    throw UnsupportedError("model config: unsupported position encoding kind");
}

// ---------------------------------------------------------------------------
// parameter containers

template <typename T>
struct FfnParams {
  Tensor<T> w1, b1;  // pointwise expansion [C x E]
  Tensor<T> w2, b2;  // pointwise squeeze [E x C]
  std::optional<Tensor<T>> dw;  // depthwise 3x3 [E,1,3,3]; set for conv FFN
};

template <typename T>
struct BlockParams {
  Tensor<T> ln1_g, ln1_b;
  MhsaParams<T> attn;
  Tensor<T> ln2_g, ln2_b;
  FfnParams<T> ffn;
};

template <typename T>
struct StemConv {
  Tensor<T> w, b;        // 3x3 stride-2 conv
  Tensor<T> ln_g, ln_b;  // per-token channel norm after the conv
};

template <typename T>
struct PoolProj {
  Tensor<T> w, b;  // channel projection after 2x2 average pooling
};

template <typename T>
struct StageParams {
  int stage_index = 0;
  int grid = 0;
  int channels = 0;
  std::vector<BlockParams<T>> blocks;
  std::optional<PoolProj<T>> pool_to_next;
};

template <typename T>
class Model {
 public:
  ModelConfig cfg;
  std::vector<StemConv<T>> stem;          // conv_stem only
  Tensor<T> embed_w, embed_b;             // patch projection (or stem 1x1)
  std::optional<Tensor<T>> cls_token;     // [1 x C]
  std::optional<Tensor<T>> pos_table;     // learned leaf or sincos constant
  std::vector<StageParams<T>> stages;
  Tensor<T> head_ln_g, head_ln_b, head_w, head_b;

  // Ordered registry of learnable parameters; the order is fixed by the
  // build traversal and shared by the optimizer and the checkpoint format.
  std::vector<std::pair<std::string, Tensor<T>>> params;

  void zero_grads() {
    for (auto& [name, p] : params) p.zero_grad();
  }

  std::int64_t num_params() const {
    std::int64_t n = 0;
    for (const auto& [name, p] : params) n += p.numel();
    return n;
  }
};

// ---------------------------------------------------------------------------
// build

namespace detail {

// Conv stem channel schedule: 3x3 stride-2 convs doubling the width until it
// reaches C at the target grid.
inline std::vector<int> stem_channels(int stride, int c) {
  int m = 0;
  for (int s = stride; s > 1; s /= 2) {
    if (s % 2 != 0) throw ConfigError("conv stem: stride must be a power of two");
    ++m;
  }
  std::vector<int> ch(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) ch[static_cast<std::size_t>(i)] = std::max(c >> (m - 1 - i), 4);
  if (m > 0) ch.back() = c;
  return ch;
}

}  // namespace detail

template <typename T>
class ModelBuilder {
 public:
  ModelBuilder(Model<T>& m, std::uint64_t seed, bool zero_init)
      : m_(m), rng_(seed), zero_init_(zero_init) {}

  Tensor<T> trunc_normal(std::string name, Shape shape) {
    std::vector<T> data(static_cast<std::size_t>(shape_numel(shape)), T(0));
    if (!zero_init_)
      for (auto& v : data) v = static_cast<T>(rng_.trunc_normal(0.02));
    return reg(std::move(name), Tensor<T>::leaf(std::move(shape), std::move(data)));
  }

  Tensor<T> normal02(std::string name, Shape shape) {
    std::vector<T> data(static_cast<std::size_t>(shape_numel(shape)), T(0));
    if (!zero_init_)
      for (auto& v : data) v = static_cast<T>(rng_.normal(0.0, 0.02));
    return reg(std::move(name), Tensor<T>::leaf(std::move(shape), std::move(data)));
  }

  Tensor<T> zeros(std::string name, Shape shape) {
    return reg(std::move(name), Tensor<T>::leaf_zeros(std::move(shape)));
  }

  Tensor<T> ones(std::string name, Shape shape) {
    const auto n = static_cast<std::size_t>(shape_numel(shape));
    return reg(std::move(name),
               Tensor<T>::leaf(std::move(shape), std::vector<T>(n, T(1))));
  }

 private:
  Tensor<T> reg(std::string name, Tensor<T> t) {
    m_.params.emplace_back(std::move(name), t);
    return t;
  }

  Model<T>& m_;
  Rng rng_;
  bool zero_init_;
};

// Deterministic build: the same (config, seed) always yields bitwise
// identical parameters. `zero_init` skips the random draws (used by the
// parameter counter and by checkpoint loading, which overwrites the values).
template <typename T>
Model<T> build_model(const ModelConfig& cfg, std::uint64_t seed,
                     bool zero_init = false) {
  cfg.validate();
  Model<T> m;
  m.cfg = cfg;
  ModelBuilder<T> b(m, seed, zero_init);

  const auto grids = cfg.stage_grids();
  const int fs = cfg.first_stage();
  const int ls = cfg.last_stage();
  const int c0 = cfg.stage.channels[static_cast<std::size_t>(fs)];
  const int stride = cfg.embed_stride();

  if (cfg.embed_kind == EmbedKind::linear) {
    m.embed_w = b.trunc_normal("embed.w", {3 * stride * stride, c0});
    m.embed_b = b.zeros("embed.b", {c0});
  } else {
    const auto ch = detail::stem_channels(stride, c0);
    int cin = 3;
    for (std::size_t i = 0; i < ch.size(); ++i) {
      const std::string p = "embed.stem" + std::to_string(i);
      StemConv<T> sc{b.trunc_normal(p + ".w", {ch[i], cin, 3, 3}),
                     b.zeros(p + ".b", {ch[i]}), b.ones(p + ".ln.g", {ch[i]}),
                     b.zeros(p + ".ln.b", {ch[i]})};
      m.stem.push_back(std::move(sc));
      cin = ch[i];
    }
    m.embed_w = b.trunc_normal("embed.proj.w", {c0, c0});
    m.embed_b = b.zeros("embed.proj.b", {c0});
  }

  if (cfg.uses_cls()) m.cls_token = b.trunc_normal("cls", {1, c0});

  const int n0 = grids[static_cast<std::size_t>(fs)] *
                     grids[static_cast<std::size_t>(fs)] +
                 (cfg.uses_cls() ? 1 : 0);
  if (cfg.pos_kind == PosKind::learned_absolute) {
    m.pos_table = b.normal02("pos", {n0, c0});
  } else if (cfg.pos_kind == PosKind::sincos_absolute) {
    m.pos_table = sincos_table<T>(n0, c0);  // fixed, not a parameter
  }

  for (int s = fs; s <= ls; ++s) {
    const auto si = static_cast<std::size_t>(s);
    StageParams<T> st;
    st.stage_index = s;
    st.grid = grids[si];
    st.channels = cfg.stage.channels[si];
    const int heads = cfg.stage.heads[si];
    const int d = cfg.stage.head_dim[si];
    const int c = st.channels;
    const int e = c * cfg.ffn_expansion;
    const int tokens = st.grid * st.grid + (cfg.uses_cls() ? 1 : 0);
    for (int blk = 0; blk < cfg.stage.blocks[si]; ++blk) {
      const std::string p =
          "s" + std::to_string(s + 1) + ".b" + std::to_string(blk);
      BlockParams<T> bp;
      bp.ln1_g = b.ones(p + ".ln1.g", {c});
      bp.ln1_b = b.zeros(p + ".ln1.b", {c});
      for (int h = 0; h < heads; ++h) {
        const std::string hp = p + ".attn.h" + std::to_string(h);
        HeadParams<T> head{b.trunc_normal(hp + ".wq", {c, d}),
                           b.trunc_normal(hp + ".wk", {c, d}),
                           b.trunc_normal(hp + ".wv", {c, d}),
                           b.zeros(hp + ".bq", {d}),
                           b.zeros(hp + ".bk", {d}),
                           b.zeros(hp + ".bv", {d}),
                           std::nullopt};
        if (cfg.uses_paas()) head.wp = b.ones(hp + ".wp", {tokens, tokens});
        bp.attn.heads.push_back(std::move(head));
      }
      bp.attn.wo = b.trunc_normal(p + ".attn.wo", {c, c});
      bp.attn.bo = b.zeros(p + ".attn.bo", {c});
      bp.ln2_g = b.ones(p + ".ln2.g", {c});
      bp.ln2_b = b.zeros(p + ".ln2.b", {c});
      bp.ffn.w1 = b.trunc_normal(p + ".ffn.w1", {c, e});
      bp.ffn.b1 = b.zeros(p + ".ffn.b1", {e});
      if (cfg.ffn_kind == FfnKind::conv)
        bp.ffn.dw = b.trunc_normal(p + ".ffn.dw", {e, 1, 3, 3});
      bp.ffn.w2 = b.trunc_normal(p + ".ffn.w2", {e, c});
      bp.ffn.b2 = b.zeros(p + ".ffn.b2", {c});
      st.blocks.push_back(std::move(bp));
    }
    if (s < ls) {
      const auto ni = static_cast<std::size_t>(s + 1);
      st.pool_to_next = PoolProj<T>{
          b.trunc_normal("pool" + std::to_string(s + 1) + ".w",
                         {st.channels, cfg.stage.channels[ni]}),
          b.zeros("pool" + std::to_string(s + 1) + ".b",
                  {cfg.stage.channels[ni]})};
    }
    m.stages.push_back(std::move(st));
  }

  const int cl = cfg.stage.channels[static_cast<std::size_t>(ls)];
  m.head_ln_g = b.ones("head.ln.g", {cl});
  m.head_ln_b = b.zeros("head.ln.b", {cl});
  m.head_w = b.trunc_normal("head.w", {cl, cfg.num_classes});
  m.head_b = b.zeros("head.b", {cfg.num_classes});
  return m;
}

// ---------------------------------------------------------------------------
// forward pieces

// Flatten each patch (channel-major) and project: [1,3,H,W] -> [N x C].
template <typename T>
Tensor<T> linear_patch_embed(const Tensor<T>& img, int patch,
                             const Tensor<T>& w, const Tensor<T>& b) {
  return add_row_bias(matmul(im2row_patches(img, patch), w), b);
}

// Stack of 3x3 stride-2 convs (norm + GELU after each), then a pointwise
// projection; output is the token matrix of the first stage grid.
template <typename T>
Tensor<T> conv_stem_embed(const Tensor<T>& img,
                          const std::vector<StemConv<T>>& stem,
                          const Tensor<T>& proj_w, const Tensor<T>& proj_b) {
  if (img.rank() != 4 || img.dim(0) != 1)
    throw ShapeError("conv_stem_embed: expected [1,3,H,W], got " +
                     shape_str(img.shape()));
  Tensor<T> h = img;
  for (const auto& sc : stem) {
    if (h.dim(2) % 2 != 0 || h.dim(3) % 2 != 0)
      throw ConfigError("conv_stem_embed: resolution " +
                        std::to_string(h.dim(2)) + "x" +
                        std::to_string(h.dim(3)) +
                        " not divisible by the stem stride");
    h = add_channel_bias(conv2d(h, sc.w, 2, 1), sc.b);
    Tensor<T> tok = layer_norm(nchw_to_tokens(h), sc.ln_g, sc.ln_b);
    h = tokens_to_nchw(gelu(tok), h.dim(2), h.dim(3));
  }
  return add_row_bias(matmul(nchw_to_tokens(h), proj_w), proj_b);
}

// Per-token MLP: W2 * GELU(W1 x + b1) + b2.
template <typename T>
Tensor<T> ffn_forward(const Tensor<T>& x, const FfnParams<T>& p) {
  return add_row_bias(
      matmul(gelu(add_row_bias(matmul(x, p.w1), p.b1)), p.w2), p.b2);
}

// Pointwise expansion -> GELU -> depthwise 3x3 over the token grid -> GELU
// -> pointwise squeeze. Exchanges information between neighboring tokens.
template <typename T>
Tensor<T> conv_ffn_forward(const Tensor<T>& x, int h, int w,
                           const FfnParams<T>& p) {
  if (!p.dw) throw ConfigError("conv_ffn_forward: missing depthwise kernel");
  if (x.rank() != 2 || x.dim(0) != h * w)
    throw ConfigError("conv_ffn_forward: token count " +
                      std::to_string(x.rank() == 2 ? x.dim(0) : -1) +
                      " does not form a " + std::to_string(h) + "x" +
                      std::to_string(w) + " grid");
  Tensor<T> t = gelu(add_row_bias(matmul(x, p.w1), p.b1));
  const int e = t.dim(1);
  Tensor<T> g = conv2d(tokens_to_nchw(t, h, w), *p.dw, 1, 1, e);
  return add_row_bias(matmul(gelu(nchw_to_tokens(g)), p.w2), p.b2);
}

// Pre-norm residual block: x + MHSA(LN(x)), then + FFN(LN(.)).
template <typename T>
Tensor<T> transformer_block_forward(const Tensor<T>& x,
                                    const BlockParams<T>& bp, int h, int w,
                                    FfnKind ffn_kind, int window = 0) {
  Tensor<T> a = layer_norm(x, bp.ln1_g, bp.ln1_b);
  Tensor<T> att = window > 0 ? local_window_attention(a, h, w, window, bp.attn)
                             : mhsa_forward(a, bp.attn);
  Tensor<T> y = add(x, att);
  Tensor<T> f = layer_norm(y, bp.ln2_g, bp.ln2_b);
  Tensor<T> ff = ffn_kind == FfnKind::conv ? conv_ffn_forward(f, h, w, bp.ffn)
                                           : ffn_forward(f, bp.ffn);
  return add(y, ff);
}

// 2x2 average pooling on the token grid followed by a channel projection.
template <typename T>
Tensor<T> pool_between_stages(const Tensor<T>& tokens, int h, int w,
                              const PoolProj<T>& p) {
  Tensor<T> pooled = avg_pool2d(tokens_to_nchw(tokens, h, w));
  return add_row_bias(matmul(nchw_to_tokens(pooled), p.w), p.b);
}

template <typename T>
Tensor<T> classification_head(const Tensor<T>& tokens, HeadKind kind,
                              bool has_cls, const Tensor<T>& ln_g,
                              const Tensor<T>& ln_b, const Tensor<T>& w,
                              const Tensor<T>& b) {
  Tensor<T> feat;
  if (kind == HeadKind::cls_token) {
    if (!has_cls)
      throw ConfigError("classification head: CLS requested on a model built "
                        "without a CLS token");
    feat = gather_rows(tokens, std::vector<int>{0});
  } else {
    feat = reshape(mean_rows(tokens), {1, tokens.dim(1)});
  }
  Tensor<T> normed = layer_norm(feat, ln_g, ln_b);
  return reshape(add_row_bias(matmul(normed, w), b), {b.dim(0)});
}

// ---------------------------------------------------------------------------
// full forward

// One sample: [1,3,H,W] in [0,1] -> [num_classes] logits. Inputs are mapped
// to [-1,1] before embedding. Differentiable end to end, including through
// the image when it is a tracked leaf (used by the attacks).
template <typename T>
Tensor<T> forward_one(const Model<T>& m, const Tensor<T>& img) {
  const ModelConfig& cfg = m.cfg;
  if (img.rank() != 4 || img.dim(0) != 1 || img.dim(1) != 3 ||
      img.dim(2) != cfg.input_res || img.dim(3) != cfg.input_res)
    throw ConfigError("forward: input " + shape_str(img.shape()) +
                      " does not match configured resolution [1x3x" +
                      std::to_string(cfg.input_res) + "x" +
                      std::to_string(cfg.input_res) + "]");
  Tensor<T> x = add_scalar(scale(img, T(2)), T(-1));
  Tensor<T> tokens =
      cfg.embed_kind == EmbedKind::linear
          ? linear_patch_embed(x, cfg.resolved_patch(), m.embed_w, m.embed_b)
          : conv_stem_embed(x, m.stem, m.embed_w, m.embed_b);
  if (m.cls_token)
    tokens = concat_rows<T>({*m.cls_token, tokens});
  if (m.pos_table) tokens = add(tokens, *m.pos_table);

  for (std::size_t i = 0; i < m.stages.size(); ++i) {
    const auto& st = m.stages[i];
    for (const auto& bp : st.blocks)
      tokens = transformer_block_forward(tokens, bp, st.grid, st.grid,
                                         cfg.ffn_kind, cfg.attn_window);
    if (st.pool_to_next)
      tokens = pool_between_stages(tokens, st.grid, st.grid, *st.pool_to_next);
  }
  return classification_head(tokens, cfg.head_kind, m.cls_token.has_value(),
                             m.head_ln_g, m.head_ln_b, m.head_w, m.head_b);
}

// Batch forward: [B,3,H,W] -> [B,K]. Samples are independent; the batch is
// split outside the graph, so input gradients are per-sample only.
template <typename T>
Tensor<T> forward(const Model<T>& m, const Tensor<T>& batch) {
  if (batch.rank() != 4)
    throw ConfigError("forward: expected [B,3,H,W], got " +
                      shape_str(batch.shape()));
  const int bsz = batch.dim(0);
  const std::size_t per =
      static_cast<std::size_t>(batch.numel()) / static_cast<std::size_t>(bsz);
  std::vector<Tensor<T>> logits;
  logits.reserve(static_cast<std::size_t>(bsz));
  for (int i = 0; i < bsz; ++i) {
    std::vector<T> one(batch.data() + static_cast<std::size_t>(i) * per,
                       batch.data() + static_cast<std::size_t>(i + 1) * per);
    Tensor<T> img({1, batch.dim(1), batch.dim(2), batch.dim(3)},
                  std::move(one));
    logits.push_back(forward_one(m, img));
  }
  return stack_rows(logits);
}

// Read-only copy for evaluation workers: shares the weight buffers but
// drops every graph node, so concurrent forward/backward passes never
// accumulate into shared parameter gradients.
template <typename T>
Model<T> eval_snapshot(const Model<T>& m) {
  Model<T> s = m;
  auto detach = [](Tensor<T>& t) {
    if (t.defined()) t = t.detach();
  };
  detach(s.embed_w);
  detach(s.embed_b);
  for (auto& sc : s.stem) {
    detach(sc.w);
    detach(sc.b);
    detach(sc.ln_g);
    detach(sc.ln_b);
  }
  if (s.cls_token) detach(*s.cls_token);
  if (s.pos_table) detach(*s.pos_table);
  for (auto& st : s.stages) {
    for (auto& bp : st.blocks) {
      detach(bp.ln1_g);
      detach(bp.ln1_b);
      detach(bp.ln2_g);
      detach(bp.ln2_b);
      for (auto& h : bp.attn.heads) {
        detach(h.wq);
        detach(h.wk);
        detach(h.wv);
        detach(h.bq);
        detach(h.bk);
        detach(h.bv);
        if (h.wp) detach(*h.wp);
      }
      detach(bp.attn.wo);
      detach(bp.attn.bo);
      detach(bp.ffn.w1);
      detach(bp.ffn.b1);
      if (bp.ffn.dw) detach(*bp.ffn.dw);
      detach(bp.ffn.w2);
      detach(bp.ffn.b2);
    }
    if (st.pool_to_next) {
      detach(st.pool_to_next->w);
      detach(st.pool_to_next->b);
    }
  }
  detach(s.head_ln_g);
  detach(s.head_ln_b);
  detach(s.head_w);
  detach(s.head_b);
  for (auto& [name, p] : s.params) detach(p);
  return s;
}

// ---------------------------------------------------------------------------
// analytic accounting

std::int64_t count_params(const ModelConfig& cfg);

// Multiply-accumulate count of one forward pass at the given resolution.
// Matmuls and convolutions only; norms and activations are not counted.
std::int64_t count_flops(const ModelConfig& cfg, int resolution);

// Committed stage layouts. v1 is the single-stage 12-block baseline; v2-v6
// redistribute the 12 blocks across resolution stages. rvt_ti combines the
// v2 layout with the conv stem, conv FFN, GAP head, position-aware scaling
// and 8 heads in the main stage. tiny is a 2-block desk-scale preset.
ModelConfig preset_v(int variant, int num_classes = 1000, int input_res = 224);
ModelConfig preset_rvt_ti(int num_classes = 1000, int input_res = 224);
ModelConfig preset_tiny(int num_classes = 4, int input_res = 32);

}  // namespace rvt
